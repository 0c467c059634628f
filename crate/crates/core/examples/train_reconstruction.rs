//! Pretrains a fully connected autoencoder on random boxes, trains a sampler
//! against its frozen decoder at `m = 32`, and reports normalized
//! reconstruction errors of learned, random and farthest point sampling.
//!
//! `cargo run --release --example train_reconstruction`

use taskdown::harness::{build_dataset, pretrain_head, reconstruction_nre, train_sampler, Classical, RunConfig};
use taskdown::heads::TaskKind;
use taskdown::samplers::SamplerKind;

pub fn run_example() -> taskdown::Result<()> {
    let config = RunConfig::toy(TaskKind::ReconstructionMlp);
    let data = build_dataset(&config.dataset, config.n, config.seed)?;
    let pretrained = pretrain_head(&config, &data)?;
    let reference = &pretrained.report.reference;
    println!(
        "autoencoder CD {:.5} (centroid-only baseline {:.5}), EMD {:.5}",
        reference["head_cd"], reference["centroid_cd"], reference["head_emd"]
    );
    let trained = train_sampler(&config, pretrained.head, &data)?;
    let m = config.m;
    for kind in [SamplerKind::Random, SamplerKind::Fps] {
        let nre = reconstruction_nre(&trained.head, &data.test, &Classical::new(kind, config.seed), m)?;
        println!("{kind:>8} m={m}: NRE_CD {:.3}  NRE_EMD {:.3}", nre[0][0], nre[1][0]);
    }
    let nre = reconstruction_nre(&trained.head, &data.test, &trained.sampler, m)?;
    println!(
        " learned m={m}: NRE_CD G {:.3} M {:.3} C {:.3}  NRE_EMD G {:.3}",
        nre[0][0], nre[0][1], nre[0][2], nre[1][0]
    );
    let full = reconstruction_nre(&trained.head, &data.test, &Classical::new(SamplerKind::Fps, 0), config.n)?;
    println!("NRE_CD with the full cloud: {}", full[0][0]);
    Ok(())
}

fn main() -> taskdown::Result<()> {
    env_logger::init();
    run_example()
}
