//! Pretrains a one-pass registration network on randomly transformed boxes,
//! trains a sampler against it, and compares mean rotation errors with the
//! identity transform and with random sampling.
//!
//! `cargo run --release --example registration`

use taskdown::harness::{build_dataset, pretrain_head, registration_mre, test_pairs, train_sampler, Classical, RunConfig};
use taskdown::heads::TaskKind;
use taskdown::samplers::SamplerKind;

pub fn run_example() -> taskdown::Result<()> {
    let config = RunConfig::toy(TaskKind::Registration);
    let data = build_dataset(&config.dataset, config.n, config.seed)?;
    let pretrained = pretrain_head(&config, &data)?;
    let reference = &pretrained.report.reference;
    println!(
        "full clouds: head MRE {:.2} deg, identity MRE {:.2} deg, identical pairs {:.2} deg",
        reference["head_mre"], reference["identity_mre"], reference["head_identity_pair_mre"]
    );
    let trained = train_sampler(&config, pretrained.head, &data)?;
    let pairs = test_pairs(&config, &data);
    let m = config.m;
    let random = registration_mre(&trained.head, &pairs, &Classical::new(SamplerKind::Random, config.seed), m)?;
    let fps = registration_mre(&trained.head, &pairs, &Classical::new(SamplerKind::Fps, config.seed), m)?;
    let learned = registration_mre(&trained.head, &pairs, &trained.sampler, m)?;
    println!("m={m}: random {:.2}  fps {:.2}  learned G {:.2} M {:.2} C {:.2}", random[0], fps[0], learned[0], learned[1], learned[2]);
    Ok(())
}

fn main() -> taskdown::Result<()> {
    env_logger::init();
    run_example()
}
