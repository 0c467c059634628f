//! Pretrains a small classifier on synthetic shapes, trains a sampler
//! against it at `m = 16`, and compares it with random and farthest point
//! sampling on held-out clouds.
//!
//! `cargo run --release --example train_classification`

use taskdown::harness::{
    build_dataset, classification_accuracy, pretrain_head, sampler_stats, train_sampler, Classical, RunConfig,
};
use taskdown::heads::TaskKind;
use taskdown::samplers::SamplerKind;

pub fn run_example() -> taskdown::Result<()> {
    let config = RunConfig::toy(TaskKind::Classification);
    let data = build_dataset(&config.dataset, config.n, config.seed)?;
    let pretrained = pretrain_head(&config, &data)?;
    println!(
        "head accuracy on full test clouds: {:.3}",
        pretrained.report.reference["head_test_accuracy"]
    );
    let trained = train_sampler(&config, pretrained.head, &data)?;
    let m = config.m;
    for kind in [SamplerKind::Random, SamplerKind::Fps] {
        let acc = classification_accuracy(&trained.head, &data.test, &Classical::new(kind, config.seed), m)?;
        println!("{kind:>8} m={m}: accuracy {:.3}", acc[0]);
    }
    let acc = classification_accuracy(&trained.head, &data.test, &trained.sampler, m)?;
    println!(" learned m={m}: generated {:.3}  matched {:.3}  completed {:.3}", acc[0], acc[1], acc[2]);
    let stats = sampler_stats(&trained.sampler, &data.test, m)?;
    println!(
        "nonzero fraction at r = {}: {:.4} ({:.2} per column)",
        trained.sampler.threshold, stats.nonzero_fraction, stats.nonzero_per_column
    );
    Ok(())
}

fn main() -> taskdown::Result<()> {
    env_logger::init();
    run_example()
}
