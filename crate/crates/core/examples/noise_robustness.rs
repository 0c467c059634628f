//! Trains a classification sampler and measures accuracy as Gaussian noise
//! is added to the test clouds.
//!
//! `cargo run --release --example noise_robustness`

use taskdown::harness::{build_dataset, noise_metric, pretrain_head, robustness, train_sampler, Classical, Downsampler, RunConfig};
use taskdown::heads::TaskKind;
use taskdown::samplers::SamplerKind;
use taskdown::SetKind;

pub fn run_example() -> taskdown::Result<()> {
    let config = RunConfig::toy(TaskKind::Classification);
    let data = build_dataset(&config.dataset, config.n, config.seed)?;
    let pretrained = pretrain_head(&config, &data)?;
    let trained = train_sampler(&config, pretrained.head, &data)?;
    let random = Classical::new(SamplerKind::Random, config.seed);
    let fps = Classical::new(SamplerKind::Fps, config.seed);
    let samplers: [&dyn Downsampler; 3] = [&random, &fps, &trained.sampler];
    let levels = [0.0, 0.02, 0.05, 0.1];
    let report = robustness(&trained.head, &samplers, &data.test, config.m, &levels, config.seed)?;
    let header: Vec<String> = levels.iter().map(|l| format!("{l:>5}")).collect();
    println!("   noise: {}", header.join("  "));
    for sampler in samplers {
        let name = sampler.name();
        let row: Vec<String> = levels
            .iter()
            .map(|&level| {
                let acc = report.metric(&name, config.m, SetKind::Generated, &noise_metric(level));
                format!("{:.3}", acc.unwrap_or(f64::NAN))
            })
            .collect();
        println!("{name:>8}: {}", row.join("  "));
    }
    Ok(())
}

fn main() -> taskdown::Result<()> {
    env_logger::init();
    run_example()
}
