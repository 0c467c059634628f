//! Trains one sampler for several output sizes at once and evaluates it at
//! each size next to a fixed-size sampler trained for `m = 16`.
//!
//! `cargo run --release --example flexible_ratios`

use taskdown::harness::{build_dataset, classification_accuracy, pretrain_head, train_sampler, Classical, RunConfig};
use taskdown::heads::TaskKind;
use taskdown::samplers::SamplerKind;

pub fn run_example() -> taskdown::Result<()> {
    let mut config = RunConfig::toy(TaskKind::Classification);
    let data = build_dataset(&config.dataset, config.n, config.seed)?;
    let pretrained = pretrain_head(&config, &data)?;
    let head = pretrained.head;
    let fixed = train_sampler(&config, head.clone(), &data)?;
    let fixed_acc = classification_accuracy(&fixed.head, &data.test, &fixed.sampler, config.m)?;
    println!("fixed sampler m={}: accuracy {:.3}", config.m, fixed_acc[0]);

    config.flexible = true;
    config.m_set = vec![8, 16, 32, 64];
    let flexible = train_sampler(&config, head, &data)?;
    for &m in &config.m_set {
        let learned = classification_accuracy(&flexible.head, &data.test, &flexible.sampler, m)?;
        let random = classification_accuracy(&flexible.head, &data.test, &Classical::new(SamplerKind::Random, config.seed), m)?;
        println!("flexible m={m:>2}: learned {:.3}  completed {:.3}  random {:.3}", learned[0], learned[2], random[0]);
    }
    Ok(())
}

fn main() -> taskdown::Result<()> {
    env_logger::init();
    run_example()
}
