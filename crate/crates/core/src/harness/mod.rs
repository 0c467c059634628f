//! Experiment harness: configuration, datasets, training loops, evaluation,
//! benchmarking, robustness and parameter sweeps, with checkpoints and
//! reports on disk.

mod bench;
mod checkpoint;
mod commands;
mod config;
mod data;
mod evaluate;
mod report;
mod robustness;
mod sweep;
mod train;

use std::path::Path;

pub use bench::{bench, timing, BenchConfig};
pub use checkpoint::Checkpoint;
pub use commands::{run_bench, run_robustness, run_sample, run_sweep, SampleMethod, SampleRequest};
pub use config::{exponential_decay, DatasetSpec, PairSpec, RunConfig};
pub use data::{build_dataset, registration_pairs, RegistrationPair, TaskData};
pub use evaluate::{
    classification_accuracy, evaluate_into, head_accuracy, head_mre, metric_names, reconstruction_error,
    reconstruction_nre, registration_mre, sampler_stats, set_points, Classical, Downsampler,
};
pub use report::{EpochLog, MetricCell, RunReport, SamplerStat, Timing};
pub use robustness::{noise_metric, robustness};
pub use sweep::{sweep, sweep_label};
pub use train::{pretrain_head, record_reference, test_pairs, train_sampler, Pretrained, Trained};

use crate::error::{Error, Result};
use crate::heads::TaskHead;
use crate::samplers::SamplerKind;
use crate::sampling::LearnedSampler;

/// File name of a pretrained head checkpoint inside a run directory.
pub const HEAD_CHECKPOINT: &str = "head.ckpt";
/// File name of a trained sampler checkpoint inside a run directory.
pub const SAMPLER_CHECKPOINT: &str = "sampler.ckpt";

fn ensure_dir(out: &Path) -> Result<()> {
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))
}

/// Pretrains a head and writes `head.ckpt`, `config.toml` and the report to `out`.
pub fn run_pretrain(config: &RunConfig, out: &Path) -> Result<RunReport> {
    config.validate()?;
    ensure_dir(out)?;
    let data = build_dataset(&config.dataset, config.n, config.seed)?;
    let Pretrained { head, report } = pretrain_head(config, &data)?;
    let mut ck = Checkpoint::new(config.clone());
    ck.add_store(head.store());
    ck.reference = report.reference.clone();
    ck.save(out.join(HEAD_CHECKPOINT))?;
    config.save(out.join("config.toml"))?;
    report.save(out)?;
    Ok(report)
}

/// Rebuilds a head from any checkpoint that holds one.
pub fn load_head(path: impl AsRef<Path>) -> Result<(Checkpoint, TaskHead)> {
    let ck = Checkpoint::load(path)?;
    let mut head = TaskHead::new(ck.config.head.clone(), 0)?;
    ck.load_store(head.store_mut())?;
    Ok((ck, head))
}

/// Rebuilds the head and sampler of a training checkpoint.
pub fn load_trained(path: impl AsRef<Path>) -> Result<(Checkpoint, TaskHead, LearnedSampler)> {
    let (ck, head) = load_head(&path)?;
    if !ck.has_prefix("sampler.") {
        return Err(Error::Config(format!(
            "{} holds no sampler; train one first",
            path.as_ref().display()
        )));
    }
    let c = &ck.config;
    let mut sampler = LearnedSampler::new(&c.encoder_widths, &c.rho_hidden, c.m_max(), c.tau_min, 0)?;
    sampler.threshold = c.sparsify_threshold;
    ck.load_store(sampler.encoder.store_mut())?;
    ck.load_store(sampler.sampler.store_mut())?;
    Ok((ck, head, sampler))
}

/// Evaluates the learned sampler and the random / farthest point baselines
/// at every size in `m_list` on the test split.
pub fn evaluate_run(
    config: &RunConfig,
    head: &TaskHead,
    sampler: &LearnedSampler,
    data: &TaskData,
    m_list: &[usize],
    report: &mut RunReport,
) -> Result<()> {
    let pairs = test_pairs(config, data);
    let clouds = &data.test;
    let learned_sizes: Vec<usize> = m_list.iter().copied().filter(|&m| m <= sampler.m_out()).collect();
    if learned_sizes.len() != m_list.len() {
        return Err(Error::arg(format!(
            "sampler produces at most {} points, asked for {m_list:?}",
            sampler.m_out()
        )));
    }
    evaluate_into(report, head, clouds, &pairs, sampler, m_list)?;
    for kind in [SamplerKind::Random, SamplerKind::Fps] {
        evaluate_into(report, head, clouds, &pairs, &Classical::new(kind, config.seed), m_list)?;
    }
    let probe: Vec<_> = if pairs.is_empty() {
        clouds.clone()
    } else {
        pairs.iter().map(|p| p.source.clone()).collect()
    };
    for &m in m_list {
        report.sampler_stats.push(sampler_stats(sampler, &probe, m)?);
    }
    Ok(())
}

/// Trains a sampler against the configured head, evaluates it and writes
/// `sampler.ckpt`, `config.toml` and the report to `out`.
pub fn run_train(config: &RunConfig, out: &Path) -> Result<RunReport> {
    config.validate()?;
    ensure_dir(out)?;
    let data = build_dataset(&config.dataset, config.n, config.seed)?;
    let (head, reference) = match &config.head_checkpoint {
        Some(path) => {
            let (ck, head) = load_head(path)?;
            if ck.config.head != config.head {
                return Err(Error::Config(format!(
                    "head in {} does not match the configured head",
                    path.display()
                )));
            }
            (head, ck.reference)
        }
        None if config.joint_training && config.head_from_scratch => {
            let mut head = TaskHead::new(config.head.clone(), config.seed)?;
            let samples: Vec<_> = data.train.iter().map(|c| c.points().clone()).collect();
            head.calibrate(&samples);
            (head, Default::default())
        }
        None => return Err(Error::Config("training needs a pretrained head checkpoint".into())),
    };
    let Trained {
        sampler,
        head,
        mut report,
    } = train_sampler(config, head, &data)?;
    report.reference = reference;
    evaluate_run(config, &head, &sampler, &data, &config.eval_m, &mut report)?;
    let mut ck = Checkpoint::new(config.clone());
    ck.add_store(head.store());
    ck.add_store(sampler.encoder.store());
    ck.add_store(sampler.sampler.store());
    ck.reference = report.reference.clone();
    ck.save(out.join(SAMPLER_CHECKPOINT))?;
    config.save(out.join("config.toml"))?;
    report.save(out)?;
    Ok(report)
}

/// Re-evaluates a training checkpoint at the given sizes (default: the
/// configured ones) and writes the report to `out`.
pub fn run_eval(checkpoint: &Path, m_list: Option<&[usize]>, out: &Path) -> Result<RunReport> {
    ensure_dir(out)?;
    let (ck, head, sampler) = load_trained(checkpoint)?;
    let config = &ck.config;
    let sizes = m_list.unwrap_or(&config.eval_m);
    if let Some(&bad) = sizes.iter().find(|&&m| m == 0 || m > config.n) {
        return Err(Error::arg(format!("cannot evaluate m = {bad} on clouds of {} points", config.n)));
    }
    let data = build_dataset(&config.dataset, config.n, config.seed)?;
    let mut report = RunReport::new(config.task.name(), config.seed);
    report.reference = ck.reference.clone();
    evaluate_run(config, &head, &sampler, &data, sizes, &mut report)?;
    report.save(out)?;
    Ok(report)
}
