use std::fmt;
use std::path::Path;
use std::str::FromStr;

use super::{
    bench, build_dataset, ensure_dir, load_head, load_trained, robustness, sweep, BenchConfig, Classical, Downsampler,
    RunConfig, RunReport,
};
use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::io::{read_xyz, write_xyz};
use crate::samplers::{SamplerKind, SamplerSpec};
use crate::sampling::{sparsify, write_triplets};

/// How `sample` picks points.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleMethod {
    Classical(SamplerKind),
    Learned,
}

impl fmt::Display for SampleMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SampleMethod::Classical(kind) => kind.fmt(f),
            SampleMethod::Learned => f.pad("learned"),
        }
    }
}

impl FromStr for SampleMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "learned" => Ok(SampleMethod::Learned),
            other => other.parse().map(SampleMethod::Classical),
        }
    }
}

/// Options of a single-cloud sampling run.
#[derive(Debug, Clone)]
pub struct SampleRequest<'a> {
    pub input: &'a Path,
    pub method: SampleMethod,
    pub m: usize,
    pub seed: u64,
    /// Required for the learned method.
    pub checkpoint: Option<&'a Path>,
    /// Also write the sparsified sampling matrix here (learned method only).
    pub export_matrix: Option<&'a Path>,
}

/// Downsamples one `.xyz` cloud and writes `sampled.xyz` to `out`. The learned
/// method normalizes the input first and writes its completed set; with
/// `export_matrix` it also writes the sparse sampling matrix.
pub fn run_sample(request: &SampleRequest<'_>, out: &Path) -> Result<PointCloud> {
    ensure_dir(out)?;
    let cloud = read_xyz(request.input)?;
    let sampled = match request.method {
        SampleMethod::Classical(kind) => {
            if request.export_matrix.is_some() {
                return Err(Error::Config("only the learned method has a sampling matrix to export".into()));
            }
            let indices = SamplerSpec::new(kind, request.m, request.seed).apply(&cloud)?;
            cloud.select(&indices)?
        }
        SampleMethod::Learned => {
            let path = request
                .checkpoint
                .ok_or_else(|| Error::Config("the learned method needs --checkpoint".into()))?;
            let (_, _, sampler) = load_trained(path)?;
            let cloud = cloud.normalized();
            if let Some(matrix_path) = request.export_matrix {
                let s = sampler.matrix(&cloud, request.m)?;
                write_triplets(matrix_path, &sparsify(&s, sampler.threshold)?)?;
            }
            let result = sampler.downsample(&cloud, request.m)?;
            cloud.select(&result.completed)?
        }
    };
    write_xyz(out.join("sampled.xyz"), &sampled)?;
    Ok(sampled)
}

/// Runs the timing sweep and writes its report to `out`.
pub fn run_bench(config: &BenchConfig, out: &Path) -> Result<RunReport> {
    ensure_dir(out)?;
    let report = bench(config)?;
    report.save(out)?;
    Ok(report)
}

/// Evaluates a trained classification checkpoint and the random / farthest
/// point baselines under input noise and writes the report to `out`.
pub fn run_robustness(checkpoint: &Path, m: Option<usize>, levels: &[f64], seed: u64, out: &Path) -> Result<RunReport> {
    ensure_dir(out)?;
    let (ck, head, sampler) = load_trained(checkpoint)?;
    let config = &ck.config;
    let m = m.unwrap_or(config.m);
    let data = build_dataset(&config.dataset, config.n, config.seed)?;
    let random = Classical::new(SamplerKind::Random, seed);
    let fps = Classical::new(SamplerKind::Fps, seed);
    let samplers: [&dyn Downsampler; 3] = [&sampler, &random, &fps];
    let report = robustness(&head, &samplers, &data.test, m, levels, seed)?;
    report.save(out)?;
    Ok(report)
}

/// Trains one sampler per `(alpha, tau_min)` pair against the configured head
/// checkpoint and writes the report to `out`.
pub fn run_sweep(config: &RunConfig, alphas: &[f64], tau_mins: &[f64], out: &Path) -> Result<RunReport> {
    config.validate()?;
    if alphas.is_empty() || tau_mins.is_empty() {
        return Err(Error::Config("a sweep needs at least one alpha and one tau_min".into()));
    }
    ensure_dir(out)?;
    let path = config
        .head_checkpoint
        .as_ref()
        .ok_or_else(|| Error::Config("a sweep needs a pretrained head checkpoint".into()))?;
    let (_, head) = load_head(path)?;
    let data = build_dataset(&config.dataset, config.n, config.seed)?;
    let report = sweep(config, &head, &data, alphas, tau_mins)?;
    report.save(out)?;
    Ok(report)
}
