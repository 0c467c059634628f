use std::time::Instant;

use super::report::{RunReport, Timing};
use crate::cloud::PointCloud;
use crate::error::Result;
use crate::features::{extract_features, DEFAULT_ENCODER_WIDTHS};
use crate::heads::{classify, HeadSpec, TaskHead};
use crate::samplers::{fps_sample, random_sample};
use crate::sampling::{anneal_softmax, predict_raw_rows, sparse_apply, sparsify, LearnedSampler, DEFAULT_RHO_HIDDEN};
use crate::synthetic::{make_synthetic, Shape};

/// Timing sweep over output sizes on synthetic clouds.
#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub n: usize,
    pub m_grid: Vec<usize>,
    pub shapes: usize,
    pub repeats: usize,
    pub encoder_widths: Vec<usize>,
    pub rho_hidden: Vec<usize>,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            n: 1024,
            m_grid: vec![8, 16, 32, 64, 128, 256, 512],
            shapes: 4,
            repeats: 3,
            encoder_widths: DEFAULT_ENCODER_WIDTHS.to_vec(),
            rho_hidden: DEFAULT_RHO_HIDDEN.to_vec(),
            seed: 0,
        }
    }
}

/// Fastest of `repeats` runs of `f`, in seconds.
fn best_of<T>(repeats: usize, mut f: impl FnMut() -> Result<T>) -> Result<f64> {
    let mut best = f64::INFINITY;
    for _ in 0..repeats.max(1) {
        let start = Instant::now();
        std::hint::black_box(f()?);
        best = best.min(start.elapsed().as_secs_f64());
    }
    Ok(best)
}

/// Mean per-shape wall-clock of random sampling, farthest point sampling and
/// the learned generation path, plus the learned path split into stages.
///
/// Timing rows use stages `random`, `fps`, `learned`, `learned.features`,
/// `learned.matrix`, `learned.regression` and `head`.
pub fn bench(config: &BenchConfig) -> Result<RunReport> {
    let clouds: Vec<PointCloud> = (0..config.shapes.max(1))
        .map(|i| make_synthetic(Shape::ALL[i % 4], config.n, config.seed.wrapping_add(i as u64)))
        .collect::<Result<_>>()?;
    let mut head_spec = HeadSpec::classification(40);
    head_spec.encoder_widths = vec![64, 64, 64, 128, 1024];
    let head = TaskHead::new(head_spec, config.seed)?;
    let mut report = RunReport::new("bench", config.seed);
    for &m in &config.m_grid {
        let mut sampler = LearnedSampler::new(&config.encoder_widths, &config.rho_hidden, m, 0.1, config.seed)?;
        sampler.calibrate(&clouds[..1])?;
        let mut sums = [0.0f64; 7];
        for (k, cloud) in clouds.iter().enumerate() {
            let seed = config.seed.wrapping_add(k as u64);
            sums[0] += best_of(config.repeats, || random_sample(cloud, m, seed))?;
            sums[1] += best_of(config.repeats, || fps_sample(cloud, m, 0))?;
            sums[2] += best_of(config.repeats, || sampler.generate(cloud, m))?;
            let features = extract_features(cloud, &sampler.encoder)?;
            sums[3] += best_of(config.repeats, || extract_features(cloud, &sampler.encoder))?;
            let s = anneal_softmax(&predict_raw_rows(&features, &sampler.sampler)?, 0.1)?;
            sums[4] += best_of(config.repeats, || {
                anneal_softmax(&predict_raw_rows(&features, &sampler.sampler)?, 0.1)
            })?;
            sums[5] += best_of(config.repeats, || sparse_apply(cloud, &sparsify(&s, sampler.threshold)?))?;
            let generated = sampler.generate(cloud, m)?;
            sums[6] += best_of(config.repeats, || classify(generated.view(), &head))?;
        }
        let names = [
            "random",
            "fps",
            "learned",
            "learned.features",
            "learned.matrix",
            "learned.regression",
            "head",
        ];
        for (name, sum) in names.iter().zip(sums) {
            report.timings.push(Timing {
                stage: name.to_string(),
                m,
                seconds: sum / clouds.len() as f64,
            });
        }
    }
    Ok(report)
}

/// Mean time of `stage` at size `m` from a bench report.
pub fn timing(report: &RunReport, stage: &str, m: usize) -> Option<f64> {
    report.timings.iter().find(|t| t.stage == stage && t.m == m).map(|t| t.seconds)
}
