use super::evaluate::{set_points, Downsampler};
use super::report::RunReport;
use crate::cloud::{PointCloud, SetKind};
use crate::error::{Error, Result};
use crate::heads::{classify, TaskHead, TaskKind};
use crate::noise::add_gaussian_noise;

/// Metric name of the accuracy at a noise level, e.g. `accuracy@0.05`.
pub fn noise_metric(level: f64) -> String {
    format!("accuracy@{level}")
}

/// Classification accuracy of the generated and completed sets when inputs
/// carry Gaussian noise of each level (relative to per-dimension spread).
pub fn robustness(
    head: &TaskHead,
    samplers: &[&dyn Downsampler],
    clouds: &[PointCloud],
    m: usize,
    levels: &[f64],
    seed: u64,
) -> Result<RunReport> {
    if head.kind() != TaskKind::Classification {
        return Err(Error::config("robustness runs need a classification head"));
    }
    let mut report = RunReport::new("robustness", seed);
    for sampler in samplers {
        for &level in levels {
            let mut correct = [0usize; 2];
            for (i, cloud) in clouds.iter().enumerate() {
                let label = cloud.label.ok_or_else(|| Error::arg("robustness clouds need labels"))?;
                let noisy = add_gaussian_noise(cloud, level, seed.wrapping_add(i as u64))?;
                let result = sampler.downsample(&noisy, m)?;
                for (k, set) in [SetKind::Generated, SetKind::Completed].into_iter().enumerate() {
                    let pts = set_points(&noisy, &result, set)?;
                    let logits = classify(pts.view(), head)?;
                    let pred = (0..logits.len()).fold(0, |b, j| if logits[j] > logits[b] { j } else { b });
                    if pred == label {
                        correct[k] += 1;
                    }
                }
            }
            for (k, set) in [SetKind::Generated, SetKind::Completed].into_iter().enumerate() {
                let acc = correct[k] as f64 / clouds.len().max(1) as f64;
                report.push_metric(&sampler.name(), m, set, &noise_metric(level), acc);
            }
        }
    }
    Ok(report)
}
