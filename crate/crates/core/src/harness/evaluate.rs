use ndarray::Array2;

use super::data::RegistrationPair;
use super::report::{RunReport, SamplerStat};
use crate::cloud::{DownsampleResult, PointCloud, SetKind};
use crate::error::{Error, Result};
use crate::heads::{classify, reconstruct, register, TaskHead, TaskKind};
use crate::metrics::{mean_rotation_error, nre, ReconMetric};
use crate::samplers::{SamplerKind, SamplerSpec};
use crate::sampling::{orthogonality_residual, sparsify, LearnedSampler};

/// Anything that reduces a cloud to `m` points.
pub trait Downsampler {
    fn name(&self) -> String;
    fn downsample(&self, cloud: &PointCloud, m: usize) -> Result<DownsampleResult>;
}

/// A task-independent baseline. Its selected points serve as all three sets.
#[derive(Debug, Clone, Copy)]
pub struct Classical {
    pub kind: SamplerKind,
    pub seed: u64,
}

impl Classical {
    pub fn new(kind: SamplerKind, seed: u64) -> Self {
        Self { kind, seed }
    }
}

impl Downsampler for Classical {
    fn name(&self) -> String {
        self.kind.to_string()
    }

    fn downsample(&self, cloud: &PointCloud, m: usize) -> Result<DownsampleResult> {
        let spec = SamplerSpec::new(self.kind, m, self.seed ^ cloud_seed(cloud));
        let indices = spec.apply(cloud)?;
        Ok(DownsampleResult {
            generated: cloud.select(&indices)?.into_points(),
            matched: indices.clone(),
            completed: indices,
        })
    }
}

impl Downsampler for LearnedSampler {
    fn name(&self) -> String {
        "learned".to_string()
    }

    fn downsample(&self, cloud: &PointCloud, m: usize) -> Result<DownsampleResult> {
        LearnedSampler::downsample(self, cloud, m)
    }
}

/// A per-cloud seed so baselines draw different subsets for different clouds.
fn cloud_seed(cloud: &PointCloud) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325 ^ cloud.len() as u64;
    for v in cloud.points().iter().take(12) {
        hash ^= v.to_bits();
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// The points of one of the three sets.
pub fn set_points(cloud: &PointCloud, result: &DownsampleResult, set: SetKind) -> Result<Array2<f64>> {
    Ok(match set {
        SetKind::Generated => result.generated.clone(),
        SetKind::Matched => cloud.select(&result.matched)?.into_points(),
        SetKind::Completed => cloud.select(&result.completed)?.into_points(),
    })
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

fn label_of(cloud: &PointCloud) -> Result<usize> {
    cloud
        .label
        .ok_or_else(|| Error::arg(format!("cloud {} has no label", cloud.name.as_deref().unwrap_or("?"))))
}

/// Accuracy of the head on full clouds.
pub fn head_accuracy(head: &TaskHead, clouds: &[PointCloud]) -> Result<f64> {
    let mut correct = 0;
    for c in clouds {
        if argmax(&classify(c.view(), head)?) == label_of(c)? {
            correct += 1;
        }
    }
    Ok(correct as f64 / clouds.len().max(1) as f64)
}

/// Classification accuracy on the generated, matched and completed sets.
pub fn classification_accuracy(
    head: &TaskHead,
    clouds: &[PointCloud],
    sampler: &dyn Downsampler,
    m: usize,
) -> Result<[f64; 3]> {
    let mut correct = [0usize; 3];
    for c in clouds {
        let label = label_of(c)?;
        let result = sampler.downsample(c, m)?;
        for (k, set) in SetKind::ALL.into_iter().enumerate() {
            let pts = set_points(c, &result, set)?;
            if argmax(&classify(pts.view(), head)?) == label {
                correct[k] += 1;
            }
        }
    }
    Ok(correct.map(|k| k as f64 / clouds.len().max(1) as f64))
}

/// Mean per-cloud NRE for each set, indexed `[metric][set]` with metrics
/// ordered Chamfer then earth mover's.
pub fn reconstruction_nre(
    head: &TaskHead,
    clouds: &[PointCloud],
    sampler: &dyn Downsampler,
    m: usize,
) -> Result<[[f64; 3]; 2]> {
    let metrics = [ReconMetric::Chamfer, ReconMetric::EarthMover];
    let mut sums = [[0.0; 3]; 2];
    for c in clouds {
        let full = reconstruct(c.view(), head)?;
        let result = sampler.downsample(c, m)?;
        for (k, set) in SetKind::ALL.into_iter().enumerate() {
            let recon = reconstruct(set_points(c, &result, set)?.view(), head)?;
            for (j, metric) in metrics.iter().enumerate() {
                sums[j][k] += nre(c.view(), recon.view(), full.view(), *metric)?;
            }
        }
    }
    let count = clouds.len().max(1) as f64;
    Ok(sums.map(|row| row.map(|s| s / count)))
}

/// Mean reconstruction error of the head on full clouds, by metric.
pub fn reconstruction_error(head: &TaskHead, clouds: &[PointCloud]) -> Result<[f64; 2]> {
    let mut sums = [0.0; 2];
    for c in clouds {
        let recon = reconstruct(c.view(), head)?;
        sums[0] += ReconMetric::Chamfer.evaluate(c.view(), recon.view())?;
        sums[1] += ReconMetric::EarthMover.evaluate(c.view(), recon.view())?;
    }
    let count = clouds.len().max(1) as f64;
    Ok(sums.map(|s| s / count))
}

/// Mean rotation error of the head on full pairs.
pub fn head_mre(head: &TaskHead, pairs: &[RegistrationPair]) -> Result<f64> {
    let pred = pairs
        .iter()
        .map(|p| register(p.source.view(), p.template.view(), head))
        .collect::<Result<Vec<_>>>()?;
    let gt: Vec<_> = pairs.iter().map(|p| p.transform).collect();
    mean_rotation_error(&pred, &gt)
}

/// Mean rotation error when both clouds of each pair are downsampled.
pub fn registration_mre(
    head: &TaskHead,
    pairs: &[RegistrationPair],
    sampler: &dyn Downsampler,
    m: usize,
) -> Result<[f64; 3]> {
    let mut preds: [Vec<_>; 3] = Default::default();
    for p in pairs {
        let src = sampler.downsample(&p.source, m)?;
        let tmpl = sampler.downsample(&p.template, m)?;
        for (k, set) in SetKind::ALL.into_iter().enumerate() {
            let a = set_points(&p.source, &src, set)?;
            let b = set_points(&p.template, &tmpl, set)?;
            preds[k].push(register(a.view(), b.view(), head)?);
        }
    }
    let gt: Vec<_> = pairs.iter().map(|p| p.transform).collect();
    let mut out = [0.0; 3];
    for k in 0..3 {
        out[k] = mean_rotation_error(&preds[k], &gt)?;
    }
    Ok(out)
}

/// Task metric names reported for a head kind.
pub fn metric_names(kind: TaskKind) -> &'static [&'static str] {
    match kind {
        TaskKind::Classification => &["accuracy"],
        TaskKind::ReconstructionMlp | TaskKind::ReconstructionMfold => &["nre_cd", "nre_emd"],
        TaskKind::Registration => &["mre"],
    }
}

/// Adds the task metric of every set at every `m` to `report`. `pairs` is
/// used for registration heads, `clouds` otherwise.
pub fn evaluate_into(
    report: &mut RunReport,
    head: &TaskHead,
    clouds: &[PointCloud],
    pairs: &[RegistrationPair],
    sampler: &dyn Downsampler,
    m_list: &[usize],
) -> Result<()> {
    let method = sampler.name();
    for &m in m_list {
        match head.kind() {
            TaskKind::Classification => {
                let acc = classification_accuracy(head, clouds, sampler, m)?;
                for (k, set) in SetKind::ALL.into_iter().enumerate() {
                    report.push_metric(&method, m, set, "accuracy", acc[k]);
                }
            }
            TaskKind::ReconstructionMlp | TaskKind::ReconstructionMfold => {
                let values = reconstruction_nre(head, clouds, sampler, m)?;
                for (j, name) in ["nre_cd", "nre_emd"].into_iter().enumerate() {
                    for (k, set) in SetKind::ALL.into_iter().enumerate() {
                        report.push_metric(&method, m, set, name, values[j][k]);
                    }
                }
            }
            TaskKind::Registration => {
                let mre = registration_mre(head, pairs, sampler, m)?;
                for (k, set) in SetKind::ALL.into_iter().enumerate() {
                    report.push_metric(&method, m, set, "mre", mre[k]);
                }
            }
        }
    }
    Ok(())
}

/// Sparsity and orthogonality of the learned matrix at size `m`, averaged over clouds.
pub fn sampler_stats(sampler: &LearnedSampler, clouds: &[PointCloud], m: usize) -> Result<SamplerStat> {
    let mut frac = 0.0;
    let mut per_col = 0.0;
    let mut orth = 0.0;
    for c in clouds {
        let s = sampler.matrix(c, m)?;
        let sparse = sparsify(&s, sampler.threshold)?;
        frac += sparse.nonzero_fraction();
        per_col += sparse.per_column();
        orth += orthogonality_residual(&s);
    }
    let count = clouds.len().max(1) as f64;
    Ok(SamplerStat {
        m,
        nonzero_fraction: frac / count,
        nonzero_per_column: per_col / count,
        orthogonality: orth / count,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::heads::HeadSpec;
    use crate::synthetic::{make_synthetic, Shape};

    #[test]
    fn classical_sets_coincide() {
        let cloud = make_synthetic(Shape::Sphere, 64, 0).unwrap();
        for kind in [SamplerKind::Random, SamplerKind::Fps, SamplerKind::Voxel] {
            let r = Classical::new(kind, 1).downsample(&cloud, 10).unwrap();
            assert_eq!(r.matched, r.completed);
            assert_eq!(set_points(&cloud, &r, SetKind::Generated).unwrap(), r.generated);
            assert_eq!(set_points(&cloud, &r, SetKind::Completed).unwrap(), r.generated);
        }
    }

    #[test]
    fn report_has_three_cells_per_size() {
        let mut spec = HeadSpec::classification(4);
        spec.encoder_widths = vec![8, 16];
        spec.mlp_widths = vec![8];
        let head = TaskHead::new(spec, 0).unwrap();
        let clouds: Vec<_> = (0..4)
            .map(|i| make_synthetic(Shape::ALL[i], 32, i as u64).unwrap().with_label(i))
            .collect();
        let mut report = RunReport::new("classification", 0);
        let sizes = [4, 8, 16];
        evaluate_into(&mut report, &head, &clouds, &[], &Classical::new(SamplerKind::Fps, 0), &sizes).unwrap();
        assert_eq!(report.metrics.len(), sizes.len() * 3);
        assert!(report.metrics.iter().all(|c| (0.0..=1.0).contains(&c.value)));
    }

    #[test]
    fn full_size_reconstruction_ratio_is_one() {
        let mut spec = HeadSpec::reconstruction_mlp(32);
        spec.encoder_widths = vec![8, 16];
        spec.mlp_widths = vec![16];
        let head = TaskHead::new(spec, 0).unwrap();
        let clouds = vec![make_synthetic(Shape::Cube, 32, 3).unwrap()];
        let nre = reconstruction_nre(&head, &clouds, &Classical::new(SamplerKind::Fps, 0), 32).unwrap();
        for row in nre {
            for v in row {
                assert!((v - 1.0).abs() < 1e-12);
            }
        }
    }
}
