//! Task-independent baselines (random, voxel grid, farthest point) and the
//! matching/completion post-processing shared with the learned sampler.
//!
//! Every tie is broken toward the lowest index, so all samplers are fully
//! deterministic for a given seed or start index.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use ndarray::ArrayView2;
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cloud::PointCloud;
use crate::error::{ensure_arg, Error, Result};
use crate::metrics::sq_dist;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplerKind {
    Random,
    Voxel,
    Fps,
}

impl fmt::Display for SamplerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(match self {
            SamplerKind::Random => "random",
            SamplerKind::Voxel => "voxel",
            SamplerKind::Fps => "fps",
        })
    }
}

impl FromStr for SamplerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" | "rs" => Ok(SamplerKind::Random),
            "voxel" => Ok(SamplerKind::Voxel),
            "fps" => Ok(SamplerKind::Fps),
            other => Err(Error::arg(format!("unknown sampler '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerSpec {
    pub kind: SamplerKind,
    pub m: usize,
    pub seed: u64,
    /// Fixes the voxel grid instead of searching for one.
    pub voxel_resolution: Option<usize>,
}

impl SamplerSpec {
    pub fn new(kind: SamplerKind, m: usize, seed: u64) -> Self {
        Self {
            kind,
            m,
            seed,
            voxel_resolution: None,
        }
    }

    pub fn apply(&self, cloud: &PointCloud) -> Result<Vec<usize>> {
        ensure_arg!(self.m >= 1, "sample size must be at least 1");
        match self.kind {
            SamplerKind::Random => random_sample(cloud, self.m, self.seed),
            SamplerKind::Fps => fps_sample(cloud, self.m, 0),
            SamplerKind::Voxel => match self.voxel_resolution {
                Some(res) => voxel_sample_at(cloud, self.m, res, self.seed),
                None => voxel_sample(cloud, self.m, self.seed),
            },
        }
    }
}

fn check_size(cloud: &PointCloud, m: usize) -> Result<()> {
    ensure_arg!(m <= cloud.len(), "cannot sample {m} points from a cloud of {}", cloud.len());
    Ok(())
}

/// `m` distinct indices drawn uniformly without replacement.
pub fn random_sample(cloud: &PointCloud, m: usize, seed: u64) -> Result<Vec<usize>> {
    check_size(cloud, m)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(index::sample(&mut rng, cloud.len(), m).into_vec())
}

/// Greedy max-min selection starting from `start`.
pub fn fps_sample(cloud: &PointCloud, m: usize, start: usize) -> Result<Vec<usize>> {
    check_size(cloud, m)?;
    ensure_arg!(start < cloud.len(), "start index {start} out of range");
    if m == 0 {
        return Ok(Vec::new());
    }
    Ok(farthest_extend(cloud.view(), vec![start], m))
}

/// Extends `partial` to exactly `m` unique indices by farthest-point selection.
/// An empty `partial` starts from index 0.
pub fn fps_completion(cloud: &PointCloud, partial: &[usize], m: usize) -> Result<Vec<usize>> {
    check_size(cloud, m)?;
    ensure_arg!(partial.len() <= m, "partial set of {} exceeds target {m}", partial.len());
    ensure_arg!(
        partial.iter().all(|&i| i < cloud.len()),
        "partial index out of range"
    );
    let mut seen = vec![false; cloud.len()];
    for &i in partial {
        ensure_arg!(!seen[i], "partial set contains duplicate index {i}");
        seen[i] = true;
    }
    if partial.len() == m {
        return Ok(partial.to_vec());
    }
    let seed = if partial.is_empty() { vec![0] } else { partial.to_vec() };
    Ok(farthest_extend(cloud.view(), seed, m))
}

fn farthest_extend(points: ArrayView2<'_, f64>, mut selected: Vec<usize>, m: usize) -> Vec<usize> {
    let n = points.nrows();
    let mut taken = vec![false; n];
    let mut min_dist = vec![f64::INFINITY; n];
    for &s in &selected {
        taken[s] = true;
    }
    for &s in &selected {
        update_min(points, s, &mut min_dist);
    }
    while selected.len() < m {
        let mut best: Option<usize> = None;
        for i in 0..n {
            if taken[i] {
                continue;
            }
            if best.is_none_or(|b| min_dist[i] > min_dist[b]) {
                best = Some(i);
            }
        }
        let next = best.expect("m ≤ n leaves a candidate");
        taken[next] = true;
        selected.push(next);
        update_min(points, next, &mut min_dist);
    }
    selected
}

fn update_min(points: ArrayView2<'_, f64>, from: usize, min_dist: &mut [f64]) {
    for (i, slot) in min_dist.iter_mut().enumerate() {
        let d = sq_dist(points, i, points, from);
        if d < *slot {
            *slot = d;
        }
    }
}

/// Nearest source index for every generated point, duplicates collapsed in
/// order of first occurrence.
pub fn match_to_subset(source: &PointCloud, generated: ArrayView2<'_, f64>) -> Result<Vec<usize>> {
    ensure_arg!(generated.nrows() > 0, "no generated points to match");
    ensure_arg!(generated.ncols() == 3, "generated points must have 3 columns");
    let mut seen = vec![false; source.len()];
    let mut out = Vec::new();
    for (j, _) in crate::metrics::nearest_neighbors(generated, source.view()) {
        if !seen[j] {
            seen[j] = true;
            out.push(j);
        }
    }
    Ok(out)
}

/// Voxel-grid sampling with a resolution searched so the number of occupied
/// voxels is as close as possible to `m`; the result is then trimmed at
/// random or completed by farthest-point selection to exactly `m`.
pub fn voxel_sample(cloud: &PointCloud, m: usize, seed: u64) -> Result<Vec<usize>> {
    check_size(cloud, m)?;
    if m == cloud.len() {
        return Ok((0..m).collect());
    }
    let resolution = search_resolution(cloud, m);
    voxel_sample_at(cloud, m, resolution, seed)
}

/// Voxel sampling on a fixed `resolution³` grid spanning the bounding box.
pub fn voxel_sample_at(cloud: &PointCloud, m: usize, resolution: usize, seed: u64) -> Result<Vec<usize>> {
    check_size(cloud, m)?;
    ensure_arg!(resolution >= 1, "voxel resolution must be positive");
    let mut reps = voxel_representatives(cloud, resolution);
    if reps.len() > m {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let keep = index::sample(&mut rng, reps.len(), m).into_vec();
        reps = keep.into_iter().map(|k| reps[k]).collect();
    }
    fps_completion(cloud, &reps, m)
}

/// Number of occupied voxels at a resolution; exposed for diagnostics.
pub fn occupied_voxels(cloud: &PointCloud, resolution: usize) -> usize {
    voxel_buckets(cloud, resolution).len()
}

fn search_resolution(cloud: &PointCloud, m: usize) -> usize {
    let count = |r: usize| occupied_voxels(cloud, r);
    let mut lo = 1usize;
    let mut hi = 2usize;
    while count(hi) < m && hi < 1 << 20 {
        lo = hi;
        hi *= 2;
    }
    // Invariant: count(lo) < m ≤ count(hi), or hi is the cap.
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if count(mid) < m {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (c_lo, c_hi) = (count(lo), count(hi));
    if m.abs_diff(c_lo) < m.abs_diff(c_hi) {
        lo
    } else {
        hi
    }
}

fn voxel_buckets(cloud: &PointCloud, resolution: usize) -> BTreeMap<(usize, usize, usize), Vec<usize>> {
    let pts = cloud.points();
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for row in pts.rows() {
        for k in 0..3 {
            lo[k] = lo[k].min(row[k]);
            hi[k] = hi[k].max(row[k]);
        }
    }
    let extent = (0..3).map(|k| hi[k] - lo[k]).fold(0.0, f64::max);
    let cell = if extent > 0.0 { extent / resolution as f64 } else { 1.0 };
    let mut buckets: BTreeMap<(usize, usize, usize), Vec<usize>> = BTreeMap::new();
    for (i, row) in pts.rows().into_iter().enumerate() {
        let idx = |k: usize| (((row[k] - lo[k]) / cell).floor() as usize).min(resolution - 1);
        buckets.entry((idx(0), idx(1), idx(2))).or_default().push(i);
    }
    buckets
}

/// One point per occupied voxel: the member nearest the voxel's centroid.
fn voxel_representatives(cloud: &PointCloud, resolution: usize) -> Vec<usize> {
    let pts = cloud.points();
    voxel_buckets(cloud, resolution)
        .into_values()
        .map(|members| {
            let mut c = [0.0; 3];
            for &i in &members {
                for k in 0..3 {
                    c[k] += pts[[i, k]];
                }
            }
            let inv = 1.0 / members.len() as f64;
            let c = c.map(|v| v * inv);
            let mut best = (members[0], f64::INFINITY);
            for &i in &members {
                let d: f64 = (0..3).map(|k| (pts[[i, k]] - c[k]).powi(2)).sum();
                if d < best.1 {
                    best = (i, d);
                }
            }
            best.0
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::{make_synthetic, Shape};

    fn line() -> PointCloud {
        PointCloud::from_rows(&[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [10.0, 0.0, 0.0]]).unwrap()
    }

    #[test]
    fn fps_on_a_line() {
        assert_eq!(fps_sample(&line(), 2, 0).unwrap(), vec![0, 2]);
        assert_eq!(fps_sample(&line(), 3, 0).unwrap(), vec![0, 2, 1]);
        assert!(fps_sample(&line(), 4, 0).is_err());
    }

    #[test]
    fn completion_on_a_line() {
        assert_eq!(fps_completion(&line(), &[0], 2).unwrap(), vec![0, 2]);
        assert_eq!(fps_completion(&line(), &[1, 0], 2).unwrap(), vec![1, 0]);
        assert_eq!(fps_completion(&line(), &[], 1).unwrap(), vec![0]);
        assert!(fps_completion(&line(), &[0, 0], 2).is_err());
    }

    #[test]
    fn fps_with_duplicate_points_still_returns_unique_indices() {
        let c = PointCloud::from_rows(&[[0.0; 3], [0.0; 3], [1.0, 0.0, 0.0]]).unwrap();
        assert_eq!(fps_sample(&c, 3, 0).unwrap(), vec![0, 2, 1]);
    }

    #[test]
    fn random_full_size_is_a_permutation() {
        let c = make_synthetic(Shape::Sphere, 50, 0).unwrap();
        let mut idx = random_sample(&c, 50, 3).unwrap();
        assert_eq!(idx, random_sample(&c, 50, 3).unwrap());
        idx.sort();
        assert_eq!(idx, (0..50).collect::<Vec<_>>());
        assert!(random_sample(&c, 51, 3).is_err());
    }

    #[test]
    fn voxel_on_cube_corners() {
        let mut rows = Vec::new();
        for x in [0.0, 1.0] {
            for y in [0.0, 1.0] {
                for z in [0.0, 1.0] {
                    rows.push([x, y, z]);
                }
            }
        }
        let c = PointCloud::from_rows(&rows).unwrap();
        assert_eq!(occupied_voxels(&c, 2), 8);
        let mut idx = voxel_sample_at(&c, 8, 2, 0).unwrap();
        idx.sort();
        assert_eq!(idx, (0..8).collect::<Vec<_>>());
        let mut idx = voxel_sample(&c, 8, 0).unwrap();
        idx.sort();
        assert_eq!(idx, (0..8).collect::<Vec<_>>());
    }

    #[test]
    fn voxel_returns_exactly_m_unique() {
        let c = make_synthetic(Shape::Torus, 300, 1).unwrap();
        for m in [1, 5, 17, 64, 150, 299, 300] {
            let mut idx = voxel_sample(&c, m, 4).unwrap();
            assert_eq!(idx.len(), m);
            idx.sort();
            idx.dedup();
            assert_eq!(idx.len(), m);
        }
    }

    #[test]
    fn matching_dedups_in_first_occurrence_order() {
        let c = line();
        let g = ndarray::array![[9.0, 0.0, 0.0], [0.1, 0.0, 0.0], [11.0, 0.0, 0.0]];
        assert_eq!(match_to_subset(&c, g.view()).unwrap(), vec![2, 0]);
    }

    #[test]
    fn spec_dispatch() {
        let c = make_synthetic(Shape::Cube, 128, 2).unwrap();
        for kind in [SamplerKind::Random, SamplerKind::Voxel, SamplerKind::Fps] {
            let idx = SamplerSpec::new(kind, 32, 1).apply(&c).unwrap();
            assert_eq!(idx.len(), 32);
        }
    }
}
