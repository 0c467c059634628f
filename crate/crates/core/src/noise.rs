use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::cloud::PointCloud;
use crate::error::{ensure_arg, Result};

/// Per-dimension standard deviation of the cloud's coordinates.
pub fn per_dimension_std(cloud: &PointCloud) -> [f64; 3] {
    let n = cloud.len() as f64;
    let mut out = [0.0; 3];
    for (k, slot) in out.iter_mut().enumerate() {
        let col = cloud.points().column(k);
        let mean = col.sum() / n;
        *slot = (col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt();
    }
    out
}

/// Adds zero-mean Gaussian noise whose standard deviation in each dimension is
/// `level` times that dimension's spread in the clean cloud.
pub fn add_gaussian_noise(cloud: &PointCloud, level: f64, seed: u64) -> Result<PointCloud> {
    ensure_arg!(level >= 0.0 && level.is_finite(), "noise level must be nonnegative, got {level}");
    if level == 0.0 {
        return Ok(cloud.clone());
    }
    let scale = per_dimension_std(cloud);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = cloud.points().clone();
    for mut row in points.rows_mut() {
        for k in 0..3 {
            let sigma = level * scale[k];
            if sigma > 0.0 {
                let normal = Normal::new(0.0, sigma).expect("positive sigma");
                row[k] += normal.sample(&mut rng);
            }
        }
    }
    let mut noisy = PointCloud::new(points)?;
    noisy.label = cloud.label;
    noisy.name = cloud.name.clone();
    Ok(noisy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::{make_synthetic, Shape};

    #[test]
    fn zero_level_is_identity() {
        let c = make_synthetic(Shape::Torus, 64, 0).unwrap();
        assert_eq!(add_gaussian_noise(&c, 0.0, 5).unwrap(), c);
    }

    #[test]
    fn negative_level_is_rejected() {
        let c = make_synthetic(Shape::Torus, 64, 0).unwrap();
        assert!(add_gaussian_noise(&c, -0.1, 5).is_err());
    }

    #[test]
    fn empirical_spread_matches_target() {
        let c = make_synthetic(Shape::Sphere, 4096, 3).unwrap();
        let noisy = add_gaussian_noise(&c, 0.1, 11).unwrap();
        assert_eq!(noisy, add_gaussian_noise(&c, 0.1, 11).unwrap());
        assert_ne!(noisy, add_gaussian_noise(&c, 0.1, 12).unwrap());
        let clean_std = per_dimension_std(&c);
        let diff = PointCloud::new(noisy.points() - c.points()).unwrap();
        let noise_std = per_dimension_std(&diff);
        for k in 0..3 {
            let target = 0.1 * clean_std[k];
            assert!((noise_std[k] - target).abs() <= 0.1 * target, "dim {k}: {} vs {target}", noise_std[k]);
        }
    }
}
