use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{DatasetSpec, PairSpec};
use crate::cloud::{PointCloud, RigidTransform};
use crate::error::{Error, Result};
use crate::io::{class_names, load_dataset, Split};
use crate::samplers::random_sample;
use crate::synthetic::{make_box, make_synthetic};

/// Train and test clouds of one run, all with `n` points.
#[derive(Debug, Clone)]
pub struct TaskData {
    pub train: Vec<PointCloud>,
    pub test: Vec<PointCloud>,
    pub class_names: Vec<String>,
}

impl TaskData {
    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }
}

/// A source cloud, the template it should be registered to and the
/// transform with `template = transform(source)`.
#[derive(Debug, Clone)]
pub struct RegistrationPair {
    pub source: PointCloud,
    pub template: PointCloud,
    pub transform: RigidTransform,
}

/// Materializes a dataset. Synthetic splits use disjoint seed ranges.
pub fn build_dataset(spec: &DatasetSpec, n: usize, seed: u64) -> Result<TaskData> {
    match spec {
        DatasetSpec::Shapes {
            shapes,
            train,
            test,
            rotate,
        } => {
            if shapes.is_empty() {
                return Err(Error::config("synthetic dataset needs at least one shape"));
            }
            let make = |count: usize, base: u64| -> Result<Vec<PointCloud>> {
                (0..count)
                    .map(|i| {
                        let class = i % shapes.len();
                        let item_seed = base.wrapping_add(i as u64);
                        let mut cloud = make_synthetic(shapes[class], n, item_seed)?;
                        if *rotate {
                            let mut rng = ChaCha8Rng::seed_from_u64(item_seed ^ 0x005e_ed0f_0a11);
                            cloud = cloud.transformed(&RigidTransform::random(&mut rng, 180.0, 0.0));
                        }
                        Ok(cloud.with_label(class))
                    })
                    .collect()
            };
            Ok(TaskData {
                train: make(*train, seed.wrapping_mul(1_000_003))?,
                test: make(*test, seed.wrapping_mul(1_000_003).wrapping_add(500_000))?,
                class_names: shapes.iter().map(|s| s.name().to_string()).collect(),
            })
        }
        DatasetSpec::Boxes { train, test } => {
            let make = |count: usize, base: u64| -> Result<Vec<PointCloud>> {
                (0..count)
                    .map(|i| {
                        let item_seed = base.wrapping_add(i as u64);
                        let mut rng = ChaCha8Rng::seed_from_u64(item_seed ^ 0xb0c5);
                        let extents = [
                            rng.random_range(0.3..1.0),
                            rng.random_range(0.3..1.0),
                            rng.random_range(0.3..1.0),
                        ];
                        Ok(make_box(extents, n, item_seed)?.with_label(0))
                    })
                    .collect()
            };
            Ok(TaskData {
                train: make(*train, seed.wrapping_mul(1_000_003))?,
                test: make(*test, seed.wrapping_mul(1_000_003).wrapping_add(500_000))?,
                class_names: vec!["box".to_string()],
            })
        }
        DatasetSpec::Directory { root } => {
            let fit = |clouds: Vec<PointCloud>, salt: u64| -> Result<Vec<PointCloud>> {
                clouds
                    .into_iter()
                    .enumerate()
                    .map(|(i, c)| {
                        if c.len() < n {
                            return Err(Error::config(format!(
                                "cloud {} has {} points, fewer than n = {n}",
                                c.name.as_deref().unwrap_or("?"),
                                c.len()
                            )));
                        }
                        let c = if c.len() > n {
                            let idx = random_sample(&c, n, seed ^ salt ^ i as u64)?;
                            c.select(&idx)?
                        } else {
                            c
                        };
                        Ok(c.normalized())
                    })
                    .collect()
            };
            Ok(TaskData {
                train: fit(load_dataset(root, Split::Train)?, 0x7a)?,
                test: fit(load_dataset(root, Split::Test)?, 0x7e)?,
                class_names: class_names(root, Split::Train)?,
            })
        }
    }
}

/// Seeded registration pairs: rotation axis uniform on the sphere, angle
/// uniform in `[0, max_angle]`, translation uniform in a ball.
pub fn registration_pairs(clouds: &[PointCloud], spec: &PairSpec, seed: u64) -> Vec<RegistrationPair> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9a12);
    clouds
        .iter()
        .map(|source| {
            let transform = RigidTransform::random(&mut rng, spec.max_angle_deg, spec.max_translation);
            RegistrationPair {
                template: source.transformed(&transform),
                source: source.clone(),
                transform,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::Shape;

    #[test]
    fn synthetic_split_sizes_and_labels() {
        let spec = DatasetSpec::Shapes {
            shapes: Shape::ALL.to_vec(),
            train: 8,
            test: 4,
            rotate: true,
        };
        let data = build_dataset(&spec, 32, 1).unwrap();
        assert_eq!((data.train.len(), data.test.len(), data.num_classes()), (8, 4, 4));
        assert_eq!(data.train.iter().map(|c| c.label.unwrap()).collect::<Vec<_>>(), vec![0, 1, 2, 3, 0, 1, 2, 3]);
        assert!(data.train.iter().all(|c| c.len() == 32));
        assert_ne!(data.train[0].points(), data.test[0].points());
        let again = build_dataset(&spec, 32, 1).unwrap();
        assert_eq!(again.train[5].points(), data.train[5].points());
    }

    #[test]
    fn pairs_respect_limits() {
        let data = build_dataset(&DatasetSpec::Boxes { train: 20, test: 0 }, 16, 0).unwrap();
        let pairs = registration_pairs(&data.train, &PairSpec::default(), 3);
        for p in &pairs {
            assert!(p.transform.rotation_angle_to(&RigidTransform::identity()) <= 45.0 + 1e-9);
            let t = p.transform.translation();
            assert!((t[0] * t[0] + t[1] * t[1] + t[2] * t[2]).sqrt() <= 0.3 + 1e-12);
            let moved = p.transform.apply(p.source.points());
            assert!(moved.iter().zip(p.template.points()).all(|(a, b)| (a - b).abs() < 1e-12));
        }
    }
}
