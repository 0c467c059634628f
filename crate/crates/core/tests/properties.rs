use ndarray::Array2;
use proptest::prelude::*;
use taskdown::metrics::{chamfer_points, mean_nearest_sq};
use taskdown::samplers::{fps_completion, fps_sample, match_to_subset, random_sample, voxel_sample};
use taskdown::sampling::{anneal_softmax, regress_sampled, sparse_apply, sparsify, truncate_columns};
use taskdown::PointCloud;

fn cloud_strategy(max: usize) -> impl Strategy<Value = PointCloud> {
    prop::collection::vec(prop::array::uniform3(-2.0f64..2.0), 1..=max)
        .prop_map(|rows| PointCloud::from_rows(&rows).unwrap())
}

fn matrix_strategy() -> impl Strategy<Value = Array2<f64>> {
    (1usize..40, 1usize..12).prop_flat_map(|(n, m)| {
        prop::collection::vec(-6.0f64..6.0, n * m).prop_map(move |v| Array2::from_shape_vec((n, m), v).unwrap())
    })
}

fn distinct(indices: &[usize]) -> bool {
    let mut sorted = indices.to_vec();
    sorted.sort_unstable();
    sorted.windows(2).all(|w| w[0] != w[1])
}

proptest! {
    #[test]
    fn softmax_columns_are_distributions(raw in matrix_strategy(), tau in 0.01f64..2.0) {
        let s = anneal_softmax(&raw, tau).unwrap();
        for col in s.dense().columns() {
            prop_assert!((col.sum() - 1.0).abs() < 1e-9);
            prop_assert!(col.iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
    }

    #[test]
    fn sparse_matrix_keeps_every_column(raw in matrix_strategy(), tau in 0.01f64..2.0, r in 0.0f64..0.9) {
        let s = anneal_softmax(&raw, tau).unwrap();
        let sparse = sparsify(&s, r).unwrap();
        let mut cols = vec![0usize; raw.ncols()];
        let mut last: Option<(usize, usize)> = None;
        for &(i, j, v) in sparse.triplets() {
            cols[j] += 1;
            prop_assert_eq!(v, s.dense()[[i, j]]);
            if let Some((li, lj)) = last {
                prop_assert!(lj < j || (lj == j && li < i));
            }
            last = Some((i, j));
        }
        prop_assert!(cols.iter().all(|&c| c >= 1));
    }

    #[test]
    fn soft_points_stay_in_the_bounding_box(cloud in cloud_strategy(30), seed in 0u64..1000) {
        let m = (seed as usize % cloud.len()) + 1;
        let raw = Array2::from_shape_fn((cloud.len(), m), |(i, j)| ((i * 31 + j * 17 + seed as usize) % 13) as f64);
        let s = anneal_softmax(&raw, 0.5).unwrap();
        let q = regress_sampled(&cloud, &s).unwrap();
        let p = cloud.points();
        for k in 0..3 {
            let lo = p.column(k).iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = p.column(k).iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(q.column(k).iter().all(|&v| v >= lo - 1e-9 && v <= hi + 1e-9));
        }
        let sparse_q = sparse_apply(&cloud, &sparsify(&s, 0.0).unwrap()).unwrap();
        prop_assert!((&sparse_q - &q).iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn truncation_keeps_leading_columns(raw in matrix_strategy()) {
        let s = anneal_softmax(&raw, 0.3).unwrap();
        for m in 1..=raw.ncols() {
            let t = truncate_columns(&s, m).unwrap();
            prop_assert_eq!(t.dense().ncols(), m);
            prop_assert_eq!(t.dense().column(m - 1), s.dense().column(m - 1));
        }
    }

    #[test]
    fn classical_samplers_return_distinct_indices(cloud in cloud_strategy(60), seed in 0u64..100) {
        let m = (seed as usize % cloud.len()) + 1;
        for indices in [
            random_sample(&cloud, m, seed).unwrap(),
            fps_sample(&cloud, m, seed as usize % cloud.len()).unwrap(),
            voxel_sample(&cloud, m, seed).unwrap(),
        ] {
            prop_assert_eq!(indices.len(), m);
            prop_assert!(distinct(&indices));
            prop_assert!(indices.iter().all(|&i| i < cloud.len()));
        }
    }

    #[test]
    fn matching_then_completion_yields_m_distinct_points(cloud in cloud_strategy(40), other in cloud_strategy(12)) {
        let m = other.len().min(cloud.len());
        let generated = other.points().slice(ndarray::s![..m, ..]).to_owned();
        let matched = match_to_subset(&cloud, generated.view()).unwrap();
        prop_assert!(matched.len() <= m && distinct(&matched));
        let completed = fps_completion(&cloud, &matched, m).unwrap();
        prop_assert_eq!(completed.len(), m);
        prop_assert!(distinct(&completed));
        prop_assert_eq!(&completed[..matched.len()], &matched[..]);
    }

    #[test]
    fn chamfer_is_symmetric_and_zero_on_itself(a in cloud_strategy(20), b in cloud_strategy(20)) {
        let ab = chamfer_points(a.view(), b.view()).unwrap();
        let ba = chamfer_points(b.view(), a.view()).unwrap();
        prop_assert!((ab - ba).abs() <= 1e-12 * (1.0 + ab));
        prop_assert_eq!(chamfer_points(a.view(), a.view()).unwrap(), 0.0);
        prop_assert!(mean_nearest_sq(a.view(), b.view()) >= 0.0);
    }
}
