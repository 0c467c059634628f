//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits nonzero if any fails.
//!
//! `cargo test --release --test acceptance`

use std::time::Instant;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use taskdown::autodiff::{Graph, ParamGrads, ParamStore};
use taskdown::features::extract_features;
use taskdown::harness::{
    bench, build_dataset, classification_accuracy, pretrain_head, reconstruction_nre, sampler_stats, timing,
    train_sampler, BenchConfig, Classical, Downsampler, Pretrained, RunConfig, TaskData, Trained,
};
use taskdown::heads::{HeadSpec, MFoldConfig, TaskHead, TaskKind};
use taskdown::losses::{total_loss, total_loss_node, LossWeights, TaskTarget};
use taskdown::metrics::{chamfer_distance, earth_mover_distance, mean_rotation_error};
use taskdown::samplers::{fps_completion, fps_sample, SamplerKind};
use taskdown::sampling::{
    anneal_softmax, predict_raw_rows, regress_sampled, sparse_apply, sparsify, LearnedSampler,
};
use taskdown::synthetic::{make_synthetic, Shape};
use taskdown::{DownsampleResult, PointCloud, RigidTransform};

type Outcome = taskdown::Result<(bool, String)>;
type Criterion = (usize, &'static str, fn() -> Outcome);

fn random_array(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || scale * rng.sample::<f64, _>(StandardNormal))
}

fn random_cloud(rng: &mut ChaCha8Rng, n: usize) -> PointCloud {
    PointCloud::new(random_array(rng, n, 3, 1.0)).unwrap()
}

fn sq(a: &Array2<f64>, i: usize, b: &Array2<f64>, j: usize) -> f64 {
    let dx = a[[i, 0]] - b[[j, 0]];
    let dy = a[[i, 1]] - b[[j, 1]];
    let dz = a[[i, 2]] - b[[j, 2]];
    dx * dx + dy * dy + dz * dz
}

fn column_stochasticity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst_sum = 0.0f64;
    let mut min_entry = f64::INFINITY;
    for k in 0..100 {
        let raw = random_array(&mut rng, 1024, 64, 1.0 + (k % 5) as f64);
        for tau in [1.0, 0.5, 0.1] {
            let s = anneal_softmax(&raw, tau)?;
            for col in s.dense().columns() {
                worst_sum = worst_sum.max((col.sum() - 1.0).abs());
            }
            min_entry = min_entry.min(s.dense().iter().cloned().fold(f64::INFINITY, f64::min));
        }
    }
    Ok((
        worst_sum <= 1e-5 && min_entry >= 0.0,
        format!("max |column sum - 1| = {worst_sum:.2e}, min entry = {min_entry:.2e}"),
    ))
}

fn permutation_invariance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let clouds: Vec<PointCloud> = (0..10)
        .map(|i| make_synthetic(Shape::ALL[i % 4], 256, 100 + i as u64))
        .collect::<taskdown::Result<_>>()?;
    let mut sampler = LearnedSampler::new(&[32, 64], &[64, 32], 32, 0.1, 9)?;
    sampler.calibrate(&clouds)?;
    let mut worst = 0.0f64;
    let mut matched_equal = true;
    for cloud in &clouds {
        let base = sampler.downsample(cloud, 32)?;
        for _ in 0..10 {
            let mut perm: Vec<usize> = (0..cloud.len()).collect();
            perm.shuffle(&mut rng);
            let shuffled = cloud.permuted(&perm)?;
            let out = sampler.downsample(&shuffled, 32)?;
            let gap = (&out.generated - &base.generated).iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
            worst = worst.max(gap);
            let relabeled: Vec<usize> = out.matched.iter().map(|&i| perm[i]).collect();
            matched_equal &= relabeled == base.matched;
        }
    }
    Ok((
        worst < 1e-4 && matched_equal,
        format!("max generated-set gap {worst:.2e}, matched sets equal: {matched_equal}"),
    ))
}

fn gradient_check() -> Outcome {
    let (n, m, tau) = (8, 3, 0.5);
    let mut worst = 0.0f64;
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let cloud = random_cloud(&mut rng, n);
        let mut sampler = LearnedSampler::new(&[4, 6], &[5], m, tau, seed)?;
        sampler.calibrate(std::slice::from_ref(&cloud))?;
        let mut spec = HeadSpec::classification(3);
        spec.encoder_widths = vec![4, 8];
        spec.mlp_widths = vec![6];
        let head = TaskHead::new(spec, seed + 50)?;
        let target = TaskTarget::Label((seed % 3) as usize);
        let weights = LossWeights::new(0.7)?;

        let mut g = Graph::new();
        let eb = sampler.encoder.store().bind(&mut g, true);
        let sb = sampler.sampler.store().bind(&mut g, true);
        let hb = head.store().bind(&mut g, false);
        let pts = g.constant(cloud.points().clone());
        let (_, q) = sampler.forward(&mut g, &eb, &sb, pts, m, tau);
        let loss = total_loss_node(&mut g, &head, &hb, q, None, &target, pts, &weights)?;
        let grads = g.backward(loss);
        let mut enc_grads = ParamGrads::zeros_like(sampler.encoder.store());
        enc_grads.add_from(&eb, &grads);
        let mut samp_grads = ParamGrads::zeros_like(sampler.sampler.store());
        samp_grads.add_from(&sb, &grads);

        let numeric_loss = |s: &LearnedSampler| -> taskdown::Result<f64> {
            let features = extract_features(&cloud, &s.encoder)?;
            let raw = predict_raw_rows(&features, &s.sampler)?;
            let matrix = anneal_softmax(&raw, tau)?;
            let q = regress_sampled(&cloud, &matrix)?;
            total_loss(&head, q.view(), &target, &cloud, &weights)
        };
        let h = 1e-6;
        let (mut diff, mut norm_a, mut norm_n) = (0.0f64, 0.0f64, 0.0f64);
        for which in 0..2 {
            let store_of = |s: &LearnedSampler| -> ParamStore {
                if which == 0 { s.encoder.store().clone() } else { s.sampler.store().clone() }
            };
            let analytic = if which == 0 { &enc_grads } else { &samp_grads };
            let base = store_of(&sampler);
            for id in base.ids().filter(|&id| base.is_trainable(id)).collect::<Vec<_>>() {
                for idx in 0..base.get(id).len() {
                    let eval = |delta: f64| -> taskdown::Result<f64> {
                        let mut s = sampler.clone();
                        let store = if which == 0 { s.encoder.store_mut() } else { s.sampler.store_mut() };
                        store.get_mut(id).as_slice_mut().unwrap()[idx] += delta;
                        numeric_loss(&s)
                    };
                    let numeric = (eval(h)? - eval(-h)?) / (2.0 * h);
                    let a = analytic.get(id).as_slice().unwrap()[idx];
                    diff += (a - numeric).powi(2);
                    norm_a += a * a;
                    norm_n += numeric * numeric;
                }
            }
        }
        let rel = diff.sqrt() / (norm_a.sqrt() + norm_n.sqrt()).max(1e-12);
        worst = worst.max(rel);
    }
    Ok((worst < 1e-3, format!("worst relative error over 20 seeds {worst:.2e}")))
}

/// Keeps entries above `r`; a column with none keeps its first maximum.
fn masked_dense_apply(s: &Array2<f64>, p: &Array2<f64>, r: f64) -> Array2<f64> {
    let (n, m) = s.dim();
    let mut q = Array2::zeros((m, 3));
    for j in 0..m {
        let keep: Vec<usize> = (0..n).filter(|&i| r == 0.0 || s[[i, j]] > r).collect();
        let keep = if keep.is_empty() {
            let mut best = 0;
            for i in 1..n {
                if s[[i, j]] > s[[best, j]] {
                    best = i;
                }
            }
            vec![best]
        } else {
            keep
        };
        for i in keep {
            for k in 0..3 {
                q[[j, k]] += s[[i, j]] * p[[i, k]];
            }
        }
    }
    q
}

fn sparse_dense_agreement() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst_dense = 0.0f64;
    let mut masked_exact = true;
    let mut fallback_columns = 0usize;
    for k in 0..50 {
        let n = rng.random_range(4..300);
        let m = rng.random_range(1..=n.min(40));
        let cloud = random_cloud(&mut rng, n);
        let raw = random_array(&mut rng, n, m, if k % 5 == 0 { 0.1 } else { 3.0 });
        let s = anneal_softmax(&raw, [1.0, 0.5, 0.1][k % 3])?;
        let dense = regress_sampled(&cloud, &s)?;
        let full = sparse_apply(&cloud, &sparsify(&s, 0.0)?)?;
        worst_dense = worst_dense.max((&full - &dense).iter().fold(0.0f64, |acc, v| acc.max(v.abs())));
        for r in [0.01, 0.05] {
            let sparse = sparse_apply(&cloud, &sparsify(&s, r)?)?;
            masked_exact &= sparse == masked_dense_apply(s.dense(), cloud.points(), r);
            fallback_columns += s.dense().columns().into_iter().filter(|c| c.iter().all(|&v| v <= r)).count();
        }
    }
    Ok((
        worst_dense <= 1e-6 && masked_exact,
        format!(
            "r = 0 max gap {worst_dense:.2e}; r > 0 equals masked oracle: {masked_exact} ({fallback_columns} argmax-only columns)"
        ),
    ))
}

/// Greedy max-min selection recomputing every distance from scratch.
fn greedy_oracle(p: &Array2<f64>, mut selected: Vec<usize>, m: usize) -> Vec<usize> {
    let n = p.nrows();
    while selected.len() < m {
        let mut best: Option<(usize, f64)> = None;
        for i in (0..n).filter(|i| !selected.contains(i)) {
            let d = selected.iter().map(|&s| sq(p, i, p, s)).fold(f64::INFINITY, f64::min);
            if best.is_none_or(|(_, bd)| d > bd) {
                best = Some((i, d));
            }
        }
        selected.push(best.unwrap().0);
    }
    selected
}

fn fps_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut mismatches = 0;
    for k in 0..200 {
        let n = rng.random_range(1..=64);
        let mut pts = random_array(&mut rng, n, 3, 1.0);
        if k % 4 == 0 {
            pts.mapv_inplace(|v| (v * 2.0).round());
        }
        let cloud = PointCloud::new(pts.clone())?;
        let m = rng.random_range(1..=n);
        let start = rng.random_range(0..n);
        if fps_sample(&cloud, m, start)? != greedy_oracle(&pts, vec![start], m) {
            mismatches += 1;
        }
        let mut pool: Vec<usize> = (0..n).collect();
        pool.shuffle(&mut rng);
        let partial: Vec<usize> = pool[..rng.random_range(0..=m)].to_vec();
        let seed = if partial.is_empty() { vec![0] } else { partial.clone() };
        let expected = if partial.len() == m { partial.clone() } else { greedy_oracle(&pts, seed, m) };
        if fps_completion(&cloud, &partial, m)? != expected {
            mismatches += 1;
        }
    }
    Ok((mismatches == 0, format!("{mismatches} mismatches over 200 instances")))
}

fn brute_chamfer(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    let directed = |x: &Array2<f64>, y: &Array2<f64>| {
        let mut total = 0.0;
        for i in 0..x.nrows() {
            let mut best = f64::INFINITY;
            for j in 0..y.nrows() {
                best = best.min(sq(x, i, y, j));
            }
            total += best;
        }
        total / x.nrows() as f64
    };
    directed(a, b) + directed(b, a)
}

fn permutations(k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(k - 1) {
        for pos in 0..k {
            let mut q = p.clone();
            q.insert(pos, k - 1);
            out.push(q);
        }
    }
    out
}

fn metric_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut chamfer_exact = true;
    for _ in 0..100 {
        let (na, nb) = (rng.random_range(1..=64), rng.random_range(1..=64));
        let a = random_cloud(&mut rng, na);
        let b = random_cloud(&mut rng, nb);
        chamfer_exact &= chamfer_distance(&a, &b)? == brute_chamfer(a.points(), b.points());
    }
    let mut worst = 0.0f64;
    for k in 1..=8 {
        let perms = permutations(k);
        for _ in 0..10 {
            let a = random_cloud(&mut rng, k);
            let b = random_cloud(&mut rng, k);
            let exact = perms
                .iter()
                .map(|p| (0..k).map(|i| sq(a.points(), i, b.points(), p[i]).sqrt()).sum::<f64>() / k as f64)
                .fold(f64::INFINITY, f64::min);
            let got = earth_mover_distance(&a, &b)?;
            worst = worst.max((got - exact).abs() / exact);
        }
    }
    Ok((
        chamfer_exact && worst <= 0.02,
        format!("chamfer exact: {chamfer_exact}; worst EMD relative gap {worst:.2e}"),
    ))
}

struct Classification {
    config: RunConfig,
    data: TaskData,
    pretrained: Pretrained,
    trained: Trained,
}

fn classification_fixture() -> taskdown::Result<Classification> {
    let config = RunConfig::toy(TaskKind::Classification);
    let data = build_dataset(&config.dataset, config.n, config.seed)?;
    let pretrained = pretrain_head(&config, &data)?;
    let trained = train_sampler(&config, pretrained.head.clone(), &data)?;
    Ok(Classification {
        config,
        data,
        pretrained,
        trained,
    })
}

fn sparsity(fx: &Classification) -> Outcome {
    let stats = sampler_stats(&fx.trained.sampler, &fx.data.test, fx.config.m)?;
    Ok((
        stats.nonzero_fraction < 0.05,
        format!(
            "nonzero fraction at r = {} (n = {}, m = {}): {:.4}",
            fx.trained.sampler.threshold, fx.config.n, fx.config.m, stats.nonzero_fraction
        ),
    ))
}

fn classification_advantage(fx: &Classification) -> taskdown::Result<(bool, String, f64)> {
    let head_acc = fx.pretrained.report.reference["head_test_accuracy"];
    let m = fx.config.m;
    let learned = classification_accuracy(&fx.trained.head, &fx.data.test, &fx.trained.sampler, m)?[0];
    let random = classification_accuracy(
        &fx.trained.head,
        &fx.data.test,
        &Classical::new(SamplerKind::Random, fx.config.seed),
        m,
    )?[0];
    Ok((
        head_acc >= 0.95 && learned >= random + 0.10,
        format!("head {head_acc:.3}; m = {m}: learned {learned:.3} vs random {random:.3}"),
        learned,
    ))
}

/// Hands back the whole cloud as every set.
struct WholeCloud;

impl Downsampler for WholeCloud {
    fn name(&self) -> String {
        "whole".into()
    }

    fn downsample(&self, cloud: &PointCloud, m: usize) -> taskdown::Result<DownsampleResult> {
        assert_eq!(m, cloud.len());
        let all: Vec<usize> = (0..m).collect();
        Ok(DownsampleResult {
            generated: cloud.points().clone(),
            matched: all.clone(),
            completed: all,
        })
    }
}

fn reconstruction_advantage() -> Outcome {
    let config = RunConfig::toy(TaskKind::ReconstructionMlp);
    let data = build_dataset(&config.dataset, config.n, config.seed)?;
    let pretrained = pretrain_head(&config, &data)?;
    let trained = train_sampler(&config, pretrained.head, &data)?;
    let m = config.m;
    let learned = reconstruction_nre(&trained.head, &data.test, &trained.sampler, m)?[0][0];
    let random = reconstruction_nre(
        &trained.head,
        &data.test,
        &Classical::new(SamplerKind::Random, config.seed),
        m,
    )?[0][0];
    let identity = reconstruction_nre(&trained.head, &data.test, &WholeCloud, config.n)?[0][0];
    Ok((
        learned < random && identity == 1.0,
        format!("m = {m}: NRE_CD learned {learned:.3} vs random {random:.3}; NRE_CD(Q = P) = {identity}"),
    ))
}

fn flexible_variant(fx: &Classification, fixed_accuracy: f64) -> Outcome {
    let mut config = fx.config.clone();
    config.flexible = true;
    config.m_set = vec![8, 16, 32, 64];
    let trained = train_sampler(&config, fx.pretrained.head.clone(), &fx.data)?;
    let mut all_finite = trained.sampler.m_out() == 64;
    let mut at_16 = f64::NAN;
    let mut cells = Vec::new();
    for &m in &config.m_set {
        let acc = classification_accuracy(&trained.head, &fx.data.test, &trained.sampler, m)?[0];
        all_finite &= acc.is_finite();
        if m == 16 {
            at_16 = acc;
        }
        cells.push(format!("{m}: {acc:.3}"));
    }
    Ok((
        all_finite && (at_16 - fixed_accuracy).abs() <= 0.10,
        format!("accuracy {}; fixed m = 16 model {fixed_accuracy:.3}", cells.join(", ")),
    ))
}

fn timing_scaling() -> Outcome {
    let config = BenchConfig {
        m_grid: vec![8, 512],
        ..BenchConfig::default()
    };
    let report = bench(&config)?;
    let ratio = |stage| timing(&report, stage, 512).unwrap() / timing(&report, stage, 8).unwrap();
    let (fps, learned) = (ratio("fps"), ratio("learned"));
    Ok((
        fps > 10.0 && learned < 2.0,
        format!("time(512) / time(8) on n = 1024: fps {fps:.1}, learned {learned:.2}"),
    ))
}

fn mfold_structure() -> Outcome {
    let count = |patches, code, grid| -> taskdown::Result<(usize, usize)> {
        let cfg = MFoldConfig::new(patches, code, grid)?;
        let head = TaskHead::new(HeadSpec::reconstruction_mfold(cfg), 0)?;
        Ok((head.num_parameters(), cfg.output_points()))
    };
    let mut ok = true;
    let mut counts = Vec::new();
    for patches in [1, 2, 4, 8, 16, 32, 64, 128] {
        let (a, out_a) = count(patches, 128, (4, 4))?;
        let (b, out_b) = count(patches, 128, (16, 16))?;
        ok &= a == b && out_a == patches * 16 && out_b == patches * 256;
        counts.push(a);
    }
    ok &= counts.windows(2).all(|w| w[1] < w[0]);
    let (_, out) = count(4, 128, (16, 16))?;
    ok &= out == 1024;
    let big = MFoldConfig::new(128, 2048, (2, 2))?;
    ok &= big.d_prime() == 16 && big.output_points() == 128 * 4;
    let head = TaskHead::new(HeadSpec::reconstruction_mfold(big), 0)?;
    let cloud = make_synthetic(Shape::Sphere, 64, 0)?;
    ok &= taskdown::heads::reconstruct_mfold(cloud.view(), &big, &head)?.dim() == (512, 3);
    Ok((ok, format!("parameters over M = 1..128: {counts:?}; (128, 4, 16x16) -> {out}")))
}

fn registration_sanity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let truth: Vec<RigidTransform> = (0..32).map(|_| RigidTransform::random(&mut rng, 45.0, 0.3)).collect();
    let pred: Vec<RigidTransform> = (0..32).map(|_| RigidTransform::random(&mut rng, 45.0, 0.3)).collect();
    let flipped: Vec<RigidTransform> = pred
        .iter()
        .map(|t| RigidTransform::from_raw(t.quaternion().map(|v| -v), t.translation()))
        .collect::<taskdown::Result<_>>()?;
    let self_error = mean_rotation_error(&truth, &truth)?;
    let flip_equal = mean_rotation_error(&flipped, &truth)? == mean_rotation_error(&pred, &truth)?;

    let config = RunConfig::toy(TaskKind::Registration);
    let data = build_dataset(&config.dataset, config.n, config.seed)?;
    let reference = pretrain_head(&config, &data)?.report.reference;
    let (head, identity) = (reference["head_mre"], reference["identity_mre"]);
    Ok((
        self_error == 0.0 && flip_equal && head < identity,
        format!(
            "MRE(pred = gt) = {self_error}; sign flip invariant: {flip_equal}; held-out MRE head {head:.2} vs identity {identity:.2}"
        ),
    ))
}

fn report(id: usize, name: &str, started: Instant, outcome: Outcome, failures: &mut Vec<usize>) {
    let (pass, detail) = outcome.unwrap_or_else(|e| (false, format!("error: {e}")));
    if !pass {
        failures.push(id);
    }
    println!(
        "[{}] {id:>2} {name}: {detail} ({:.1}s)",
        if pass { "PASS" } else { "FAIL" },
        started.elapsed().as_secs_f64()
    );
}

fn main() {
    let mut failures = Vec::new();
    let quick: [Criterion; 6] = [
        (1, "column stochasticity", column_stochasticity),
        (2, "permutation invariance", permutation_invariance),
        (3, "gradient correctness", gradient_check),
        (4, "sparse and dense agreement", sparse_dense_agreement),
        (5, "farthest point oracle", fps_oracle),
        (6, "metric oracles", metric_oracles),
    ];
    for (id, name, run) in quick {
        report(id, name, Instant::now(), run(), &mut failures);
    }

    let started = Instant::now();
    match classification_fixture() {
        Ok(fx) => {
            report(7, "sparsity after annealing", started, sparsity(&fx), &mut failures);
            let (fixed_accuracy, outcome) = match classification_advantage(&fx) {
                Ok((pass, detail, learned)) => (learned, Ok((pass, detail))),
                Err(e) => (f64::NAN, Err(e)),
            };
            report(8, "classification advantage", started, outcome, &mut failures);
            let started = Instant::now();
            report(10, "flexible variant", started, flexible_variant(&fx, fixed_accuracy), &mut failures);
        }
        Err(e) => {
            for (id, name) in [(7, "sparsity after annealing"), (8, "classification advantage"), (10, "flexible variant")] {
                report(id, name, started, Err(taskdown::Error::Divergence(e.to_string())), &mut failures);
            }
        }
    }
    report(9, "reconstruction advantage", Instant::now(), reconstruction_advantage(), &mut failures);
    report(11, "timing scaling", Instant::now(), timing_scaling(), &mut failures);
    report(12, "multi-patch folding structure", Instant::now(), mfold_structure(), &mut failures);
    report(13, "registration sanity", Instant::now(), registration_sanity(), &mut failures);

    if failures.is_empty() {
        println!("all 13 criteria passed");
    } else {
        failures.sort_unstable();
        println!("failed criteria: {failures:?}");
        std::process::exit(1);
    }
}
