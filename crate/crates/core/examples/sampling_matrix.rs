//! Walks through the learned sampler's inference path by hand: features,
//! logits, annealed softmax, sparsification, soft points, matching and
//! completion. The sampler is untrained, so only the mechanics are shown.
//!
//! `cargo run --release --example sampling_matrix`

use taskdown::features::extract_features;
use taskdown::samplers::{fps_completion, match_to_subset};
use taskdown::sampling::{
    anneal_softmax, format_triplets, orthogonality_residual, predict_raw_rows, regress_sampled, sparse_apply, sparsify,
    LearnedSampler,
};
use taskdown::synthetic::{make_synthetic, Shape};

pub fn run_example() -> taskdown::Result<()> {
    let cloud = make_synthetic(Shape::Sphere, 128, 1)?;
    let m = 8;
    let mut sampler = LearnedSampler::new(&[32, 64], &[64, 32], m, 0.1, 5)?;
    sampler.calibrate(std::slice::from_ref(&cloud))?;

    let features = extract_features(&cloud, &sampler.encoder)?;
    println!("features: {} x {}", features.features.nrows(), features.dim());
    let raw = predict_raw_rows(&features, &sampler.sampler)?;
    for tau in [1.0, 0.1, 0.01] {
        let s = anneal_softmax(&raw, tau)?;
        let sparse = sparsify(&s, sampler.threshold)?;
        println!(
            "tau {tau:>5}: nonzero fraction {:.4}, orthogonality residual {:.3}",
            sparse.nonzero_fraction(),
            orthogonality_residual(&s)
        );
    }

    let s = anneal_softmax(&raw, 0.01)?;
    let dense_q = regress_sampled(&cloud, &s)?;
    let sparse = sparsify(&s, sampler.threshold)?;
    let sparse_q = sparse_apply(&cloud, &sparse)?;
    let gap = (&dense_q - &sparse_q).iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    println!("dense and sparse soft points differ by at most {gap:.2e}");

    let matched = match_to_subset(&cloud, sparse_q.view())?;
    let completed = fps_completion(&cloud, &matched, m)?;
    println!("matched {} distinct points, completed to {:?}", matched.len(), completed);
    println!("first triplets:");
    for line in format_triplets(&sparse).lines().take(4) {
        println!("  {line}");
    }
    Ok(())
}

fn main() -> taskdown::Result<()> {
    env_logger::init();
    run_example()
}
