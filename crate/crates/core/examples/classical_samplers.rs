//! Downsamples a synthetic torus with random, voxel and farthest point
//! sampling and reports how well each subset covers the full cloud.
//!
//! `cargo run --release --example classical_samplers`

use taskdown::metrics::mean_nearest_sq;
use taskdown::samplers::{SamplerKind, SamplerSpec};
use taskdown::synthetic::{make_synthetic, Shape};

pub fn run_example() -> taskdown::Result<()> {
    let cloud = make_synthetic(Shape::Torus, 1024, 3)?;
    println!("{:>7} {:>5} {:>14}", "method", "m", "coverage gap");
    for m in [16, 64, 256] {
        for kind in [SamplerKind::Random, SamplerKind::Voxel, SamplerKind::Fps] {
            let indices = SamplerSpec::new(kind, m, 7).apply(&cloud)?;
            let subset = cloud.select(&indices)?;
            let gap = mean_nearest_sq(cloud.points().view(), subset.points().view());
            println!("{kind:>7} {m:>5} {gap:>14.5}");
        }
    }
    Ok(())
}

fn main() -> taskdown::Result<()> {
    env_logger::init();
    run_example()
}
