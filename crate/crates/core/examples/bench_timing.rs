//! Times random sampling, farthest point sampling and the learned generation
//! path over a range of output sizes on 1024-point clouds.
//!
//! `cargo run --release --example bench_timing`

use taskdown::harness::{bench, timing, BenchConfig};

pub fn run_example() -> taskdown::Result<()> {
    let config = BenchConfig::default();
    let report = bench(&config)?;
    println!("{:>5} {:>12} {:>12} {:>12}", "m", "random ms", "fps ms", "learned ms");
    for &m in &config.m_grid {
        let ms = |stage| timing(&report, stage, m).unwrap_or(f64::NAN) * 1e3;
        println!("{m:>5} {:>12.4} {:>12.4} {:>12.4}", ms("random"), ms("fps"), ms("learned"));
    }
    let (lo, hi) = (config.m_grid[0], *config.m_grid.last().unwrap());
    let ratio = |stage| timing(&report, stage, hi).unwrap() / timing(&report, stage, lo).unwrap();
    println!("time({hi}) / time({lo}): fps {:.1}, learned {:.2}", ratio("fps"), ratio("learned"));
    Ok(())
}

fn main() -> taskdown::Result<()> {
    env_logger::init();
    run_example()
}
