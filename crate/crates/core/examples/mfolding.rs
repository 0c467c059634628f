//! Shows how the multi-patch folding decoder trades patch count against
//! parameters while the output size follows the grid.
//!
//! `cargo run --release --example mfolding`

use taskdown::heads::{reconstruct_mfold, HeadSpec, MFoldConfig, TaskHead};
use taskdown::synthetic::{make_synthetic, Shape};

pub fn run_example() -> taskdown::Result<()> {
    let cloud = make_synthetic(Shape::Cube, 256, 2)?;
    println!("{:>7} {:>6} {:>8} {:>8} {:>12}", "patches", "code", "grid", "output", "parameters");
    for (patches, code, grid) in [(1, 128, (16, 16)), (4, 128, (8, 8)), (4, 128, (16, 16)), (16, 128, (4, 4)), (128, 2048, (2, 2))] {
        let cfg = MFoldConfig::new(patches, code, grid)?;
        let head = TaskHead::new(HeadSpec::reconstruction_mfold(cfg), 0)?;
        let out = reconstruct_mfold(cloud.points().view(), &cfg, &head)?;
        println!(
            "{patches:>7} {code:>6} {:>8} {:>8} {:>12}",
            format!("{}x{}", grid.0, grid.1),
            out.nrows(),
            head.num_parameters()
        );
    }
    Ok(())
}

fn main() -> taskdown::Result<()> {
    env_logger::init();
    run_example()
}
