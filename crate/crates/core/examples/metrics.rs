//! Computes the point-set and registration metrics on small hand-made inputs.
//!
//! `cargo run --release --example metrics`

use ndarray::array;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use taskdown::metrics::{chamfer_points, earth_mover_points, mean_rotation_error, nre, ReconMetric};
use taskdown::RigidTransform;

pub fn run_example() -> taskdown::Result<()> {
    let a = array![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]];
    let b = array![[0.0, 0.0, 0.1], [1.0, 0.0, 0.0], [0.0, 2.0, 0.0]];
    println!("chamfer {:.4}", chamfer_points(a.view(), b.view())?);
    println!("earth mover {:.4}", earth_mover_points(a.view(), b.view())?);
    let full = array![[0.0, 0.0, 0.05], [1.0, 0.0, 0.0], [0.0, 1.1, 0.0]];
    println!("NRE {:.3}", nre(a.view(), b.view(), full.view(), ReconMetric::Chamfer)?);

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let truth: Vec<RigidTransform> = (0..4).map(|_| RigidTransform::random(&mut rng, 45.0, 0.3)).collect();
    let flipped: Vec<RigidTransform> = truth
        .iter()
        .map(|t| RigidTransform::from_raw(t.quaternion().map(|v| -v), t.translation()))
        .collect::<taskdown::Result<_>>()?;
    println!("MRE of the truth against itself {:.2e}", mean_rotation_error(&truth, &truth)?);
    println!("MRE with every quaternion negated {:.2e}", mean_rotation_error(&flipped, &truth)?);
    println!(
        "MRE of the identity {:.2} deg",
        mean_rotation_error(&vec![RigidTransform::identity(); truth.len()], &truth)?
    );
    Ok(())
}

fn main() -> taskdown::Result<()> {
    env_logger::init();
    run_example()
}
