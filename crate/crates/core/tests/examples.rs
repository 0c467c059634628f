#[path = "../examples/classical_samplers.rs"]
#[allow(dead_code)]
mod classical_samplers;
#[path = "../examples/metrics.rs"]
#[allow(dead_code)]
mod metrics;
#[path = "../examples/mfolding.rs"]
#[allow(dead_code)]
mod mfolding;
#[path = "../examples/sampling_matrix.rs"]
#[allow(dead_code)]
mod sampling_matrix;

#[test]
fn classical_samplers_example_runs() {
    classical_samplers::run_example().unwrap();
}

#[test]
fn metrics_example_runs() {
    metrics::run_example().unwrap();
}

#[test]
fn mfolding_example_runs() {
    mfolding::run_example().unwrap();
}

#[test]
fn sampling_matrix_example_runs() {
    sampling_matrix::run_example().unwrap();
}
