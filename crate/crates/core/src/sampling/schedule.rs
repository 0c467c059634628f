use serde::{Deserialize, Serialize};

/// Linear temperature decay from `tau_start` to `tau_min` over the first
/// `decay_fraction` of the iterations, constant afterwards.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Annealing {
    pub tau_start: f64,
    pub tau_min: f64,
    pub total_iterations: usize,
    pub decay_fraction: f64,
}

impl Annealing {
    pub fn new(tau_min: f64, total_iterations: usize) -> Self {
        Self {
            tau_start: 1.0,
            tau_min,
            total_iterations,
            decay_fraction: 0.8,
        }
    }

    pub fn temperature(&self, iteration: usize) -> f64 {
        let span = (self.total_iterations as f64 * self.decay_fraction).floor();
        if span <= 0.0 {
            return self.tau_min;
        }
        let t = (iteration as f64 / span).min(1.0);
        self.tau_start + (self.tau_min - self.tau_start) * t
    }
}
