//! Shared fixtures for the criterion benchmarks.

use nozzle_shock::setup::{InflowPerturbation, NozzleSpec, ProblemSetup};
use nozzle_shock::{GasModel, GasState};

pub fn model() -> GasModel {
    GasModel::new(1.4, 1.0, 1.0).unwrap()
}

/// p- = rho- = 1, M- = 2 upstream state.
pub fn upstream_m2() -> GasState {
    GasState::new(1.0, 0.0, 2.0 * 1.4f64.sqrt(), 0.0)
}

pub fn wall_driven_setup(sigma: f64) -> ProblemSetup {
    let nozzle = NozzleSpec::new(1.0, sigma, 0.5, 0.05, false).unwrap();
    ProblemSetup::new(model(), nozzle, upstream_m2(), InflowPerturbation::zero()).unwrap()
}
