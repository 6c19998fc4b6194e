//! Steady transonic-shock solver for a slightly expanding 2-D nozzle.
//!
//! The flow is posed in Lagrangian coordinates (xi, eta) where streamlines
//! are horizontal lines. A supersonic inflow is marched to the shock front,
//! the subsonic region behind the front is solved as a fixed-domain elliptic
//! sub-problem for the flow angle, and the front itself is located by the
//! root of a monotone solvability function and closed by a fixed-point loop
//! with a multi-seed uniqueness harness.

pub mod config;
pub mod elliptic;
pub mod error;
pub mod gas;
pub mod linalg;
pub mod march;
pub mod numerics;
pub mod setup;
pub mod shock;
pub mod solver;

pub use config::RunConfig;
pub use error::{Error, Result};
pub use gas::{derived, flow_regime, DerivedState, FlowRegime, GasModel, GasState};
pub use setup::{
    admissible_pe_interval, build_background, mass_flux_width, validate_compatibility,
    y0_map, BackgroundShock, CompatReport, InflowPerturbation, NozzleSpec, PeInterval,
    ProblemSetup, Profile,
};
pub use shock::{
    h1_residual_and_gradient, h3_downstream, normal_shock_downstream, polar_critical_points,
    polar_state_at_pressure, rh_residuals, Branch, PolarCriticalPoints, PolarPoint,
};
pub use solver::{
    fixed_point_solve, locate_shock, solvability_f_tilde, uniqueness_sweep, SolveReport,
    SolverGrid, SolverOptions, SweepVerdict, Verdict,
};
