//! Error type shared by all solver stages.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid argument or state outside a function's domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// Upstream state is not supersonic, no shock can form.
    #[error("no shock: upstream Mach {mach} is not > 1")]
    NoShock { mach: f64 },

    /// Requested pressure leaves the shock polar of the upstream state.
    #[error("pressure {p} outside shock polar range [{lo}, {hi}]")]
    OutOfPolar { p: f64, lo: f64, hi: f64 },

    /// Nonlinear solve failed to converge.
    #[error("root solve failed: {0}")]
    RootSolve(String),

    /// Pressure jump across the front fell below the transonic floor.
    #[error("degenerate shock: |[p]| = {jump} below floor {floor}")]
    DegenerateShock { jump: f64, floor: f64 },

    /// A Theorem-type hypothesis (ellipticity, subsonic Mach, p > p*+eps, u > 0)
    /// failed; carries a located diagnostic when available.
    #[error("hypothesis violation: {what}{}", location_suffix(.location))]
    Hypothesis {
        what: String,
        location: Option<(usize, usize)>,
    },

    /// Explicit marcher step violates the CFL bound.
    #[error("CFL violation in supersonic march: {what}; suggested march steps >= {suggested_nx}")]
    Cfl { what: String, suggested_nx: usize },

    /// Linear system solve broke down.
    #[error("linear solve failed: {0}")]
    LinearSolve(String),

    /// Fixed-point loop exceeded its iteration budget.
    #[error("fixed-point iteration did not converge in {iters} iterations (last change {last_change:.3e})")]
    NonConvergence { iters: usize, last_change: f64 },

    /// Solvability scan found no sign change: Pe outside admissible range.
    #[error("no root: Pe outside admissible range (F at ends: {f_lo:.6e}, {f_hi:.6e})")]
    NoRoot { f_lo: f64, f_hi: f64 },

    /// Solvability scan found several sign changes: monotonicity violated.
    #[error("monotonicity violated: solvability scan found {count} sign changes")]
    MultipleRoots { count: usize },

    /// Malformed user input (profile table, config file).
    #[error("input error: {0}")]
    Input(String),

    /// Configuration error.
    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

fn location_suffix(loc: &Option<(usize, usize)>) -> String {
    match loc {
        Some((i, j)) => format!(" at node (i={i}, j={j})"),
        None => String::new(),
    }
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code contract used by the CLI: 2 = config/input,
    /// 3 = regime or hypothesis breach, 4 = non-convergence, 5 = no root.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Input(_) | Error::Config(_) | Error::Io(_) => 2,
            Error::Domain(_)
            | Error::NoShock { .. }
            | Error::OutOfPolar { .. }
            | Error::DegenerateShock { .. }
            | Error::Hypothesis { .. }
            | Error::MultipleRoots { .. }
            | Error::Cfl { .. } => 3,
            Error::RootSolve(_) | Error::LinearSolve(_) | Error::NonConvergence { .. } => 4,
            Error::NoRoot { .. } => 5,
        }
    }
}
