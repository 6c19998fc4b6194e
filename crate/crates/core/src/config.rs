//! Run configuration: parsed form of the TOML config file plus construction
//! of the problem setup it describes.

use crate::error::{Error, Result};
use crate::gas::{GasModel, GasState};
use crate::setup::{
    BuiltinProfile, InflowPerturbation, NozzleSpec, ProblemSetup, Profile, ProfileTable,
    DEFAULT_SIGMA_CAP,
};
use crate::solver::{SolverGrid, SolverOptions};
use serde::Deserialize;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub gamma: f64,
    pub c_v: f64,
    #[serde(default = "default_r_const")]
    pub r_const: f64,
    pub p_minus: f64,
    pub rho_minus: f64,
    pub mach_minus: f64,
    pub sigma: f64,
    #[serde(rename = "L")]
    pub length_l: f64,
    pub xi0: f64,
    #[serde(rename = "Pe")]
    pub pe: Option<f64>,
    #[serde(default)]
    pub sigma_cap: Option<f64>,
    #[serde(default)]
    pub eps_hyp: Option<f64>,
    #[serde(default)]
    pub seeds: Option<usize>,
    #[serde(default)]
    pub max_iters: Option<usize>,
    pub grid: GridConfig,
    #[serde(default)]
    pub profiles: ProfilesConfig,
    #[serde(default)]
    pub tol: TolConfig,
}

fn default_r_const() -> f64 {
    1.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub nx: usize,
    pub ny: usize,
    #[serde(default)]
    pub march_nx: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfilesConfig {
    #[serde(default)]
    pub p0: Option<String>,
    #[serde(default)]
    pub theta0: Option<String>,
    #[serde(default)]
    pub q0: Option<String>,
    #[serde(default)]
    pub s0: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TolConfig {
    #[serde(default = "default_newton_tol")]
    pub newton: f64,
    #[serde(default = "default_fixed_point_tol")]
    pub fixed_point: f64,
    #[serde(default = "default_linear_tol")]
    pub linear: f64,
}

fn default_newton_tol() -> f64 {
    1e-12
}
fn default_fixed_point_tol() -> f64 {
    1e-10
}
fn default_linear_tol() -> f64 {
    1e-10
}

impl Default for TolConfig {
    fn default() -> Self {
        TolConfig {
            newton: default_newton_tol(),
            fixed_point: default_fixed_point_tol(),
            linear: default_linear_tol(),
        }
    }
}

impl RunConfig {
    pub fn from_str(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| Error::Config(format!("config parse: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_str(&text)
    }

    fn validate(&self) -> Result<()> {
        if !(self.gamma > 1.0) {
            return Err(Error::Config(format!("gamma must be > 1 (got {})", self.gamma)));
        }
        if !(self.c_v > 0.0) || !(self.r_const > 0.0) {
            return Err(Error::Config("c_v and r_const must be positive".into()));
        }
        if !(self.p_minus > 0.0) || !(self.rho_minus > 0.0) {
            return Err(Error::Config("p_minus and rho_minus must be positive".into()));
        }
        if !(self.mach_minus > 0.0) {
            return Err(Error::Config(format!("mach_minus must be positive, got {}", self.mach_minus)));
        }
        // a subsonic upstream is not a config error; the shock construction
        // itself reports the missing-shock regime
        if self.grid.nx < 8 || self.grid.ny < 8 {
            return Err(Error::Config(format!(
                "grid sizes must be at least 8 (got {}x{})",
                self.grid.nx, self.grid.ny
            )));
        }
        if !(self.tol.newton > 0.0) || !(self.tol.fixed_point > 0.0) || !(self.tol.linear > 0.0) {
            return Err(Error::Config("all tolerances must be positive".into()));
        }
        if let Some(s) = self.seeds {
            if s < 5 {
                return Err(Error::Config(format!("seeds must be at least 5 (got {s})")));
            }
        }
        Ok(())
    }

    pub fn gas_model(&self) -> Result<GasModel> {
        GasModel::new(self.gamma, self.c_v, self.r_const)
    }

    /// The planar upstream state implied by (p-, rho-, M-).
    pub fn upstream_state(&self) -> Result<GasState> {
        let model = self.gas_model()?;
        let c = (self.gamma * self.p_minus / self.rho_minus).sqrt();
        let q = self.mach_minus * c;
        let s = model.entropy_from_p_rho(self.p_minus, self.rho_minus)?;
        Ok(GasState::new(self.p_minus, 0.0, q, s))
    }

    fn profile(&self, spec: &Option<String>, base_dir: &Path) -> Result<Profile> {
        let Some(name) = spec else {
            return Ok(Profile::zero());
        };
        if let Some(b) = BuiltinProfile::from_name(name) {
            return Ok(Profile::Builtin(b));
        }
        let mut path = PathBuf::from(name);
        if path.is_relative() {
            path = base_dir.join(path);
        }
        let text = std::fs::read_to_string(&path)
            .map_err(|e| Error::Config(format!("cannot read profile {}: {e}", path.display())))?;
        Ok(Profile::Table(ProfileTable::from_csv_str(&text)?))
    }

    /// Profiles resolved relative to the config file's directory.
    pub fn inflow(&self, base_dir: &Path) -> Result<InflowPerturbation> {
        Ok(InflowPerturbation {
            p0: self.profile(&self.profiles.p0, base_dir)?,
            theta0: self.profile(&self.profiles.theta0, base_dir)?,
            q0: self.profile(&self.profiles.q0, base_dir)?,
            s0: self.profile(&self.profiles.s0, base_dir)?,
        })
    }

    pub fn nozzle(&self, force: bool) -> Result<NozzleSpec> {
        NozzleSpec::new(
            self.length_l,
            self.sigma,
            self.xi0,
            self.sigma_cap.unwrap_or(DEFAULT_SIGMA_CAP),
            force,
        )
    }

    pub fn setup(&self, base_dir: &Path, force: bool) -> Result<ProblemSetup> {
        ProblemSetup::new(
            self.gas_model()?,
            self.nozzle(force)?,
            self.upstream_state()?,
            self.inflow(base_dir)?,
        )
    }

    pub fn solver_grid(&self) -> SolverGrid {
        SolverGrid {
            nx: self.grid.nx,
            ny: self.grid.ny,
            march_nx: self.grid.march_nx,
        }
    }

    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            tol_fixed_point: self.tol.fixed_point,
            tol_linear: self.tol.linear,
            max_iters: self.max_iters.unwrap_or(50),
            eps_hyp: self.eps_hyp.unwrap_or(0.1),
            ..SolverOptions::default()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const GOOD: &str = r#"
gamma = 1.4
c_v = 1.0
p_minus = 1.0
rho_minus = 1.0
mach_minus = 2.0
sigma = 0.01
L = 1.0
xi0 = 0.5
Pe = 0.2

[grid]
nx = 32
ny = 24

[profiles]
theta0 = "smoothstep"

[tol]
fixed_point = 1e-10
"#;

    #[test]
    fn parses_and_builds_setup() {
        let cfg = RunConfig::from_str(GOOD).unwrap();
        assert_eq!(cfg.grid.nx, 32);
        assert_eq!(cfg.pe, Some(0.2));
        assert_eq!(cfg.tol.newton, 1e-12);
        let u = cfg.upstream_state().unwrap();
        assert!((u.q - 2.0 * 1.4f64.sqrt()).abs() < 1e-12);
        assert!(u.s.abs() < 1e-12);
        let setup = cfg.setup(Path::new("."), false).unwrap();
        assert!((setup.background.kappa - 17.0 / 9.0).abs() < 1e-12);
    }

    #[test]
    fn subsonic_upstream_surfaces_as_no_shock() {
        let bad = GOOD.replace("mach_minus = 2.0", "mach_minus = 0.8");
        let cfg = RunConfig::from_str(&bad).unwrap();
        let err = cfg.setup(Path::new("."), false).unwrap_err();
        assert!(matches!(err, Error::NoShock { .. }));
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn rejects_small_grid() {
        let bad = GOOD.replace("nx = 32", "nx = 4");
        assert!(matches!(RunConfig::from_str(&bad), Err(Error::Config(_))));
    }

    #[test]
    fn rejects_unknown_keys() {
        let bad = format!("{GOOD}\nbogus_key = 1\n");
        assert!(matches!(RunConfig::from_str(&bad), Err(Error::Config(_))));
    }

    #[test]
    fn unknown_builtin_is_treated_as_path_and_fails_clearly() {
        let bad = GOOD.replace("\"smoothstep\"", "\"no_such_profile\"");
        let cfg = RunConfig::from_str(&bad).unwrap();
        let err = cfg.inflow(Path::new("/nonexistent")).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }
}
