//! Problem ingestion and derived setup: nozzle geometry, inflow perturbation
//! profiles, the planar background shock with its kappa constants, the
//! mass-flux width and inverse inlet map, the admissible receiver-pressure
//! interval, and compatibility validation of the inlet data.

use crate::error::{Error, Result};
use crate::gas::{derived, GasModel, GasState};
use crate::numerics::{cumulative_integral_uniform, integrate_uniform, linspace, MonotoneCubic};
use crate::shock::normal_shock_downstream;
use serde::{Deserialize, Serialize};

/// Expanding nozzle: the upper wall is 1 + x1 tan(sigma); xi0 is the
/// reference abscissa the free shock front is anchored to.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct NozzleSpec {
    pub length_l: f64,
    pub sigma: f64,
    pub xi0: f64,
}

pub const DEFAULT_SIGMA_CAP: f64 = 0.05;

impl NozzleSpec {
    /// sigma = 0 is accepted as the degenerate planar configuration.
    pub fn new(length_l: f64, sigma: f64, xi0: f64, sigma_cap: f64, force: bool) -> Result<Self> {
        if !(length_l > 0.0) {
            return Err(Error::Config(format!("nozzle length must be positive (got {length_l})")));
        }
        if !(xi0 > 0.0 && xi0 < length_l) {
            return Err(Error::Config(format!(
                "xi0 must lie strictly inside (0, {length_l}) (got {xi0})"
            )));
        }
        if !(sigma >= 0.0) {
            return Err(Error::Config(format!("sigma must be >= 0 (got {sigma})")));
        }
        if sigma > sigma_cap && !force {
            return Err(Error::Config(format!(
                "sigma = {sigma} exceeds the cap {sigma_cap}; the construction holds for small \
                 sigma only (pass --force to override)"
            )));
        }
        Ok(NozzleSpec { length_l, sigma, xi0 })
    }
}

/// One scalar inflow profile on [0, 1].
#[derive(Debug, Clone)]
pub enum Profile {
    Builtin(BuiltinProfile),
    Table(ProfileTable),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BuiltinProfile {
    /// identically zero
    Zero,
    /// x
    Affine,
    /// quintic smoothstep: 0 at 0, 1 at 1, flat to second order at both ends
    Smoothstep,
    /// interior bump 64 x^3 (1-x)^3, flat to second order at both ends
    Bump,
}

impl BuiltinProfile {
    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "zero" => Some(BuiltinProfile::Zero),
            "affine" => Some(BuiltinProfile::Affine),
            "smoothstep" => Some(BuiltinProfile::Smoothstep),
            "bump" => Some(BuiltinProfile::Bump),
            _ => None,
        }
    }

    fn eval(self, x: f64) -> f64 {
        match self {
            BuiltinProfile::Zero => 0.0,
            BuiltinProfile::Affine => x,
            BuiltinProfile::Smoothstep => ((6.0 * x - 15.0) * x + 10.0) * x * x * x,
            BuiltinProfile::Bump => 64.0 * x.powi(3) * (1.0 - x).powi(3),
        }
    }

    fn deriv(self, x: f64) -> f64 {
        match self {
            BuiltinProfile::Zero => 0.0,
            BuiltinProfile::Affine => 1.0,
            BuiltinProfile::Smoothstep => 30.0 * x * x * (x - 1.0) * (x - 1.0),
            BuiltinProfile::Bump => 192.0 * x * x * (1.0 - x) * (1.0 - x) * (1.0 - 2.0 * x),
        }
    }

    fn second_deriv(self, x: f64) -> f64 {
        match self {
            BuiltinProfile::Zero => 0.0,
            BuiltinProfile::Affine => 0.0,
            BuiltinProfile::Smoothstep => 60.0 * x * (2.0 * x - 1.0) * (x - 1.0),
            BuiltinProfile::Bump => {
                384.0 * x * (1.0 - x) * ((1.0 - 2.0 * x) * (1.0 - 2.0 * x) - x * (1.0 - x))
            }
        }
    }
}

/// Tabulated profile on a uniform x-grid with monotone-cubic interpolation
/// and second-order one-sided endpoint derivative estimates.
#[derive(Debug, Clone)]
pub struct ProfileTable {
    values: Vec<f64>,
    h: f64,
    interp: MonotoneCubic,
}

impl ProfileTable {
    pub fn new(x: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if x.len() != values.len() {
            return Err(Error::Input("profile table: x and value lengths differ".into()));
        }
        if x.len() < 5 {
            return Err(Error::Input(format!(
                "profile table needs at least 5 samples for endpoint derivative estimates (got {})",
                x.len()
            )));
        }
        let n = x.len();
        if x[0].abs() > 1e-9 || (x[n - 1] - 1.0).abs() > 1e-9 {
            return Err(Error::Input("profile table must span [0, 1]".into()));
        }
        let h = 1.0 / (n as f64 - 1.0);
        for (k, &xk) in x.iter().enumerate() {
            if (xk - k as f64 * h).abs() > 1e-9 {
                return Err(Error::Input(format!(
                    "profile table abscissae must be uniform on [0,1]; sample {k} is {xk}"
                )));
            }
        }
        for (k, &v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::Input(format!("profile value {k} is not finite")));
            }
        }
        // C2-resolvable on the grid: second differences stay bounded
        for k in 1..n - 1 {
            let dd = (values[k + 1] - 2.0 * values[k] + values[k - 1]) / (h * h);
            if !dd.is_finite() || dd.abs() > 1e8 {
                return Err(Error::Input(format!(
                    "profile second difference at sample {k} is unbounded ({dd:.3e})"
                )));
            }
        }
        let interp = MonotoneCubic::new(x, values.clone())?;
        Ok(ProfileTable { values, h, interp })
    }

    /// Parse the two-column CSV `x2,value`; a non-numeric first line is
    /// treated as a header.
    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut xs = Vec::new();
        let mut vs = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            let parts: Vec<&str> = trimmed.split(',').map(|p| p.trim()).collect();
            if parts.len() != 2 {
                return Err(Error::Input(format!(
                    "profile CSV line {}: expected two comma-separated columns, got {}",
                    lineno + 1,
                    parts.len()
                )));
            }
            match (parts[0].parse::<f64>(), parts[1].parse::<f64>()) {
                (Ok(x), Ok(v)) => {
                    xs.push(x);
                    vs.push(v);
                }
                _ if lineno == 0 => continue, // header
                _ => {
                    return Err(Error::Input(format!(
                        "profile CSV line {}: cannot parse '{trimmed}' as numbers",
                        lineno + 1
                    )));
                }
            }
        }
        ProfileTable::new(xs, vs)
    }

    fn eval(&self, x: f64) -> f64 {
        self.interp.eval(x)
    }

    fn deriv(&self, x: f64) -> f64 {
        let n = self.values.len();
        let h = self.h;
        let v = &self.values;
        if x <= 0.0 {
            (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * h)
        } else if x >= 1.0 {
            (3.0 * v[n - 1] - 4.0 * v[n - 2] + v[n - 3]) / (2.0 * h)
        } else {
            let k = ((x / h).round() as usize).clamp(1, n - 2);
            (v[k + 1] - v[k - 1]) / (2.0 * h)
        }
    }

    fn second_deriv(&self, x: f64) -> f64 {
        let n = self.values.len();
        let h = self.h;
        let v = &self.values;
        if x <= 0.0 {
            (2.0 * v[0] - 5.0 * v[1] + 4.0 * v[2] - v[3]) / (h * h)
        } else if x >= 1.0 {
            (2.0 * v[n - 1] - 5.0 * v[n - 2] + 4.0 * v[n - 3] - v[n - 4]) / (h * h)
        } else {
            let k = ((x / h).round() as usize).clamp(1, n - 2);
            (v[k + 1] - 2.0 * v[k] + v[k - 1]) / (h * h)
        }
    }
}

impl Profile {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Profile::Builtin(b) => b.eval(x),
            Profile::Table(t) => t.eval(x),
        }
    }

    pub fn deriv(&self, x: f64) -> f64 {
        match self {
            Profile::Builtin(b) => b.deriv(x),
            Profile::Table(t) => t.deriv(x),
        }
    }

    pub fn second_deriv(&self, x: f64) -> f64 {
        match self {
            Profile::Builtin(b) => b.second_deriv(x),
            Profile::Table(t) => t.second_deriv(x),
        }
    }

    pub fn zero() -> Self {
        Profile::Builtin(BuiltinProfile::Zero)
    }
}

/// The four perturbation profiles U0 = (p0, theta0, q0, s0).
#[derive(Debug, Clone)]
pub struct InflowPerturbation {
    pub p0: Profile,
    pub theta0: Profile,
    pub q0: Profile,
    pub s0: Profile,
}

impl InflowPerturbation {
    pub fn zero() -> Self {
        InflowPerturbation {
            p0: Profile::zero(),
            theta0: Profile::zero(),
            q0: Profile::zero(),
            s0: Profile::zero(),
        }
    }

    pub fn eval(&self, x: f64) -> [f64; 4] {
        [
            self.p0.eval(x),
            self.theta0.eval(x),
            self.q0.eval(x),
            self.s0.eval(x),
        ]
    }
}

/// Planar background shock with the constants entering the solvability
/// function and the receiver-pressure interval.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BackgroundShock {
    pub u_minus_bar: GasState,
    pub u_plus_bar: GasState,
    pub p_jump: f64,
    pub kappa: f64,
    pub kappa1: f64,
    pub kappa2: f64,
    /// mass-flux width of the unperturbed inlet (rho- q- over unit height)
    pub eta0_planar: f64,
    pub rho_minus: f64,
    pub q_minus: f64,
    pub rho_plus: f64,
    pub q_plus: f64,
    pub mach2_minus: f64,
    pub mach2_plus: f64,
    pub c2_minus: f64,
    pub c2_plus: f64,
}

impl BackgroundShock {
    /// rho- q- = rho+ q+, the planar mass flux.
    pub fn mass_flux(&self) -> f64 {
        self.rho_minus * self.q_minus
    }
}

/// Build the planar background and evaluate the kappa constants literally
/// from their displayed forms; kappa > 0 is verified.
pub fn build_background(model: &GasModel, u_minus_bar: &GasState) -> Result<BackgroundShock> {
    let dm = derived(model, u_minus_bar)?;
    let u_plus_bar = normal_shock_downstream(model, u_minus_bar)?;
    let dp = derived(model, &u_plus_bar)?;
    let gamma = model.gamma;
    let p_jump = u_plus_bar.p - u_minus_bar.p;
    let kappa = ((gamma - 1.0) / (gamma * u_plus_bar.p)
        + 1.0 / (dp.rho * u_plus_bar.q * u_plus_bar.q))
        * p_jump;
    if !(kappa > 0.0) {
        return Err(Error::Domain(format!("background kappa must be positive (got {kappa})")));
    }
    let kappa1 = -(1.0 / (dm.rho * u_minus_bar.q * u_minus_bar.q))
        * (kappa + p_jump / (dp.rho * u_plus_bar.q * u_plus_bar.q))
        - (gamma - 1.0) / (gamma * u_plus_bar.p) * (1.0 - dp.rho / dm.rho);
    let kappa2 =
        1.0 / (gamma * model.c_v) * (kappa + (dm.c * dm.c - dp.c * dp.c) / (dp.c * dp.c));
    if !kappa1.is_finite() || !kappa2.is_finite() {
        return Err(Error::Domain("background kappa1/kappa2 not finite".into()));
    }
    Ok(BackgroundShock {
        u_minus_bar: *u_minus_bar,
        u_plus_bar,
        p_jump,
        kappa,
        kappa1,
        kappa2,
        eta0_planar: dm.rho * u_minus_bar.q,
        rho_minus: dm.rho,
        q_minus: u_minus_bar.q,
        rho_plus: dp.rho,
        q_plus: u_plus_bar.q,
        mach2_minus: dm.mach * dm.mach,
        mach2_plus: dp.mach * dp.mach,
        c2_minus: dm.c * dm.c,
        c2_plus: dp.c * dp.c,
    })
}

/// Full inlet state at height x2: U-(0, x2) = U-bar + sigma U0(x2).
pub fn inlet_state(
    u_minus_bar: &GasState,
    perturb: &InflowPerturbation,
    sigma: f64,
    x2: f64,
) -> GasState {
    let u0 = perturb.eval(x2);
    GasState::new(
        u_minus_bar.p + sigma * u0[0],
        u_minus_bar.theta + sigma * u0[1],
        u_minus_bar.q + sigma * u0[2],
        u_minus_bar.s + sigma * u0[3],
    )
}

fn inlet_flux_integrand(
    model: &GasModel,
    u_minus_bar: &GasState,
    perturb: &InflowPerturbation,
    sigma: f64,
    x2: f64,
) -> Result<f64> {
    let st = inlet_state(u_minus_bar, perturb, sigma, x2);
    let d = derived(model, &st)?;
    Ok(d.rho * st.q * st.theta.cos())
}

/// Mass-flux width of the inlet: integral of rho- q- cos(theta-) over the
/// entrance height. Composite Simpson, refined by doubling until the
/// relative change is below 1e-9.
pub fn mass_flux_width(
    model: &GasModel,
    u_minus_bar: &GasState,
    perturb: &InflowPerturbation,
    sigma: f64,
) -> Result<f64> {
    let mut n = 65usize;
    let mut prev = f64::NAN;
    for _ in 0..10 {
        let xs = linspace(0.0, 1.0, n);
        let vals = xs
            .iter()
            .map(|&x| inlet_flux_integrand(model, u_minus_bar, perturb, sigma, x))
            .collect::<Result<Vec<f64>>>()?;
        let cur = integrate_uniform(&vals, 1.0 / (n as f64 - 1.0));
        if prev.is_finite() && ((cur - prev) / cur).abs() <= 1e-9 {
            return Ok(cur);
        }
        prev = cur;
        n = 2 * (n - 1) + 1;
    }
    Ok(prev)
}

/// The inverse of the inlet mass-flux coordinate: a monotone map Y0 with
/// Y0(0) = 0 and Y0(eta0) = 1, tabulated and monotone-cubic interpolated.
#[derive(Debug, Clone)]
pub struct Y0Map {
    pub eta0: f64,
    inverse: MonotoneCubic,
}

impl Y0Map {
    pub fn eval(&self, eta: f64) -> f64 {
        self.inverse.eval(eta).clamp(0.0, 1.0)
    }
}

pub fn y0_map(
    model: &GasModel,
    u_minus_bar: &GasState,
    perturb: &InflowPerturbation,
    sigma: f64,
) -> Result<Y0Map> {
    let n = 2049usize;
    let xs = linspace(0.0, 1.0, n);
    let flux = xs
        .iter()
        .map(|&x| inlet_flux_integrand(model, u_minus_bar, perturb, sigma, x))
        .collect::<Result<Vec<f64>>>()?;
    if flux.iter().any(|&f| f <= 0.0) {
        return Err(Error::Domain("inlet mass flux must be positive across the entrance".into()));
    }
    let eta = cumulative_integral_uniform(&flux, 1.0 / (n as f64 - 1.0));
    let eta0 = eta[n - 1];
    let inverse = MonotoneCubic::new(eta, xs)?;
    Ok(Y0Map { eta0, inverse })
}

/// Admissible receiver-pressure interval.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PeInterval {
    pub lo: f64,
    pub hi: f64,
    /// endpoints of the scaled quantity prefactor * eta0 * Pe
    pub scaled_lo: f64,
    pub scaled_hi: f64,
    pub g_script: f64,
    /// (1 - M+^2) / (rho+^2 q+^3)
    pub prefactor: f64,
    pub eta0: f64,
}

impl PeInterval {
    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// The integral G entering the receiver-pressure interval, with the
/// perturbation profiles composed with the inverse inlet map.
pub fn g_script(bg: &BackgroundShock, perturb: &InflowPerturbation, y0: &Y0Map) -> f64 {
    let n = 2049usize;
    let etas = linspace(0.0, y0.eta0, n);
    let m = bg.mass_flux();
    let vals: Vec<f64> = etas
        .iter()
        .map(|&eta| {
            let x = y0.eval(eta);
            let p0 = perturb.p0.eval(x);
            let q0 = perturb.q0.eval(x);
            let s0 = perturb.s0.eval(x);
            (1.0 - bg.kappa) * p0 - (bg.kappa1 * (p0 + m * q0) + bg.kappa2 * s0) / m
        })
        .collect();
    integrate_uniform(&vals, y0.eta0 / (n as f64 - 1.0))
}

/// Interval of admissible Pe: the scaled quantity must lie in
/// ((1 - kappa) L + G, L + G), nonempty because kappa > 0.
pub fn admissible_pe_interval(
    bg: &BackgroundShock,
    perturb: &InflowPerturbation,
    y0: &Y0Map,
    length_l: f64,
) -> PeInterval {
    let g = g_script(bg, perturb, y0);
    let scaled_lo = (1.0 - bg.kappa) * length_l + g;
    let scaled_hi = length_l + g;
    let prefactor = (1.0 - bg.mach2_plus) / (bg.rho_plus * bg.rho_plus * bg.q_plus.powi(3));
    let denom = prefactor * y0.eta0;
    PeInterval {
        lo: scaled_lo / denom,
        hi: scaled_hi / denom,
        scaled_lo,
        scaled_hi,
        g_script: g,
        prefactor,
        eta0: y0.eta0,
    }
}

/// One compatibility condition check.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompatCheck {
    pub name: String,
    pub value: f64,
    pub tol: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompatReport {
    pub checks: Vec<CompatCheck>,
    pub all_pass: bool,
    /// The corner condition at (0,1) is enforced as theta0(1) = 1 so that
    /// sigma * theta0(1) matches the wall angle sigma; the first-order
    /// display in the source text reads theta0(1) = sigma, which would give
    /// a physical corner angle of sigma^2 and contradict the wall condition.
    pub theta0_corner_convention: String,
}

const COMPAT_TOL: f64 = 1e-6;

/// Check the inlet compatibility conditions at the two entrance corners.
pub fn validate_compatibility(
    model: &GasModel,
    u_minus_bar: &GasState,
    perturb: &InflowPerturbation,
    sigma: f64,
) -> Result<CompatReport> {
    let mut checks: Vec<CompatCheck> = Vec::new();
    let push = |checks: &mut Vec<CompatCheck>, name: &str, value: f64| {
        checks.push(CompatCheck {
            name: name.to_string(),
            value,
            tol: COMPAT_TOL,
            pass: value.abs() <= COMPAT_TOL,
        });
    };

    push(&mut checks, "CC0: theta0(0) = 0", perturb.theta0.eval(0.0));
    if sigma > 0.0 {
        push(
            &mut checks,
            "CC0: theta0(1) = 1 (wall-angle corner)",
            perturb.theta0.eval(1.0) - 1.0,
        );
    }

    push(&mut checks, "CC1: p0'(0) = 0", perturb.p0.deriv(0.0));

    // corner states carry the full perturbed inlet values
    let corner0 = inlet_state(u_minus_bar, perturb, sigma, 0.0);
    let corner1 = inlet_state(u_minus_bar, perturb, sigma, 1.0);
    let d0 = derived(model, &corner0)?;
    let d1 = derived(model, &corner1)?;
    let m2_0 = d0.mach * d0.mach;
    let m2_1 = d1.mach * d1.mach;

    let th0p_1 = perturb.theta0.deriv(1.0);
    let p0p_1 = perturb.p0.deriv(1.0);
    if sigma > 0.0 {
        let cc1b = th0p_1 + (m2_1 - 1.0) / (d1.rho * corner1.q * corner1.q * sigma.tan()) * p0p_1;
        push(
            &mut checks,
            "CC1: theta0'(1) + (M^2-1)/(rho q^2 tan sigma) p0'(1) = 0",
            cc1b,
        );
    } else if p0p_1.abs() > COMPAT_TOL {
        push(&mut checks, "CC1: p0'(1) = 0 (sigma = 0 limit)", p0p_1);
    }

    let th0p_0 = perturb.theta0.deriv(0.0);
    let th0pp_0 = perturb.theta0.second_deriv(0.0);
    let cc2a = (m2_0 - 1.0) * th0pp_0
        + (perturb.s0.deriv(0.0) / (model.gamma * model.c_v)
            - 2.0 / corner0.q * perturb.q0.deriv(0.0))
            * th0p_0;
    push(&mut checks, "CC2: lower-corner second-order condition", cc2a);

    let th0pp_1 = perturb.theta0.second_deriv(1.0);
    let tan_s = sigma.tan();
    let m_hat = m2_1 - 1.0 - model.gamma * m2_1 * m2_1 * sigma.sin() * sigma.sin()
        + m2_1 * (1.0 + m2_1 * m2_1 - 2.0 * m2_1) * sigma.cos() * sigma.cos();
    let cc2b = (m2_1 - 1.0 + tan_s * tan_s) * th0pp_1
        + 2.0 * (m2_1 - 1.0) * tan_s / (d1.rho * corner1.q * corner1.q)
            * perturb.p0.second_deriv(1.0)
        + (m2_1 - 1.0 + tan_s * tan_s) / (m2_1 - 1.0)
            * (perturb.s0.deriv(1.0) / (model.gamma * model.c_v)
                - 2.0 / corner1.q * perturb.q0.deriv(1.0))
            * th0p_1
        + 2.0 * m_hat * sigma.sin() / ((m2_1 - 1.0) * (m2_1 - 1.0) * sigma.cos().powi(3))
            * th0p_1
            * th0p_1;
    push(&mut checks, "CC2: upper-corner second-order condition", cc2b);

    let all_pass = checks.iter().all(|c| c.pass);
    Ok(CompatReport {
        checks,
        all_pass,
        theta0_corner_convention:
            "theta0(1) = 1 enforced so that sigma * theta0(1) equals the wall angle sigma"
                .to_string(),
    })
}

/// Everything the solver needs, built once from the raw inputs. Immutable
/// after construction and safe to share across threads.
#[derive(Debug, Clone)]
pub struct ProblemSetup {
    pub model: GasModel,
    pub nozzle: NozzleSpec,
    pub perturb: InflowPerturbation,
    pub background: BackgroundShock,
    pub eta0: f64,
    pub y0: Y0Map,
    pub pe_interval: PeInterval,
}

impl ProblemSetup {
    pub fn new(
        model: GasModel,
        nozzle: NozzleSpec,
        u_minus_bar: GasState,
        perturb: InflowPerturbation,
    ) -> Result<Self> {
        let background = build_background(&model, &u_minus_bar)?;
        let eta0 = mass_flux_width(&model, &u_minus_bar, &perturb, nozzle.sigma)?;
        let y0 = y0_map(&model, &u_minus_bar, &perturb, nozzle.sigma)?;
        let pe_interval = admissible_pe_interval(&background, &perturb, &y0, nozzle.length_l);
        Ok(ProblemSetup {
            model,
            nozzle,
            perturb,
            background,
            eta0,
            y0,
            pe_interval,
        })
    }

    /// sigma U0(Y0(eta)): the inlet deviation data in the mass-flux coordinate.
    pub fn inlet_delta(&self, eta: f64) -> [f64; 4] {
        let x = self.y0.eval(eta);
        let u0 = self.perturb.eval(x);
        let s = self.nozzle.sigma;
        [s * u0[0], s * u0[1], s * u0[2], s * u0[3]]
    }
}
