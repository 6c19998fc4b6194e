//! Rankine-Hugoniot algebra: normal-shock background, theta-p shock polar,
//! critical points, the H1/H2/H3 maps and residual evaluators for the
//! Lagrangian jump conditions G1..G4.

use crate::error::{Error, Result};
use crate::gas::{derived, DerivedState, GasModel, GasState};
use crate::numerics::{bisect_polished, solve_dense};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    Upper,
    Lower,
}

impl Branch {
    fn sign(self) -> f64 {
        match self {
            Branch::Upper => 1.0,
            Branch::Lower => -1.0,
        }
    }
}

/// A point on the downstream shock polar of a fixed supersonic state.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PolarPoint {
    pub theta: f64,
    pub p: f64,
    pub downstream: GasState,
    pub branch: Branch,
}

/// The named points of the theta-p polar: A (max pressure), B (max
/// deflection, critical pressure) and C (sonic downstream).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PolarCriticalPoints {
    pub p_max: f64,
    pub p_star: f64,
    /// maximum deflection (angle of B relative to the upstream direction)
    pub theta_star: f64,
    pub p_sonic: f64,
}

/// Downstream state of a planar normal shock: solves the three planar jump
/// conditions (mass, momentum, Bernoulli).
///
/// Substituting the mass and momentum lines into the Bernoulli condition
/// leaves a quadratic in specific volume whose identity root is the upstream
/// state; deflating that root gives the compressive one exactly, which stays
/// well conditioned down to vanishing shock strength where a bracketed solve
/// on the raw residual would drown in rounding.
pub fn normal_shock_downstream(model: &GasModel, u_minus: &GasState) -> Result<GasState> {
    let d = derived(model, u_minus)?;
    if d.mach <= 1.0 {
        return Err(Error::NoShock { mach: d.mach });
    }
    let m_flux = d.rho * u_minus.q;
    let momentum = u_minus.p + d.rho * u_minus.q * u_minus.q;
    let gamma = model.gamma;
    let v_minus = 1.0 / d.rho;
    // B(v) = a v^2 + b v with a = -m^2 (gamma+1) / (2 (gamma-1)),
    // b = gamma P / (gamma-1); the roots of B(v) = B- sum to -b/a.
    let v_plus = 2.0 * gamma * momentum / (m_flux * m_flux * (gamma + 1.0)) - v_minus;
    if v_plus <= 0.0 || v_plus > v_minus {
        return Err(Error::NoShock { mach: d.mach });
    }
    let rho_plus = 1.0 / v_plus;
    let q_plus = m_flux * v_plus;
    let p_plus = momentum - m_flux * m_flux * v_plus;
    let s_plus = model.entropy_from_p_rho(p_plus, rho_plus)?;
    let down = GasState::new(p_plus, u_minus.theta, q_plus, s_plus);
    // verify all three jump conditions on the result
    let bern = 0.5 * q_plus * q_plus + model.enthalpy(p_plus, s_plus)?;
    let scale = d.bernoulli_b.abs().max(momentum.abs());
    if ((bern - d.bernoulli_b) / scale).abs() > 1e-10 {
        return Err(Error::RootSolve("normal shock: Bernoulli residual check failed".into()));
    }
    Ok(down)
}

/// Shared polar algebra for one upstream state.
pub(crate) struct PolarContext {
    pub gamma: f64,
    pub p_minus: f64,
    pub m2: f64,
    /// (gamma-1)/(gamma+1)
    pub b: f64,
    /// pressure-ratio excess at the normal-shock point
    pub a_cap: f64,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct WParts {
    pub n: f64,
    pub sqrt_s: f64,
    /// 2 N' S + N S' = 2 sqrt(S) dW/dx
    pub g: f64,
    /// 2 N_m2 S + N S_m2 = 2 sqrt(S) dW/dM^2
    pub g_m: f64,
}

impl PolarContext {
    pub fn new(model: &GasModel, u_minus: &GasState, d: &DerivedState) -> Result<Self> {
        if d.mach <= 1.0 {
            return Err(Error::NoShock { mach: d.mach });
        }
        let gamma = model.gamma;
        let m2 = d.mach * d.mach;
        Ok(PolarContext {
            gamma,
            p_minus: u_minus.p,
            m2,
            b: (gamma - 1.0) / (gamma + 1.0),
            a_cap: 2.0 * gamma / (gamma + 1.0) * (m2 - 1.0),
        })
    }

    pub fn x_max(&self) -> f64 {
        1.0 + self.a_cap
    }

    /// Radicand and its bits at pressure ratio x, with S clamped at the
    /// normal-shock end where rounding may push it slightly negative.
    pub fn w_parts(&self, x: f64) -> Result<WParts> {
        let d1 = self.gamma * self.m2 - (x - 1.0);
        if d1 <= 0.0 {
            return Err(Error::OutOfPolar {
                p: x * self.p_minus,
                lo: self.p_minus,
                hi: self.x_max() * self.p_minus,
            });
        }
        let n = (x - 1.0) / d1;
        let npr = self.gamma * self.m2 / (d1 * d1);
        let denom = x + self.b;
        let mut s = (self.a_cap - (x - 1.0)) / denom;
        if s < 0.0 {
            if s > -1e-12 {
                s = 0.0;
            } else {
                return Err(Error::OutOfPolar {
                    p: x * self.p_minus,
                    lo: self.p_minus,
                    hi: self.x_max() * self.p_minus,
                });
            }
        }
        let spr = -(self.a_cap + 1.0 + self.b) / (denom * denom);
        let n_m2 = -(x - 1.0) * self.gamma / (d1 * d1);
        let s_m2 = 2.0 * self.gamma / ((self.gamma + 1.0) * denom);
        Ok(WParts {
            n,
            sqrt_s: s.sqrt(),
            g: 2.0 * npr * s + n * spr,
            g_m: 2.0 * n_m2 * s + n * s_m2,
        })
    }

    pub fn w(&self, x: f64) -> Result<f64> {
        let parts = self.w_parts(x)?;
        Ok(parts.n * parts.sqrt_s)
    }

    pub fn range_check(&self, p: f64) -> Result<f64> {
        let x = p / self.p_minus;
        let tol = 1e-12 * self.x_max();
        if x < 1.0 - tol || x > self.x_max() + tol {
            return Err(Error::OutOfPolar {
                p,
                lo: self.p_minus,
                hi: self.x_max() * self.p_minus,
            });
        }
        Ok(x.clamp(1.0, self.x_max()))
    }
}

/// Downstream state on the shock polar at prescribed pressure.
///
/// The flow deflection comes from the polar relation, the velocity component
/// along the upstream direction and the density from the jump relations on
/// the front, and entropy from the state equation.
pub fn polar_state_at_pressure(
    model: &GasModel,
    u_minus: &GasState,
    p: f64,
    branch: Branch,
) -> Result<PolarPoint> {
    let d = derived(model, u_minus)?;
    let ctx = PolarContext::new(model, u_minus, &d)?;
    let x = ctx.range_check(p)?;
    let w = ctx.w(x)?;
    let tan_defl = branch.sign() * w;
    let defl = tan_defl.atan();
    let theta = u_minus.theta + defl;
    // velocity component along the upstream flow direction
    let u_along = u_minus.q - (x - 1.0) * u_minus.p / (d.rho * u_minus.q);
    if u_along <= 0.0 {
        return Err(Error::Domain("polar point has non-positive streamwise velocity".into()));
    }
    let q = u_along * (1.0 + tan_defl * tan_defl).sqrt();
    let gamma = model.gamma;
    let rho = d.rho * ((gamma + 1.0) * x + (gamma - 1.0)) / ((gamma - 1.0) * x + (gamma + 1.0));
    let p_exact = x * u_minus.p;
    let s = model.entropy_from_p_rho(p_exact, rho)?;
    Ok(PolarPoint {
        theta,
        p: p_exact,
        downstream: GasState::new(p_exact, theta, q, s),
        branch,
    })
}

/// Locate the polar's critical points: max pressure A, max deflection B
/// (this realizes the critical-pressure map of the upstream state) and the
/// sonic point C.
pub fn polar_critical_points(model: &GasModel, u_minus: &GasState) -> Result<PolarCriticalPoints> {
    let d = derived(model, u_minus)?;
    let ctx = PolarContext::new(model, u_minus, &d)?;
    let p_max = normal_shock_downstream(model, u_minus)?.p;
    // max deflection: sign change of d(W^2)/dx = N (2 N' S + N S')
    let x_lo = 1.0 + 1e-9 * ctx.a_cap;
    let x_hi = ctx.x_max() - 1e-12 * ctx.a_cap;
    let gw = |x: f64| ctx.w_parts(x).map(|p| p.g).unwrap_or(f64::NAN);
    let x_star = bisect_polished(gw, x_lo, x_hi, 1e-14 * ctx.x_max())?;
    let p_star = x_star * u_minus.p;
    let theta_star = ctx.w(x_star)?.atan();
    // sonic point: downstream Mach crosses 1 between x = 1 (M = M- > 1) and
    // the normal-shock point (M < 1)
    let mach_excess = |p: f64| match polar_state_at_pressure(model, u_minus, p, Branch::Upper) {
        Ok(pt) => match derived(model, &pt.downstream) {
            Ok(dd) => dd.mach - 1.0,
            Err(_) => f64::NAN,
        },
        Err(_) => f64::NAN,
    };
    let p_sonic = bisect_polished(
        mach_excess,
        u_minus.p * (1.0 + 1e-12),
        ctx.x_max() * u_minus.p,
        1e-14 * p_max,
    )?;
    Ok(PolarCriticalPoints {
        p_max,
        p_star,
        theta_star,
        p_sonic,
    })
}

/// H1 residual and gradient at a (theta, p) pair for a given upstream state.
#[derive(Debug, Clone, Copy)]
pub struct H1Eval {
    pub value: f64,
    pub d_theta: f64,
    /// diverges at the normal-shock point where the radicand vanishes
    pub d_p: f64,
    /// gradient with respect to the upstream state, ordered (p-, theta-, q-, s-)
    pub d_upstream: [f64; 4],
    /// true when d_p is positive with a safe floor (subsonic arc above the
    /// critical pressure, Upper orientation)
    pub dp_certificate: bool,
}

/// H1(theta, p; U-) = tan(theta - theta-) -+ W(p; U-), zero on the polar.
pub fn h1_residual_and_gradient(
    model: &GasModel,
    theta: f64,
    p: f64,
    u_minus: &GasState,
    branch: Branch,
) -> Result<H1Eval> {
    let d = derived(model, u_minus)?;
    let ctx = PolarContext::new(model, u_minus, &d)?;
    let x = ctx.range_check(p)?;
    let parts = ctx.w_parts(x)?;
    let sgn = branch.sign();
    let defl = theta - u_minus.theta;
    let sec2 = 1.0 / (defl.cos() * defl.cos());
    let value = defl.tan() - sgn * parts.n * parts.sqrt_s;
    // dW/dx and dW/dM^2 share the 1/(2 sqrt S) factor
    let w_x = parts.g / (2.0 * parts.sqrt_s);
    let w_m2 = parts.g_m / (2.0 * parts.sqrt_s);
    let d_p = -sgn * w_x / ctx.p_minus;
    let m2 = ctx.m2;
    let dm2_dp = (1.0 - model.gamma) / model.gamma * m2 / u_minus.p;
    let dm2_dq = 2.0 * m2 / u_minus.q;
    let dm2_ds = -m2 / (model.gamma * model.c_v);
    let d_pm = -sgn * (w_x * (-x / ctx.p_minus) + w_m2 * dm2_dp);
    let d_tm = -sec2;
    let d_qm = -sgn * w_m2 * dm2_dq;
    let d_sm = -sgn * w_m2 * dm2_ds;
    Ok(H1Eval {
        value,
        d_theta: sec2,
        d_p,
        d_upstream: [d_pm, d_tm, d_qm, d_sm],
        dp_certificate: d_p >= 1e-12,
    })
}

/// H1 gradient ratios scaled by 1/dH1/dp, computed without the square root
/// so they stay finite at the normal-shock point of the polar. Used by the
/// shock boundary-condition assembly.
#[derive(Debug, Clone, Copy)]
pub(crate) struct H1Scaled {
    /// (dH1/dtheta) / (dH1/dp)
    pub theta_over_p: f64,
    /// (dH1/dU-) / (dH1/dp), ordered (p-, theta-, q-, s-)
    pub upstream_over_p: [f64; 4],
}

pub(crate) fn h1_scaled_gradients(
    model: &GasModel,
    theta: f64,
    p: f64,
    u_minus: &GasState,
    branch: Branch,
) -> Result<H1Scaled> {
    let d = derived(model, u_minus)?;
    let ctx = PolarContext::new(model, u_minus, &d)?;
    let x = ctx.range_check(p)?;
    let parts = ctx.w_parts(x)?;
    if parts.g == 0.0 {
        return Err(Error::Domain("H1 gradient degenerate: dW/dx vanished".into()));
    }
    let sgn = branch.sign();
    let defl = theta - u_minus.theta;
    let sec2 = 1.0 / (defl.cos() * defl.cos());
    // 1 / dpH1 = -sgn * 2 sqrt(S) p- / g  -> 0 at the normal-shock point
    let inv_dp = -sgn * 2.0 * parts.sqrt_s * ctx.p_minus / parts.g;
    let ratio_m2 = parts.g_m / parts.g; // W_m2 / W_x, finite at S = 0
    let m2 = ctx.m2;
    let dm2_dp = (1.0 - model.gamma) / model.gamma * m2 / u_minus.p;
    let dm2_dq = 2.0 * m2 / u_minus.q;
    let dm2_ds = -m2 / (model.gamma * model.c_v);
    let up_p = -x + ratio_m2 * dm2_dp * ctx.p_minus;
    let up_t = -sec2 * inv_dp;
    let up_q = ratio_m2 * dm2_dq * ctx.p_minus;
    let up_s = ratio_m2 * dm2_ds * ctx.p_minus;
    Ok(H1Scaled {
        theta_over_p: sec2 * inv_dp,
        upstream_over_p: [up_p, up_t, up_q, up_s],
    })
}

/// Literal evaluation of the Lagrangian jump conditions.
///
/// Returns (G1, G2, G3, G4) for the pair of states and front slope.
pub fn rh_residuals(
    model: &GasModel,
    u_plus: &GasState,
    u_minus: &GasState,
    psi_slope: f64,
) -> Result<[f64; 4]> {
    let dp = derived(model, u_plus)?;
    let dm = derived(model, u_minus)?;
    let (up, vp) = (u_plus.u_comp(), u_plus.v_comp());
    let (um, vm) = (u_minus.u_comp(), u_minus.v_comp());
    let jump_p = u_plus.p - u_minus.p;
    let jump_v = vp - vm;
    let g1 = (1.0 / (dp.rho * up) - 1.0 / (dm.rho * um)) * jump_p - (vp / up - vm / um) * jump_v;
    let g2 = ((up + u_plus.p / (dp.rho * up)) - (um + u_minus.p / (dm.rho * um))) * jump_p
        + (u_plus.p * vp / up - u_minus.p * vm / um) * jump_v;
    let g3 = (0.5 * u_plus.q * u_plus.q + dp.enthalpy_i) - (0.5 * u_minus.q * u_minus.q + dm.enthalpy_i);
    let g4 = jump_v - psi_slope * jump_p;
    Ok([g1, g2, g3, g4])
}

/// Subsonic downstream state solving all four Lagrangian jump conditions for
/// a given upstream state and front slope (the H3 map).
///
/// Damped Newton from the planar downstream state; a bracketed solve along
/// the shock polar is the fallback when Newton stalls.
pub fn h3_downstream(model: &GasModel, u_minus: &GasState, psi_slope: f64) -> Result<GasState> {
    let dm = derived(model, u_minus)?;
    if dm.mach <= 1.0 {
        return Err(Error::NoShock { mach: dm.mach });
    }
    let init = normal_shock_downstream(model, u_minus)?;
    if let Some(z) = h3_newton(model, u_minus, psi_slope, &init) {
        return Ok(z);
    }
    h3_polar_fallback(model, u_minus, psi_slope)
}

fn h3_residual_norm(model: &GasModel, z: &GasState, u_minus: &GasState, psi_slope: f64) -> f64 {
    match rh_residuals(model, z, u_minus, psi_slope) {
        Ok(r) => r.iter().map(|v| v.abs()).fold(0.0, f64::max),
        Err(_) => f64::INFINITY,
    }
}

fn h3_newton(
    model: &GasModel,
    u_minus: &GasState,
    psi_slope: f64,
    init: &GasState,
) -> Option<GasState> {
    let mut z = [init.p, init.theta, init.q, init.s];
    let valid = |z: &[f64; 4]| -> bool {
        if z[0] <= 0.0 || z[2] <= 0.0 {
            return false;
        }
        let st = GasState::new(z[0], z[1], z[2], z[3]);
        match derived(model, &st) {
            Ok(d) => d.mach < 1.0,
            Err(_) => false,
        }
    };
    let res = |z: &[f64; 4]| -> Option<[f64; 4]> {
        let st = GasState::new(z[0], z[1], z[2], z[3]);
        rh_residuals(model, &st, u_minus, psi_slope).ok()
    };
    let tol = 1e-13 * (1.0 + u_minus.p + dmax(u_minus.q));
    for _ in 0..60 {
        let f = res(&z)?;
        let fnorm = f.iter().map(|v| v.abs()).fold(0.0, f64::max);
        if fnorm <= tol {
            return Some(GasState::new(z[0], z[1], z[2], z[3]));
        }
        // finite-difference Jacobian
        let mut jac = vec![vec![0.0; 4]; 4];
        for k in 0..4 {
            let h = 1e-7 * (1.0 + z[k].abs());
            let mut zp = z;
            let mut zm = z;
            zp[k] += h;
            zm[k] -= h;
            let fp = res(&zp)?;
            let fm = res(&zm)?;
            for r in 0..4 {
                jac[r][k] = (fp[r] - fm[r]) / (2.0 * h);
            }
        }
        let mut rhs = [-f[0], -f[1], -f[2], -f[3]];
        let step = solve_dense(&mut jac, &mut rhs).ok()?;
        // backtracking with subsonic guard
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let mut zn = z;
            for k in 0..4 {
                zn[k] += lambda * step[k];
            }
            if valid(&zn) {
                let st = GasState::new(zn[0], zn[1], zn[2], zn[3]);
                let fnew = h3_residual_norm(model, &st, u_minus, psi_slope);
                if fnew < fnorm * (1.0 - 0.25 * lambda) || fnew <= tol {
                    z = zn;
                    accepted = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !accepted {
            return None;
        }
    }
    None
}

/// Scalar fallback: with the downstream state constrained to the polar,
/// the slope condition G4 picks the pressure.
fn h3_polar_fallback(model: &GasModel, u_minus: &GasState, psi_slope: f64) -> Result<GasState> {
    let crit = polar_critical_points(model, u_minus)?;
    let v_minus = u_minus.v_comp();
    let p_lo = crit.p_star * (1.0 + 1e-9);
    let p_hi = crit.p_max;
    for branch in [Branch::Upper, Branch::Lower] {
        let g4 = |p: f64| match polar_state_at_pressure(model, u_minus, p, branch) {
            Ok(pt) => (pt.downstream.v_comp() - v_minus) - psi_slope * (p - u_minus.p),
            Err(_) => f64::NAN,
        };
        // scan for a bracket on the subsonic arc
        let n = 256;
        let mut prev_p = p_lo;
        let mut prev_v = g4(prev_p);
        for k in 1..=n {
            let p = p_lo + (p_hi - p_lo) * k as f64 / n as f64;
            let v = g4(p);
            if prev_v.is_finite() && v.is_finite() && prev_v * v <= 0.0 {
                let root = bisect_polished(g4, prev_p, p, 1e-14 * p_hi)?;
                let pt = polar_state_at_pressure(model, u_minus, root, branch)?;
                let d = derived(model, &pt.downstream)?;
                if d.mach < 1.0 {
                    return Ok(pt.downstream);
                }
            }
            prev_p = p;
            prev_v = v;
        }
    }
    Err(Error::NoShock { mach: derived(model, u_minus)?.mach })
}

fn dmax(q: f64) -> f64 {
    q.abs().max(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gas::flow_regime;
    use crate::gas::FlowRegime;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn model() -> GasModel {
        GasModel::new(1.4, 1.0, 1.0).unwrap()
    }

    /// Upstream state with p = rho = 1 and prescribed Mach.
    fn upstream(mach: f64) -> GasState {
        let q = mach * 1.4f64.sqrt();
        GasState::new(1.0, 0.0, q, 0.0)
    }

    /// Classical closed-form normal shock relations, used as the independent
    /// oracle for the nonlinear jump-condition solves.
    fn normal_shock_oracle(gamma: f64, m2: f64) -> (f64, f64, f64) {
        let p_ratio = (2.0 * gamma * m2 - (gamma - 1.0)) / (gamma + 1.0);
        let rho_ratio = (gamma + 1.0) * m2 / ((gamma - 1.0) * m2 + 2.0);
        let m2_down = (1.0 + 0.5 * (gamma - 1.0) * m2) / (gamma * m2 - 0.5 * (gamma - 1.0));
        (p_ratio, rho_ratio, m2_down)
    }

    #[test]
    fn normal_shock_matches_oracle_m2() {
        let m = model();
        let down = normal_shock_downstream(&m, &upstream(2.0)).unwrap();
        let (p_r, rho_r, m2_d) = normal_shock_oracle(1.4, 4.0);
        assert!((p_r - 4.5).abs() < 1e-14);
        assert!((rho_r - 8.0 / 3.0).abs() < 1e-14);
        assert!((m2_d - 1.0 / 3.0).abs() < 1e-14);
        let d = derived(&m, &down).unwrap();
        assert!(((down.p - p_r) / p_r).abs() < 1e-10);
        assert!(((d.rho - rho_r) / rho_r).abs() < 1e-10);
        assert!(((d.mach * d.mach - m2_d) / m2_d).abs() < 1e-10);
        // residuals of all three planar conditions
        let r = rh_residuals(&m, &down, &upstream(2.0), 0.0).unwrap();
        for v in r {
            assert!(v.abs() < 1e-10, "residual {v}");
        }
        // entropy jump from the EOS identity on oracle states
        let s_jump = m.c_v * (p_r / rho_r.powf(m.gamma)).ln();
        assert!(s_jump > 0.0);
        assert!(((down.s - 0.0) - s_jump).abs() < 1e-10);
        assert!((s_jump - 0.1309163).abs() < 1e-6);
    }

    #[test]
    fn vanishing_strength_shock() {
        let m = model();
        let u = upstream(1.0 + 1e-12);
        let down = normal_shock_downstream(&m, &u).unwrap();
        assert!((down.p - u.p).abs() < 1e-9);
        assert!((down.q - u.q).abs() < 1e-9);
    }

    #[test]
    fn subsonic_upstream_is_no_shock() {
        let m = model();
        assert!(matches!(
            normal_shock_downstream(&m, &upstream(0.8)),
            Err(Error::NoShock { .. })
        ));
    }

    #[test]
    fn polar_passes_through_upstream_and_normal_points() {
        let m = model();
        let u = upstream(2.0);
        let at_pm = polar_state_at_pressure(&m, &u, 1.0, Branch::Upper).unwrap();
        assert!((at_pm.theta - u.theta).abs() < 1e-12);
        assert!((at_pm.downstream.q - u.q).abs() < 1e-12);
        assert!((at_pm.downstream.s - u.s).abs() < 1e-12);
        let down = normal_shock_downstream(&m, &u).unwrap();
        let at_a = polar_state_at_pressure(&m, &u, down.p, Branch::Upper).unwrap();
        // the deflection behaves like sqrt(p_max - p) near the top of the
        // polar, so a last-digit pressure error shows up as ~1e-8 in angle
        assert!((at_a.theta - u.theta).abs() < 1e-7);
        assert!(((at_a.downstream.q - down.q) / down.q).abs() < 1e-9);
        assert!((at_a.downstream.s - down.s).abs() < 1e-9);
    }

    #[test]
    fn polar_rejects_out_of_range_pressure() {
        let m = model();
        let u = upstream(2.0);
        assert!(matches!(
            polar_state_at_pressure(&m, &u, 0.5, Branch::Upper),
            Err(Error::OutOfPolar { .. })
        ));
        assert!(matches!(
            polar_state_at_pressure(&m, &u, 5.0, Branch::Upper),
            Err(Error::OutOfPolar { .. })
        ));
    }

    #[test]
    fn critical_points_of_mach_two_polar() {
        let m = model();
        let u = upstream(2.0);
        let crit = polar_critical_points(&m, &u).unwrap();
        assert!((crit.p_max - 4.5).abs() < 1e-10);
        // classical maximum deflection for M = 2, gamma = 1.4
        assert!((crit.theta_star.to_degrees() - 22.97).abs() < 0.05);
        let sonic = polar_state_at_pressure(&m, &u, crit.p_sonic, Branch::Upper).unwrap();
        let d = derived(&m, &sonic.downstream).unwrap();
        assert!((d.mach - 1.0).abs() <= 1e-8);
        assert!(crit.p_sonic < crit.p_max);
        assert!(crit.p_star > u.p && crit.p_star < crit.p_max);
    }

    #[test]
    fn p_star_agrees_with_dense_sampling() {
        let m = model();
        let u = upstream(2.0);
        let crit = polar_critical_points(&m, &u).unwrap();
        // brute force over 10^4 pressures
        let n = 10_000;
        let mut best = (0.0f64, 0.0f64);
        for k in 1..n {
            let p = 1.0 + (crit.p_max - 1.0) * k as f64 / n as f64;
            if let Ok(pt) = polar_state_at_pressure(&m, &u, p, Branch::Upper) {
                let defl = pt.theta - u.theta;
                if defl > best.1 {
                    best = (p, defl);
                }
            }
        }
        let cell = (crit.p_max - 1.0) / n as f64;
        assert!((best.0 - crit.p_star).abs() <= cell * 1.5);
        assert!((best.1 - crit.theta_star).abs() < 1e-6);
    }

    #[test]
    fn h1_zero_on_polar_and_unit_dtheta() {
        let m = model();
        let u = upstream(2.0);
        let crit = polar_critical_points(&m, &u).unwrap();
        for k in 1..20 {
            let p = 1.0 + (crit.p_max - 1.0) * k as f64 / 20.0;
            let pt = polar_state_at_pressure(&m, &u, p, Branch::Upper).unwrap();
            let h = h1_residual_and_gradient(&m, pt.theta, p, &u, Branch::Upper).unwrap();
            assert!(h.value.abs() <= 1e-10, "p = {p}: {}", h.value);
        }
        // d_theta = sec^2(0) = 1 at theta = theta-
        let h = h1_residual_and_gradient(&m, 0.0, 2.0, &u, Branch::Upper).unwrap();
        assert!((h.d_theta - 1.0).abs() < 1e-14);
    }

    #[test]
    fn h1_gradient_matches_finite_differences() {
        let m = model();
        let u = upstream(2.0);
        let crit = polar_critical_points(&m, &u).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            // stay inside the polar so FD stencils do not leave the range
            let p = rng.gen_range(1.05..crit.p_max - 0.05);
            let pt = polar_state_at_pressure(&m, &u, p, Branch::Upper).unwrap();
            let theta = pt.theta + rng.gen_range(-0.05..0.05);
            let h = h1_residual_and_gradient(&m, theta, p, &u, Branch::Upper).unwrap();
            let step = 1e-6;
            let f = |th: f64, pr: f64, um: &GasState| {
                h1_residual_and_gradient(&m, th, pr, um, Branch::Upper)
                    .unwrap()
                    .value
            };
            let fd_t = (f(theta + step, p, &u) - f(theta - step, p, &u)) / (2.0 * step);
            let fd_p = (f(theta, p + step, &u) - f(theta, p - step, &u)) / (2.0 * step);
            assert!((fd_t - h.d_theta).abs() < 1e-6);
            assert!((fd_p - h.d_p).abs() < 1e-6);
            // upstream-state gradient
            let mut fd_u = [0.0; 4];
            for k in 0..4 {
                let mut up = u;
                let mut um = u;
                match k {
                    0 => {
                        up.p += step;
                        um.p -= step;
                    }
                    1 => {
                        up.theta += step;
                        um.theta -= step;
                    }
                    2 => {
                        up.q += step;
                        um.q -= step;
                    }
                    _ => {
                        up.s += step;
                        um.s -= step;
                    }
                }
                fd_u[k] = (f(theta, p, &up) - f(theta, p, &um)) / (2.0 * step);
            }
            for k in 0..4 {
                assert!(
                    (fd_u[k] - h.d_upstream[k]).abs() < 2e-5,
                    "component {k}: fd {} vs {}",
                    fd_u[k],
                    h.d_upstream[k]
                );
            }
        }
    }

    #[test]
    fn h1_scaled_gradients_finite_at_normal_shock_point() {
        let m = model();
        let u = upstream(2.0);
        let down = normal_shock_downstream(&m, &u).unwrap();
        let sc = h1_scaled_gradients(&m, down.theta, down.p, &u, Branch::Upper).unwrap();
        assert!(sc.theta_over_p.is_finite());
        assert!((sc.theta_over_p).abs() < 1e-6); // tends to zero at A
        for v in sc.upstream_over_p {
            assert!(v.is_finite());
        }
        // consistency with raw ratios slightly inside the polar
        let p = down.p * (1.0 - 1e-4);
        let pt = polar_state_at_pressure(&m, &u, p, Branch::Upper).unwrap();
        let raw = h1_residual_and_gradient(&m, pt.theta, p, &u, Branch::Upper).unwrap();
        let sc2 = h1_scaled_gradients(&m, pt.theta, p, &u, Branch::Upper).unwrap();
        assert!((sc2.theta_over_p - raw.d_theta / raw.d_p).abs() < 1e-9);
        for k in 0..4 {
            assert!((sc2.upstream_over_p[k] - raw.d_upstream[k] / raw.d_p).abs() < 1e-7);
        }
    }

    #[test]
    fn h3_at_zero_slope_restores_normal_shock() {
        let m = model();
        let u = upstream(2.0);
        let via_h3 = h3_downstream(&m, &u, 0.0).unwrap();
        let via_ns = normal_shock_downstream(&m, &u).unwrap();
        assert!(((via_h3.p - via_ns.p) / via_ns.p).abs() < 1e-10);
        assert!(((via_h3.q - via_ns.q) / via_ns.q).abs() < 1e-10);
        assert!((via_h3.theta - 0.0).abs() < 1e-12);
        assert!((via_h3.s - via_ns.s).abs() < 1e-10);
        assert_eq!(flow_regime(&m, &via_h3, 0.0).unwrap(), FlowRegime::Subsonic);
    }

    #[test]
    fn h3_satisfies_g4_for_prescribed_slope() {
        let m = model();
        let u = upstream(2.0);
        for slope in [0.003, -0.002, 0.01] {
            let down = h3_downstream(&m, &u, slope).unwrap();
            let r = rh_residuals(&m, &down, &u, slope).unwrap();
            for v in r {
                assert!(v.abs() < 1e-10, "slope {slope}: residual {v}");
            }
        }
    }

    #[test]
    fn h3_with_perturbed_upstream() {
        let m = model();
        let u = GasState::new(1.01, 0.004, 2.0 * 1.4f64.sqrt() * 0.995, 0.002);
        let down = h3_downstream(&m, &u, 0.002).unwrap();
        let r = rh_residuals(&m, &down, &u, 0.002).unwrap();
        for v in r {
            assert!(v.abs() < 1e-10);
        }
        let d = derived(&m, &down).unwrap();
        assert!(d.mach < 1.0);
    }

    #[test]
    fn rh_residuals_vanish_for_equal_states() {
        let m = model();
        let u = GasState::new(1.3, 0.1, 2.4, 0.05);
        let r = rh_residuals(&m, &u, &u, 0.7).unwrap();
        assert_eq!(r, [0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn g2_sign_probe_under_pressure_perturbation() {
        let m = model();
        let u = upstream(2.0);
        let down = normal_shock_downstream(&m, &u).unwrap();
        let eval = |dp: f64| {
            let mut z = down;
            z.p += dp;
            rh_residuals(&m, &z, &u, 0.0).unwrap()[1]
        };
        let base = eval(0.0);
        let up1 = eval(1e-3);
        let up2 = eval(2e-3);
        assert!(base.abs() < 1e-10);
        // monotone move away from zero in one direction
        assert!(up1.abs() > 1e-6);
        assert!((up2 - up1).signum() == (up1 - base).signum());
    }

    proptest! {
        #[test]
        fn polar_branches_mirror_about_upstream_angle(
            mach in 1.3f64..3.5,
            frac in 0.02f64..0.98,
            theta_m in -0.3f64..0.3,
        ) {
            let m = model();
            let q = mach * 1.4f64.sqrt();
            let u = GasState::new(1.0, theta_m, q, 0.0);
            let crit_pmax = 1.0 + 2.0 * 1.4 / 2.4 * (mach * mach - 1.0);
            let p = 1.0 + (crit_pmax - 1.0) * frac;
            let hi = polar_state_at_pressure(&m, &u, p, Branch::Upper).unwrap();
            let lo = polar_state_at_pressure(&m, &u, p, Branch::Lower).unwrap();
            prop_assert!((hi.theta + lo.theta - 2.0 * theta_m).abs() <= 1e-12);
        }

        #[test]
        fn polar_preserves_bernoulli_and_grows_entropy(
            mach in 1.3f64..3.5,
            frac in 0.05f64..1.0,
        ) {
            let m = model();
            let u = GasState::new(1.0, 0.05, mach * 1.4f64.sqrt(), 0.0);
            let du = derived(&m, &u).unwrap();
            let crit_pmax = 1.0 + 2.0 * 1.4 / 2.4 * (mach * mach - 1.0);
            let p = 1.0 + (crit_pmax - 1.0) * frac;
            let pt = polar_state_at_pressure(&m, &u, p, Branch::Upper).unwrap();
            let dd = derived(&m, &pt.downstream).unwrap();
            prop_assert!(((dd.bernoulli_b - du.bernoulli_b) / du.bernoulli_b).abs() <= 1e-10);
            prop_assert!(pt.downstream.s > u.s);
        }
    }
}
