//! Polytropic gas thermodynamics: state representation, equation of state,
//! derived quantities.
//!
//! The state is U = (p, theta, q, s) with p = A(s) rho^gamma and
//! A(s) = R exp(s / c_v). A(s) is always recomputed from s so pressure,
//! density and entropy cannot drift apart.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GasModel {
    /// adiabatic exponent, > 1
    pub gamma: f64,
    /// specific heat at constant volume, > 0
    pub c_v: f64,
    /// entropy-scale constant in A(s) = R exp(s/c_v), > 0
    pub r_const: f64,
}

impl GasModel {
    pub fn new(gamma: f64, c_v: f64, r_const: f64) -> Result<Self> {
        if !(gamma > 1.0) || !(c_v > 0.0) || !(r_const > 0.0) {
            return Err(Error::Domain(format!(
                "gas model requires gamma > 1, c_v > 0, R > 0 (got {gamma}, {c_v}, {r_const})"
            )));
        }
        Ok(GasModel { gamma, c_v, r_const })
    }

    /// A(s) = R exp(s/c_v)
    pub fn entropy_function(&self, s: f64) -> f64 {
        self.r_const * (s / self.c_v).exp()
    }

    /// Entropy from (p, rho) via p = A(s) rho^gamma.
    pub fn entropy_from_p_rho(&self, p: f64, rho: f64) -> Result<f64> {
        if !(p > 0.0) || !(rho > 0.0) {
            return Err(Error::Domain(format!(
                "entropy_from_p_rho needs p > 0, rho > 0 (got {p}, {rho})"
            )));
        }
        Ok(self.c_v * (p / (self.r_const * rho.powf(self.gamma))).ln())
    }

    /// rho = (p / A(s))^(1/gamma)
    pub fn density(&self, p: f64, s: f64) -> Result<f64> {
        if !(p > 0.0) {
            return Err(Error::Domain(format!("density needs p > 0 (got {p})")));
        }
        Ok((p / self.entropy_function(s)).powf(1.0 / self.gamma))
    }

    /// Specific enthalpy i = c^2/(gamma - 1) = gamma p / ((gamma - 1) rho).
    pub fn enthalpy(&self, p: f64, s: f64) -> Result<f64> {
        let rho = self.density(p, s)?;
        Ok(self.gamma * p / ((self.gamma - 1.0) * rho))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GasState {
    /// pressure, > 0
    pub p: f64,
    /// flow angle, radians
    pub theta: f64,
    /// speed, > 0
    pub q: f64,
    /// entropy
    pub s: f64,
}

impl GasState {
    pub fn new(p: f64, theta: f64, q: f64, s: f64) -> Self {
        GasState { p, theta, q, s }
    }

    pub fn u_comp(&self) -> f64 {
        self.q * self.theta.cos()
    }

    pub fn v_comp(&self) -> f64 {
        self.q * self.theta.sin()
    }
}

/// Quantities derived from a state through the equation of state.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DerivedState {
    pub rho: f64,
    pub c: f64,
    pub mach: f64,
    pub enthalpy_i: f64,
    pub bernoulli_b: f64,
    pub u_comp: f64,
    pub v_comp: f64,
}

/// Evaluate all derived quantities of a state.
pub fn derived(model: &GasModel, u: &GasState) -> Result<DerivedState> {
    if !(u.p > 0.0) || !(u.q > 0.0) {
        return Err(Error::Domain(format!(
            "state requires p > 0 and q > 0 (got p = {}, q = {})",
            u.p, u.q
        )));
    }
    let rho = model.density(u.p, u.s)?;
    let c = (model.gamma * u.p / rho).sqrt();
    let mach = u.q / c;
    let enthalpy_i = c * c / (model.gamma - 1.0);
    let bernoulli_b = 0.5 * u.q * u.q + enthalpy_i;
    Ok(DerivedState {
        rho,
        c,
        mach,
        enthalpy_i,
        bernoulli_b,
        u_comp: u.u_comp(),
        v_comp: u.v_comp(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FlowRegime {
    Supersonic,
    Subsonic,
    Marginal,
}

/// Classify a state with a safety margin eps on M^2 around 1.
///
/// The exact boundaries M^2 = 1 -+ eps classify as Marginal.
pub fn flow_regime(model: &GasModel, u: &GasState, eps: f64) -> Result<FlowRegime> {
    if eps < 0.0 {
        return Err(Error::Domain(format!("flow_regime needs eps >= 0 (got {eps})")));
    }
    let d = derived(model, u)?;
    let m2 = d.mach * d.mach;
    Ok(if m2 < 1.0 - eps {
        FlowRegime::Subsonic
    } else if m2 > 1.0 + eps {
        FlowRegime::Supersonic
    } else {
        FlowRegime::Marginal
    })
}
