//! Shock-front location and the outer free-boundary loop: the monotone
//! solvability function picks the wall intersection, the jump conditions
//! give the downstream trace, the subsonic sub-problem is solved on the
//! straightened domain, and the slope condition updates the front. A
//! multi-seed harness certifies that the limit does not depend on the
//! starting guess.

use crate::elliptic::{
    check_hypotheses, exit_oblique_coeffs, recover_p, recover_q_s, shock_oblique_scaled,
    solve_theta, theta_coefficients, FieldSet, FixedDomainGrid, HypothesisReport, ThetaProblem,
    TransformFields,
};
use crate::error::{Error, Result};
use crate::gas::GasState;
use crate::march::{solve_linearized, MarchGrid, SupersonicField};
use crate::numerics::{bisect_polished, integrate_uniform, linspace};
use crate::setup::ProblemSetup;
use crate::shock::{h3_downstream, polar_critical_points, rh_residuals};
use serde::Serialize;

/// Free-boundary iterate: wall-intersection offset and sampled slope.
#[derive(Debug, Clone, Serialize)]
pub struct ShockFront {
    pub delta_xi: f64,
    /// psi'(eta_j) on the eta grid
    pub slope: Vec<f64>,
    /// psi(eta_j), anchored by psi(eta0) = xi0 + delta_xi
    pub position: Vec<f64>,
}

impl ShockFront {
    /// Reconstruct psi from the slope samples, anchored at the upper wall.
    pub fn from_slope(xi0: f64, delta_xi: f64, slope: Vec<f64>, deta: f64) -> Self {
        let ny = slope.len() - 1;
        let xi_star = xi0 + delta_xi;
        let mut position = vec![0.0; ny + 1];
        position[ny] = xi_star;
        for j in (0..ny).rev() {
            position[j] = position[j + 1] - 0.5 * deta * (slope[j] + slope[j + 1]);
        }
        ShockFront { delta_xi, slope, position }
    }

    pub fn max_slope(&self) -> f64 {
        self.slope.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// Feedback measured on a subsonic iterate: the forcing-term double
/// integral (telescoped to trace integrals) together with the offset the
/// iterate was computed at, so the geometric part can be split off.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SubsonicFeedback {
    /// measured forcing integral of the iterate
    pub measured: f64,
    /// front offset the iterate was computed at
    pub delta_xi: f64,
}

/// Everything needed to evaluate the reduced solvability function.
pub struct SolvabilityContext<'a> {
    pub setup: &'a ProblemSetup,
    /// inflow integral of the reduced form (zero for unperturbed inflow)
    pub inflow_integral: f64,
    pub pe: f64,
    /// supersonic correction integrals; None switches corrections off
    pub supersonic: Option<&'a SupersonicField>,
    /// frozen feedback from the previous subsonic iterate
    pub subsonic_feedback: Option<SubsonicFeedback>,
}

/// The inflow integral entering the reduced solvability function:
/// (1/m) int [ (kappa1 + (1-kappa)(M-^2-1)/(rho- q-^2)) p0
///             + kappa1 m q0 + kappa2 s0 ] (Y0(eta)) d eta.
pub fn f_tilde_inflow_integral(setup: &ProblemSetup) -> f64 {
    let bg = &setup.background;
    let m = bg.mass_flux();
    let coef_p = bg.kappa1
        + (1.0 - bg.kappa) * (bg.mach2_minus - 1.0) / (bg.rho_minus * bg.q_minus * bg.q_minus);
    let n = 2049usize;
    let etas = linspace(0.0, setup.eta0, n);
    let vals: Vec<f64> = etas
        .iter()
        .map(|&eta| {
            let x = setup.y0.eval(eta);
            let p0 = setup.perturb.p0.eval(x);
            let q0 = setup.perturb.q0.eval(x);
            let s0 = setup.perturb.s0.eval(x);
            coef_p * p0 + bg.kappa1 * m * q0 + bg.kappa2 * s0
        })
        .collect();
    integrate_uniform(&vals, setup.eta0 / (n as f64 - 1.0)) / m
}

impl<'a> SolvabilityContext<'a> {
    pub fn new(setup: &'a ProblemSetup, pe: f64) -> Self {
        SolvabilityContext {
            setup,
            inflow_integral: f_tilde_inflow_integral(setup),
            pe,
            supersonic: None,
            subsonic_feedback: None,
        }
    }

    pub fn with_corrections(
        mut self,
        supersonic: Option<&'a SupersonicField>,
        subsonic_feedback: Option<SubsonicFeedback>,
    ) -> Self {
        self.supersonic = supersonic;
        self.subsonic_feedback = subsonic_feedback;
        self
    }

    /// (1/sigma) * pf * [int dp_pred(xi0; dxi) - sigma Pe eta0]: the
    /// trace-pressure integral predicted from the upstream side through the
    /// linearized jump relation and the supersonic integral identity.
    fn predicted_trace_term(&self, delta_xi: f64) -> f64 {
        let setup = self.setup;
        let bg = &setup.background;
        let (l, xi0) = (setup.nozzle.length_l, setup.nozzle.xi0);
        let pf = (1.0 - bg.mach2_plus) / (bg.rho_plus * bg.rho_plus * bg.q_plus.powi(3));
        let mut value = (1.0 - bg.kappa) * (xi0 + delta_xi)
            - self.inflow_integral
            - pf * setup.eta0 * self.pe;
        let sigma = setup.nozzle.sigma;
        if sigma > 0.0 {
            if let Some(field) = self.supersonic {
                let xi_star = (xi0 + delta_xi).clamp(0.0, l);
                let if2 = field.i_f2_at(xi_star);
                let if3_eta: Vec<f64> =
                    (0..=field.ny).map(|j| field.i_f3_at(xi_star, j)).collect();
                let if3 = integrate_uniform(&if3_eta, field.deta);
                value -= ((1.0 - bg.kappa) * if2 + bg.kappa1 / bg.mass_flux() * if3) / sigma;
            }
        }
        value
    }
}

/// Reduced solvability function:
/// (1-kappa)(xi0+dxi) + (L-xi0-dxi) - inflow integral - pf eta0 Pe
/// plus the quadratic-correction integrals when supplied. Strictly
/// decreasing with slope -kappa + O(sigma).
///
/// The measured subsonic feedback carries a geometric part proportional to
/// dxi/(L-xi0-dxi) times the trace-pressure deficit; that part is resolved
/// analytically here (it is what makes the reduced function's slope -kappa
/// rather than an O(1) lag), and only the genuinely quadratic remainder is
/// frozen between location steps.
pub fn solvability_f_tilde(ctx: &SolvabilityContext, delta_xi: f64) -> Result<f64> {
    let setup = ctx.setup;
    let (l, xi0) = (setup.nozzle.length_l, setup.nozzle.xi0);
    let tol = 1e-12 * l;
    if delta_xi < -xi0 - tol || delta_xi > l - xi0 + tol {
        return Err(Error::Domain(format!(
            "delta_xi = {delta_xi} outside the open interval ({}, {})",
            -xi0,
            l - xi0
        )));
    }
    let mut value = ctx.predicted_trace_term(delta_xi) + (l - xi0 - delta_xi);
    let sigma = setup.nozzle.sigma;
    if sigma > 0.0 {
        if let Some(fb) = ctx.subsonic_feedback {
            let geom = fb.delta_xi / (l - xi0 - fb.delta_xi);
            let remainder = fb.measured - geom * sigma * ctx.predicted_trace_term(fb.delta_xi);
            value += (l - xi0 - delta_xi) / (l - xi0) * remainder / sigma;
        }
    }
    Ok(value)
}

/// Sampled profile of the solvability function over the admissible offsets.
pub fn f_tilde_profile(ctx: &SolvabilityContext, n: usize) -> Result<Vec<(f64, f64)>> {
    let (l, xi0) = (ctx.setup.nozzle.length_l, ctx.setup.nozzle.xi0);
    let inset = 1e-9 * l;
    let xs = linspace(-xi0 + inset, l - xi0 - inset, n);
    xs.into_iter()
        .map(|x| solvability_f_tilde(ctx, x).map(|v| (x, v)))
        .collect()
}

fn count_sign_changes(profile: &[(f64, f64)]) -> usize {
    profile
        .windows(2)
        .filter(|w| w[0].1 * w[1].1 < 0.0 || (w[0].1 != 0.0 && w[1].1 == 0.0))
        .count()
}

/// Locate the unique root of the solvability function by a coarse scan and
/// bracketed bisection, polished to machine precision.
pub fn locate_shock(ctx: &SolvabilityContext) -> Result<f64> {
    let profile = f_tilde_profile(ctx, 65)?;
    let changes = count_sign_changes(&profile);
    if changes == 0 {
        return Err(Error::NoRoot {
            f_lo: profile.first().unwrap().1,
            f_hi: profile.last().unwrap().1,
        });
    }
    if changes > 1 {
        return Err(Error::MultipleRoots { count: changes });
    }
    let w = profile
        .windows(2)
        .find(|w| w[0].1 * w[1].1 <= 0.0)
        .expect("sign change found above");
    let l = ctx.setup.nozzle.length_l;
    bisect_polished(
        |x| solvability_f_tilde(ctx, x).unwrap_or(f64::NAN),
        w[0].0,
        w[1].0,
        1e-13 * l,
    )
}

/// Pointwise slope from the jump condition [v] = psi' [p].
pub fn update_front_slope(
    u_plus_trace: &[GasState],
    u_minus_trace: &[GasState],
    p_jump_floor: f64,
) -> Result<Vec<f64>> {
    u_plus_trace
        .iter()
        .zip(u_minus_trace.iter())
        .map(|(up, um)| {
            let jump_p = up.p - um.p;
            if jump_p.abs() < p_jump_floor {
                return Err(Error::DegenerateShock {
                    jump: jump_p.abs(),
                    floor: p_jump_floor,
                });
            }
            Ok((up.v_comp() - um.v_comp()) / jump_p)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub delta_xi: f64,
    pub change: f64,
    pub contraction_ratio: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveDiagnostics {
    /// residual of the located root under the final feedback
    pub f_tilde_root_residual: f64,
    /// measured remainder of the linearized trace relation (quadratic scale)
    pub gammasp_remainder: f64,
    /// supersonic integral-identity residual at the front
    pub pl0_residual: f64,
    /// worst jump-condition residual of the trace states
    pub trace_rh_residual: f64,
    /// worst jump-condition residual of the recovered field trace
    pub field_trace_rh_mismatch: f64,
    /// cross-relation audit of the pressure recovery
    pub pressure_audit: f64,
    /// converged feedback integral
    pub subsonic_feedback: f64,
    /// supersonic Picard passes and final pass change
    pub picard_passes: usize,
    pub picard_change: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveNorms {
    pub sup_theta: f64,
    pub sup_p_deviation: f64,
    pub sup_q_deviation: f64,
    pub sup_s_deviation: f64,
    pub sup_psi_slope: f64,
}

/// Converged solution bundle.
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub grid: FixedDomainGrid,
    pub fields: FieldSet,
    pub front: ShockFront,
    pub iterations: Vec<IterationRecord>,
    pub contraction_ratios: Vec<f64>,
    pub hypothesis: HypothesisReport,
    pub converged: bool,
    pub final_change: f64,
    pub norms: SolveNorms,
    pub diagnostics: SolveDiagnostics,
    pub trace_states_rh: Vec<GasState>,
    pub trace_states_minus: Vec<GasState>,
    pub f_tilde_profile: Vec<(f64, f64)>,
}

impl SolveReport {
    /// Geometric mean of the last (up to three) contraction ratios measured
    /// while the change was safely above the convergence floor.
    pub fn tail_contraction_ratio(&self, tol: f64) -> Option<f64> {
        let usable: Vec<f64> = self
            .iterations
            .iter()
            .skip(1)
            .filter(|r| r.change >= 100.0 * tol)
            .filter_map(|r| r.contraction_ratio)
            .collect();
        if usable.is_empty() {
            return None;
        }
        let tail = &usable[usable.len().saturating_sub(3)..];
        let prod: f64 = tail.iter().product();
        Some(prod.powf(1.0 / tail.len() as f64))
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SolverGrid {
    pub nx: usize,
    pub ny: usize,
    pub march_nx: Option<usize>,
}

#[derive(Debug, Clone, Copy)]
pub struct SeedInit {
    /// constant initial slope psi'
    pub slope_amplitude: f64,
    /// initial offset (informational; the first location step replaces it)
    pub delta_xi0: f64,
}

impl Default for SeedInit {
    fn default() -> Self {
        SeedInit { slope_amplitude: 0.0, delta_xi0: 0.0 }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    pub tol_fixed_point: f64,
    pub tol_linear: f64,
    pub max_iters: usize,
    pub eps_hyp: f64,
    /// slope cap as a multiple of sigma
    pub slope_cap_factor: f64,
    /// degenerate-shock floor as a fraction of the background jump
    pub p_jump_floor_frac: f64,
    /// diagnostic mode: pin delta_xi instead of locating it
    pub freeze_delta_xi: Option<f64>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol_fixed_point: 1e-10,
            tol_linear: 1e-10,
            max_iters: 50,
            eps_hyp: 0.1,
            slope_cap_factor: 10.0,
            p_jump_floor_frac: 0.5,
            freeze_delta_xi: None,
        }
    }
}

/// One full free-boundary solve.
///
/// Iterates supersonic march (once; it does not depend on the front),
/// front location, trace construction through the jump conditions, the
/// subsonic solve with recovery, and the slope update, until the combined
/// sup-norm change of fields and slope falls below tolerance.
pub fn fixed_point_solve(
    setup: &ProblemSetup,
    pe: f64,
    grid_spec: SolverGrid,
    init: SeedInit,
    opts: &SolverOptions,
) -> Result<SolveReport> {
    let bg = &setup.background;
    let sigma = setup.nozzle.sigma;
    let (l, xi0) = (setup.nozzle.length_l, setup.nozzle.xi0);
    let grid = FixedDomainGrid::new(grid_spec.nx, grid_spec.ny, xi0, l, setup.eta0)?;

    if sigma == 0.0 {
        // degenerate planar family: the admissible interval collapses and
        // only the unperturbed receiver pressure selects a member (at xi0)
        if pe != 0.0 {
            return Err(Error::Domain(
                "sigma = 0 admits only Pe = 0 (planar family member at xi0)".into(),
            ));
        }
        return planar_report(setup, grid, opts);
    }

    let march = solve_linearized(
        setup,
        MarchGrid { ny: grid_spec.ny, nx_override: grid_spec.march_nx },
    )?;
    let inflow_integral = f_tilde_inflow_integral(setup);
    let pf = (1.0 - bg.mach2_plus) / (bg.rho_plus * bg.rho_plus * bg.q_plus.powi(3));
    let ny = grid.ny;
    let deta = grid.deta();
    let slope_cap = opts.slope_cap_factor * sigma;
    let p_jump_floor = opts.p_jump_floor_frac * bg.p_jump.abs();

    let mut fields = FieldSet::planar(&grid, &bg.u_plus_bar);
    let mut slope = vec![init.slope_amplitude; ny + 1];
    let mut delta_xi = init.delta_xi0;
    let mut feedback: Option<SubsonicFeedback> = None;
    let mut iterations: Vec<IterationRecord> = Vec::new();
    let mut ratios: Vec<f64> = Vec::new();
    let mut prev_change: Option<f64> = None;
    let mut converged = false;
    let mut last: Option<(Vec<GasState>, Vec<GasState>, f64, HypothesisReport)> = None;

    for iter in 0..opts.max_iters {
        // (1)-(4) front location and subsonic solve, iterated to mutual
        // consistency within this sweep: the feedback integral responds to
        // the located offset at order one, so leaving it lagged across
        // sweeps would contaminate the outer contraction with a
        // sigma-independent component. Slope and coefficients stay frozen
        // here, so the outer loop keeps the order-sigma coupling only.
        let mut inner_delta_xi = delta_xi;
        let mut inner: Option<(Vec<GasState>, Vec<GasState>, Vec<f64>, (FieldSet, f64))> = None;
        for inner_pass in 0..8 {
            let ctx = SolvabilityContext {
                setup,
                inflow_integral,
                pe,
                supersonic: Some(&march),
                subsonic_feedback: feedback,
            };
            let new_delta_xi = match opts.freeze_delta_xi {
                Some(v) => v,
                None => locate_shock(&ctx)?,
            };
            let front = ShockFront::from_slope(xi0, new_delta_xi, slope.clone(), deta);
            if front.position.iter().any(|&x| x <= 0.0 || x >= l) {
                return Err(Error::Hypothesis {
                    what: format!(
                        "front leaves the nozzle: psi range [{:.4}, {:.4}]",
                        front.position.iter().cloned().fold(f64::INFINITY, f64::min),
                        front.position.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
                    ),
                    location: None,
                });
            }

            // traces through the jump conditions
            let u_minus_trace: Vec<GasState> = (0..=ny)
                .map(|j| march.state_at(bg, front.position[j], j))
                .collect();
            let mut u_rh_trace = Vec::with_capacity(ny + 1);
            let mut p_star_trace = Vec::with_capacity(ny + 1);
            for j in 0..=ny {
                u_rh_trace.push(h3_downstream(&setup.model, &u_minus_trace[j], front.slope[j])?);
                p_star_trace.push(polar_critical_points(&setup.model, &u_minus_trace[j])?.p_star);
            }
            for j in 0..=ny {
                if u_rh_trace[j].p <= p_star_trace[j] + opts.eps_hyp {
                    return Err(Error::Hypothesis {
                        what: format!(
                            "trace pressure {:.6} at eta index {j} not above critical {:.6} + eps",
                            u_rh_trace[j].p, p_star_trace[j]
                        ),
                        location: Some((0, j)),
                    });
                }
            }

            // subsonic solve on the straightened domain
            let transform = TransformFields::from_front(&grid, &front.position, &front.slope)?;
            let new_fields = subsonic_step(
                setup,
                &grid,
                &fields,
                &transform,
                &front,
                &u_minus_trace,
                &u_rh_trace,
                pe,
                opts,
            )?;

            // refresh the feedback from the fresh fields
            let dp_trace: Vec<f64> = (0..=ny)
                .map(|j| new_fields.0.p[grid.idx(0, j)] - bg.u_plus_bar.p)
                .collect();
            let trace_integral = integrate_uniform(&dp_trace, deta);
            feedback = Some(SubsonicFeedback {
                measured: pf * (sigma * pe * setup.eta0 - trace_integral) - sigma * (l - xi0),
                delta_xi: new_delta_xi,
            });

            let settled = (new_delta_xi - inner_delta_xi).abs() <= 1e-12 * l && inner_pass > 0;
            inner_delta_xi = new_delta_xi;
            inner = Some((u_minus_trace, u_rh_trace, p_star_trace, new_fields));
            if settled || opts.freeze_delta_xi.is_some() {
                break;
            }
        }
        let (u_minus_trace, u_rh_trace, p_star_trace, new_fields) =
            inner.expect("inner sweep ran at least once");
        let new_delta_xi = inner_delta_xi;

        // (5) slope update from the recovered field trace
        let field_trace: Vec<GasState> =
            (0..=ny).map(|j| new_fields.0.state_at(grid.idx(0, j))).collect();
        let new_slope = update_front_slope(&field_trace, &u_minus_trace, p_jump_floor)?;
        let new_slope_max = new_slope.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if new_slope_max > slope_cap {
            return Err(Error::Hypothesis {
                what: format!("front slope {new_slope_max:.3e} exceeds cap {slope_cap:.3e}"),
                location: None,
            });
        }

        // (6) convergence bookkeeping
        let field_change = new_fields.0.max_abs_diff(&fields, &grid);
        let slope_change = slope
            .iter()
            .zip(new_slope.iter())
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        let dxi_change = (new_delta_xi - delta_xi).abs();
        let change = field_change + slope_change;
        let ratio = prev_change.map(|p| if p > 0.0 { change / p } else { 0.0 });
        if let Some(r) = ratio {
            ratios.push(r);
        }
        iterations.push(IterationRecord {
            iteration: iter,
            delta_xi: new_delta_xi,
            change: change + dxi_change,
            contraction_ratio: ratio,
        });
        prev_change = Some(change);

        // hypothesis gate on every iterate
        let trace_p: Vec<f64> = u_rh_trace.iter().map(|u| u.p).collect();
        let hyp = check_hypotheses(
            &setup.model,
            &grid,
            &new_fields.0,
            &trace_p,
            &p_star_trace,
            opts.eps_hyp,
        )?;
        if !hyp.all_ok {
            return Err(Error::Hypothesis {
                what: format!("uniqueness-regime hypotheses failed: {hyp:?}"),
                location: Some(hyp.worst_m2_location),
            });
        }

        fields = new_fields.0;
        slope = new_slope;
        delta_xi = new_delta_xi;
        last = Some((u_minus_trace, u_rh_trace, new_fields.1, hyp));

        if change + dxi_change <= opts.tol_fixed_point {
            converged = true;
            break;
        }
    }

    if !converged {
        return Err(Error::NonConvergence {
            iters: opts.max_iters,
            last_change: iterations.last().map_or(f64::NAN, |r| r.change),
        });
    }

    let (u_minus_trace, u_rh_trace, p_audit, hyp) = last.expect("converged loop stored state");
    let front = ShockFront::from_slope(xi0, delta_xi, slope.clone(), deta);
    let ctx = SolvabilityContext {
        setup,
        inflow_integral,
        pe,
        supersonic: Some(&march),
        subsonic_feedback: feedback,
    };
    let report = finalize_report(
        setup, grid, fields, front, iterations, ratios, hyp, &march, &ctx, &u_minus_trace,
        &u_rh_trace, p_audit, pe, opts,
    )?;
    Ok(report)
}

/// One subsonic sub-step: coefficients from the previous iterate, oblique
/// rows from the traces, then recovery of p, q, s. Returns the new fields
/// and the pressure audit.
#[allow(clippy::too_many_arguments)]
fn subsonic_step(
    setup: &ProblemSetup,
    grid: &FixedDomainGrid,
    prev: &FieldSet,
    transform: &TransformFields,
    front: &ShockFront,
    u_minus_trace: &[GasState],
    u_rh_trace: &[GasState],
    pe: f64,
    opts: &SolverOptions,
) -> Result<(FieldSet, f64)> {
    let model = &setup.model;
    let bg = &setup.background;
    let sigma = setup.nozzle.sigma;
    let (nx, ny) = (grid.nx, grid.ny);
    let n = grid.n_nodes();

    // transformed coefficient fields from the previous iterate
    let mut a11 = vec![0.0; n];
    let mut a12 = vec![0.0; n];
    let mut a22 = vec![0.0; n];
    for i in 0..=nx {
        for j in 0..=ny {
            let k = grid.idx(i, j);
            let c = theta_coefficients(model, &prev.state_at(k)).map_err(|e| match e {
                Error::Hypothesis { what, .. } => Error::Hypothesis {
                    what,
                    location: Some((i, j)),
                },
                other => other,
            })?;
            let jj = transform.j_of_eta[j];
            let ww = transform.w[k];
            a11[k] = jj * c.a11 + 2.0 * ww * c.a12 + ww * ww / jj * c.a22;
            a12[k] = c.a12 + ww / jj * c.a22;
            a22[k] = c.a22 / jj;
        }
    }

    let wall_bottom = vec![0.0; nx + 1];
    let wall_top = vec![sigma; nx + 1];
    let mut exit_cxi = vec![0.0; ny + 1];
    let mut exit_ceta = vec![0.0; ny + 1];
    let exit_rhs = vec![0.0; ny + 1];
    for j in 1..ny {
        let (ae, be) = exit_oblique_coeffs(model, &prev.state_at(grid.idx(nx, j)))?;
        exit_cxi[j] = -ae * transform.j_of_eta[j];
        exit_ceta[j] = be;
    }

    // tangential derivative of the upstream trace along the front
    let deta = grid.deta();
    let mut shock_cxi = vec![0.0; ny + 1];
    let mut shock_ceta = vec![0.0; ny + 1];
    let mut shock_rhs = vec![0.0; ny + 1];
    for j in 1..ny {
        let comp = |u: &GasState| [u.p, u.theta, u.q, u.s];
        let um = comp(&u_minus_trace[j - 1]);
        let up = comp(&u_minus_trace[j + 1]);
        let w = (1.0 + front.slope[j] * front.slope[j]).sqrt();
        let mut dtau = [0.0; 4];
        for c in 0..4 {
            dtau[c] = -(up[c] - um[c]) / (2.0 * deta) / w;
        }
        let (a_hat, b_hat, f_hat) =
            shock_oblique_scaled(model, &u_rh_trace[j], &u_minus_trace[j], front.slope[j], dtau)?;
        let psi_p = front.slope[j];
        shock_cxi[j] = transform.j_of_eta[j] * a_hat * (1.0 + psi_p * psi_p);
        shock_ceta[j] = -psi_p * a_hat - b_hat;
        shock_rhs[j] = w * f_hat;
    }

    let problem = ThetaProblem {
        grid,
        a11: &a11,
        a12: &a12,
        a22: &a22,
        source: None,
        wall_bottom: &wall_bottom,
        wall_top: &wall_top,
        exit_cxi: &exit_cxi,
        exit_ceta: &exit_ceta,
        exit_rhs: &exit_rhs,
        shock_cxi: &shock_cxi,
        shock_ceta: &shock_ceta,
        shock_rhs: &shock_rhs,
        tol_linear: opts.tol_linear,
    };
    let theta = solve_theta(&problem)?.theta;

    let exit_values = vec![bg.u_plus_bar.p + sigma * pe; ny + 1];
    let (p, audit) = recover_p(model, grid, &theta, prev, transform, &exit_values)?;
    let (q, s) = recover_q_s(model, grid, &p, u_rh_trace)?;
    Ok((FieldSet { p, theta, q, s }, audit))
}

#[allow(clippy::too_many_arguments)]
fn finalize_report(
    setup: &ProblemSetup,
    grid: FixedDomainGrid,
    fields: FieldSet,
    front: ShockFront,
    iterations: Vec<IterationRecord>,
    ratios: Vec<f64>,
    hypothesis: HypothesisReport,
    march: &SupersonicField,
    ctx: &SolvabilityContext,
    u_minus_trace: &[GasState],
    u_rh_trace: &[GasState],
    p_audit: f64,
    _pe: f64,
    _opts: &SolverOptions,
) -> Result<SolveReport> {
    let bg = &setup.background;
    let sigma = setup.nozzle.sigma;
    let ny = grid.ny;
    let final_change = iterations.last().map_or(0.0, |r| r.change);
    let f_tilde_root_residual = solvability_f_tilde(ctx, front.delta_xi)?.abs();
    let traces = march.trace_and_integrals(setup.nozzle.xi0 + front.delta_xi);

    // linearized trace relation, used as a diagnostic cross-check of the
    // full nonlinear trace: quadratic-size remainder reported, not assumed
    let mut gammasp_remainder = 0.0f64;
    let m = bg.mass_flux();
    for j in 0..=ny {
        let eta = grid.eta(j);
        let x = setup.y0.eval(eta);
        let lhs = (bg.mach2_plus - 1.0) / (bg.rho_plus * bg.q_plus * bg.q_plus)
            * (fields.p[grid.idx(0, j)] - bg.u_plus_bar.p);
        let rhs = (bg.mach2_minus - 1.0) / (bg.rho_minus * bg.q_minus * bg.q_minus)
            * (1.0 - bg.kappa)
            * traces.delta_p[j]
            + bg.kappa1
                * sigma
                * (setup.perturb.p0.eval(x) + m * setup.perturb.q0.eval(x))
            + bg.kappa2 * sigma * setup.perturb.s0.eval(x)
            + bg.kappa1 * traces.i_f3[j];
        gammasp_remainder = gammasp_remainder.max((lhs - rhs).abs());
    }

    let mut trace_rh = 0.0f64;
    let mut field_rh = 0.0f64;
    for j in 0..=ny {
        let r = rh_residuals(&setup.model, &u_rh_trace[j], &u_minus_trace[j], front.slope[j])?;
        trace_rh = trace_rh.max(r.iter().fold(0.0f64, |a, v| a.max(v.abs())));
        let field_state = fields.state_at(grid.idx(0, j));
        let rf = rh_residuals(&setup.model, &field_state, &u_minus_trace[j], front.slope[j])?;
        field_rh = field_rh.max(rf.iter().fold(0.0f64, |a, v| a.max(v.abs())));
    }

    let dev = |f: &[f64], base: f64| -> Vec<f64> { f.iter().map(|v| v - base).collect() };
    let norms = SolveNorms {
        sup_theta: grid.sup_excluding_corners(&fields.theta),
        sup_p_deviation: grid.sup_excluding_corners(&dev(&fields.p, bg.u_plus_bar.p)),
        sup_q_deviation: grid.sup_excluding_corners(&dev(&fields.q, bg.u_plus_bar.q)),
        sup_s_deviation: grid.sup_excluding_corners(&dev(&fields.s, bg.u_plus_bar.s)),
        sup_psi_slope: front.max_slope(),
    };
    let profile = f_tilde_profile(ctx, 256)?;
    Ok(SolveReport {
        grid,
        fields,
        front,
        contraction_ratios: ratios,
        hypothesis,
        converged: true,
        final_change,
        norms,
        diagnostics: SolveDiagnostics {
            f_tilde_root_residual,
            gammasp_remainder,
            pl0_residual: traces.pl0_residual,
            trace_rh_residual: trace_rh,
            field_trace_rh_mismatch: field_rh,
            pressure_audit: p_audit,
            subsonic_feedback: ctx.subsonic_feedback.map_or(0.0, |f| f.measured),
            picard_passes: march.picard_passes,
            picard_change: march.last_pass_change,
        },
        trace_states_rh: u_rh_trace.to_vec(),
        trace_states_minus: u_minus_trace.to_vec(),
        f_tilde_profile: profile,
        iterations,
    })
}

/// Degenerate planar solution at sigma = 0: one iteration, front at xi0.
fn planar_report(
    setup: &ProblemSetup,
    grid: FixedDomainGrid,
    opts: &SolverOptions,
) -> Result<SolveReport> {
    let bg = &setup.background;
    let fields = FieldSet::planar(&grid, &bg.u_plus_bar);
    let ny = grid.ny;
    let front = ShockFront::from_slope(grid.xi0, 0.0, vec![0.0; ny + 1], grid.deta());
    let u_minus_trace = vec![bg.u_minus_bar; ny + 1];
    let u_rh_trace = vec![bg.u_plus_bar; ny + 1];
    let crit = polar_critical_points(&setup.model, &bg.u_minus_bar)?;
    let trace_p = vec![bg.u_plus_bar.p; ny + 1];
    let p_star = vec![crit.p_star; ny + 1];
    let hypothesis = check_hypotheses(&setup.model, &grid, &fields, &trace_p, &p_star, opts.eps_hyp)?;
    if !hypothesis.all_ok {
        return Err(Error::Hypothesis {
            what: "planar solution violates the uniqueness-regime hypotheses".into(),
            location: None,
        });
    }
    let mut trace_rh = 0.0f64;
    for j in 0..=ny {
        let r = rh_residuals(&setup.model, &u_rh_trace[j], &u_minus_trace[j], 0.0)?;
        trace_rh = trace_rh.max(r.iter().fold(0.0f64, |a, v| a.max(v.abs())));
    }
    Ok(SolveReport {
        grid,
        fields,
        front,
        iterations: vec![IterationRecord {
            iteration: 0,
            delta_xi: 0.0,
            change: 0.0,
            contraction_ratio: None,
        }],
        contraction_ratios: Vec::new(),
        hypothesis,
        converged: true,
        final_change: 0.0,
        norms: SolveNorms {
            sup_theta: 0.0,
            sup_p_deviation: 0.0,
            sup_q_deviation: 0.0,
            sup_s_deviation: 0.0,
            sup_psi_slope: 0.0,
        },
        diagnostics: SolveDiagnostics {
            f_tilde_root_residual: 0.0,
            gammasp_remainder: 0.0,
            pl0_residual: 0.0,
            trace_rh_residual: trace_rh,
            field_trace_rh_mismatch: trace_rh,
            pressure_audit: 0.0,
            subsonic_feedback: 0.0,
            picard_passes: 0,
            picard_change: 0.0,
        },
        trace_states_rh: u_rh_trace,
        trace_states_minus: u_minus_trace,
        f_tilde_profile: Vec::new(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    Unique,
    MultipleRoots,
    SeedDisagreement,
    RegimeBreach,
}

#[derive(Debug, Clone, Serialize)]
pub struct SeedOutcome {
    pub seed: usize,
    pub slope_amplitude: f64,
    pub delta_xi0: f64,
    pub status: String,
    pub delta_xi: Option<f64>,
    pub iterations: Option<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepVerdict {
    pub verdict: Verdict,
    pub seeds: Vec<SeedOutcome>,
    pub scan_sign_changes: usize,
    pub max_delta_xi_spread: f64,
    pub max_field_spread: f64,
    pub tolerance_delta_xi: f64,
    pub tolerance_fields: f64,
}

/// Deterministic seed schedule: constant slopes 0, +-sigma, +-2 sigma and
/// offsets spread across the admissible interval.
pub fn seed_schedule(setup: &ProblemSetup, n_seeds: usize) -> Vec<SeedInit> {
    let sigma = setup.nozzle.sigma;
    let amps = [0.0, 1.0, -1.0, 2.0, -2.0];
    let (l, xi0) = (setup.nozzle.length_l, setup.nozzle.xi0);
    (0..n_seeds)
        .map(|k| {
            let frac = 0.2 + 0.6 * k as f64 / (n_seeds.max(2) - 1) as f64;
            SeedInit {
                slope_amplitude: amps[k % amps.len()] * sigma,
                delta_xi0: -xi0 + frac * l,
            }
        })
        .collect()
}

fn thread_cap(n_seeds: usize) -> usize {
    let hw = std::thread::available_parallelism().map_or(1, |v| v.get());
    let cap = std::env::var("NOZZLE_SHOCK_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&v| v >= 1)
        .unwrap_or(hw);
    cap.min(n_seeds).max(1)
}

/// Run the fixed-point solve from several seeds and certify that they all
/// land on the same front and fields; also scan the solvability function
/// for a single sign change.
pub fn uniqueness_sweep(
    setup: &ProblemSetup,
    pe: f64,
    grid_spec: SolverGrid,
    n_seeds: usize,
    opts: &SolverOptions,
) -> Result<SweepVerdict> {
    if n_seeds < 5 {
        return Err(Error::Config(format!("uniqueness sweep needs at least 5 seeds (got {n_seeds})")));
    }
    let seeds = seed_schedule(setup, n_seeds);
    uniqueness_sweep_with(setup, pe, grid_spec, &seeds, None, opts)
}

/// Diagnostic sweep with per-seed frozen front offsets (no relocation);
/// distinct offsets converge to distinct solutions and the harness must
/// report the disagreement.
pub fn uniqueness_sweep_frozen(
    setup: &ProblemSetup,
    pe: f64,
    grid_spec: SolverGrid,
    frozen: &[f64],
    opts: &SolverOptions,
) -> Result<SweepVerdict> {
    let seeds: Vec<SeedInit> = frozen
        .iter()
        .map(|&d| SeedInit { slope_amplitude: 0.0, delta_xi0: d })
        .collect();
    uniqueness_sweep_with(setup, pe, grid_spec, &seeds, Some(frozen), opts)
}

fn uniqueness_sweep_with(
    setup: &ProblemSetup,
    pe: f64,
    grid_spec: SolverGrid,
    seeds: &[SeedInit],
    frozen: Option<&[f64]>,
    opts: &SolverOptions,
) -> Result<SweepVerdict> {
    let n_seeds = seeds.len();
    let mut results: Vec<Option<Result<SolveReport>>> = (0..n_seeds).map(|_| None).collect();
    let cap = thread_cap(n_seeds);
    for chunk in (0..n_seeds).collect::<Vec<_>>().chunks(cap) {
        std::thread::scope(|scope| {
            let mut handles = Vec::new();
            for &k in chunk {
                let seed = seeds[k];
                let mut seed_opts = *opts;
                if let Some(fr) = frozen {
                    seed_opts.freeze_delta_xi = Some(fr[k]);
                }
                handles.push((
                    k,
                    scope.spawn(move || fixed_point_solve(setup, pe, grid_spec, seed, &seed_opts)),
                ));
            }
            for (k, h) in handles {
                results[k] = Some(h.join().expect("seed thread panicked"));
            }
        });
    }

    let mut outcomes = Vec::with_capacity(n_seeds);
    let mut reports: Vec<Option<SolveReport>> = Vec::with_capacity(n_seeds);
    let mut any_regime = false;
    for (k, res) in results.into_iter().enumerate() {
        match res.expect("seed result present") {
            Ok(rep) => {
                outcomes.push(SeedOutcome {
                    seed: k,
                    slope_amplitude: seeds[k].slope_amplitude,
                    delta_xi0: seeds[k].delta_xi0,
                    status: "converged".into(),
                    delta_xi: Some(rep.front.delta_xi),
                    iterations: Some(rep.iterations.len()),
                });
                reports.push(Some(rep));
            }
            Err(e) => {
                any_regime = true;
                outcomes.push(SeedOutcome {
                    seed: k,
                    slope_amplitude: seeds[k].slope_amplitude,
                    delta_xi0: seeds[k].delta_xi0,
                    status: format!("error: {e}"),
                    delta_xi: None,
                    iterations: None,
                });
                reports.push(None);
            }
        }
    }

    let l = setup.nozzle.length_l;
    let tol_dxi = 1e-6 * l;
    let tol_fields = 10.0 * opts.tol_fixed_point;

    if any_regime {
        return Ok(SweepVerdict {
            verdict: Verdict::RegimeBreach,
            seeds: outcomes,
            scan_sign_changes: 0,
            max_delta_xi_spread: f64::NAN,
            max_field_spread: f64::NAN,
            tolerance_delta_xi: tol_dxi,
            tolerance_fields: tol_fields,
        });
    }

    let reps: Vec<&SolveReport> = reports.iter().map(|r| r.as_ref().unwrap()).collect();
    let dxis: Vec<f64> = reps.iter().map(|r| r.front.delta_xi).collect();
    let dxi_spread = dxis.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - dxis.iter().cloned().fold(f64::INFINITY, f64::min);
    let base = reps[0];
    let mut field_spread = 0.0f64;
    for r in reps.iter().skip(1) {
        field_spread = field_spread.max(r.fields.max_abs_diff(&base.fields, &base.grid));
    }

    // independent scan of the solvability function with converged feedback
    let march = solve_linearized(
        setup,
        MarchGrid { ny: grid_spec.ny, nx_override: grid_spec.march_nx },
    )?;
    let ctx = SolvabilityContext {
        setup,
        inflow_integral: f_tilde_inflow_integral(setup),
        pe,
        supersonic: Some(&march),
        subsonic_feedback: Some(SubsonicFeedback {
            measured: base.diagnostics.subsonic_feedback,
            delta_xi: base.front.delta_xi,
        }),
    };
    let profile = f_tilde_profile(&ctx, 256)?;
    let changes = count_sign_changes(&profile);

    let verdict = if changes != 1 {
        Verdict::MultipleRoots
    } else if dxi_spread > tol_dxi || field_spread > tol_fields {
        Verdict::SeedDisagreement
    } else {
        Verdict::Unique
    };
    Ok(SweepVerdict {
        verdict,
        seeds: outcomes,
        scan_sign_changes: changes,
        max_delta_xi_spread: dxi_spread,
        max_field_spread: field_spread,
        tolerance_delta_xi: tol_dxi,
        tolerance_fields: tol_fields,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gas::GasModel;
    use crate::setup::{InflowPerturbation, NozzleSpec, ProblemSetup};
    use crate::shock::h3_downstream;

    fn model() -> GasModel {
        GasModel::new(1.4, 1.0, 1.0).unwrap()
    }

    fn upstream_m2() -> GasState {
        GasState::new(1.0, 0.0, 2.0 * 1.4f64.sqrt(), 0.0)
    }

    fn setup_zero_inflow(sigma: f64) -> ProblemSetup {
        let nozzle = NozzleSpec::new(1.0, sigma, 0.5, 0.05, false).unwrap();
        ProblemSetup::new(model(), nozzle, upstream_m2(), InflowPerturbation::zero()).unwrap()
    }

    /// closed-form root of the affine solvability function
    fn closed_form_root(setup: &ProblemSetup, pe: f64) -> f64 {
        let bg = &setup.background;
        let pf = (1.0 - bg.mach2_plus) / (bg.rho_plus * bg.rho_plus * bg.q_plus.powi(3));
        let (l, xi0) = (setup.nozzle.length_l, setup.nozzle.xi0);
        (l - bg.kappa * xi0 - pf * setup.eta0 * pe) / bg.kappa
    }

    #[test]
    fn f_tilde_affine_matches_closed_form() {
        let setup = setup_zero_inflow(0.01);
        let pe = setup.pe_interval.mid();
        let ctx = SolvabilityContext::new(&setup, pe);
        let root = locate_shock(&ctx).unwrap();
        let expect = closed_form_root(&setup, pe);
        assert!((root - expect).abs() < 1e-10, "{root} vs {expect}");
        // affine slope is exactly -kappa
        let h = 0.01;
        let fp = solvability_f_tilde(&ctx, root + h).unwrap();
        let fm = solvability_f_tilde(&ctx, root - h).unwrap();
        assert!(((fp - fm) / (2.0 * h) + setup.background.kappa).abs() < 1e-12);
        // mid-interval Pe puts the root at the center for xi0 = L/2
        assert!(root.abs() < 1e-10);
    }

    #[test]
    fn out_of_interval_pe_has_no_root() {
        let setup = setup_zero_inflow(0.01);
        let iv = setup.pe_interval;
        let pe = iv.hi + 0.1 * iv.width();
        let ctx = SolvabilityContext::new(&setup, pe);
        assert!(matches!(locate_shock(&ctx), Err(Error::NoRoot { .. })));
        let pe2 = iv.lo - 0.1 * iv.width();
        let ctx2 = SolvabilityContext::new(&setup, pe2);
        assert!(matches!(locate_shock(&ctx2), Err(Error::NoRoot { .. })));
    }

    #[test]
    fn inset_pe_has_interior_root() {
        let setup = setup_zero_inflow(0.01);
        let iv = setup.pe_interval;
        for pe in [iv.lo + 0.05 * iv.width(), iv.hi - 0.05 * iv.width()] {
            let ctx = SolvabilityContext::new(&setup, pe);
            let root = locate_shock(&ctx).unwrap();
            assert!(root > -setup.nozzle.xi0 && root < 1.0 - setup.nozzle.xi0);
        }
    }

    #[test]
    fn delta_xi_domain_is_enforced() {
        let setup = setup_zero_inflow(0.01);
        let ctx = SolvabilityContext::new(&setup, 0.0);
        assert!(solvability_f_tilde(&ctx, -0.6).is_err());
        assert!(solvability_f_tilde(&ctx, 0.6).is_err());
    }

    #[test]
    fn slope_update_round_trips_h3() {
        let m = model();
        let um = upstream_m2();
        let slope = 0.003;
        let down = h3_downstream(&m, &um, slope).unwrap();
        let got = update_front_slope(&[down], &[um], 1.75).unwrap();
        assert!((got[0] - slope).abs() < 1e-12);
        // planar traces give zero slope
        let planar = crate::shock::normal_shock_downstream(&m, &um).unwrap();
        let z = update_front_slope(&[planar], &[um], 1.75).unwrap();
        assert_eq!(z[0], 0.0);
    }

    #[test]
    fn slope_update_rejects_degenerate_jump() {
        let m = model();
        let um = upstream_m2();
        let mut weak = um;
        weak.p += 0.1;
        let r = update_front_slope(&[weak], &[um], 1.75);
        assert!(matches!(r, Err(Error::DegenerateShock { .. })));
    }

    #[test]
    fn front_reconstruction_is_anchored() {
        let slope = vec![0.01; 9];
        let front = ShockFront::from_slope(0.5, 0.1, slope, 0.25);
        assert_eq!(front.position[8], 0.6);
        // psi(0) = xi_star - integral of slope over (0, eta0)
        assert!((front.position[0] - (0.6 - 0.01 * 2.0)).abs() < 1e-14);
    }

    #[test]
    fn sigma_zero_accepts_only_zero_pe() {
        let setup = setup_zero_inflow(0.0);
        let grid = SolverGrid { nx: 16, ny: 12, march_nx: None };
        let r = fixed_point_solve(&setup, 0.1, grid, SeedInit::default(), &SolverOptions::default());
        assert!(matches!(r, Err(Error::Domain(_))));
        let rep =
            fixed_point_solve(&setup, 0.0, grid, SeedInit::default(), &SolverOptions::default())
                .unwrap();
        assert!(rep.converged);
        assert_eq!(rep.iterations.len(), 1);
        assert_eq!(rep.front.delta_xi, 0.0);
        assert_eq!(rep.norms.sup_theta, 0.0);
    }

    #[test]
    fn wall_driven_solve_converges_to_closed_form_root() {
        let setup = setup_zero_inflow(0.01);
        let pe = setup.pe_interval.mid();
        let grid = SolverGrid { nx: 24, ny: 16, march_nx: None };
        let rep = fixed_point_solve(&setup, pe, grid, SeedInit::default(), &SolverOptions::default())
            .unwrap();
        assert!(rep.converged);
        // the closed-form root is exact for zero inflow up to the quadratic
        // feedback corrections
        let expect = closed_form_root(&setup, pe);
        assert!(
            (rep.front.delta_xi - expect).abs() < 0.05,
            "delta_xi {} vs affine root {expect}",
            rep.front.delta_xi
        );
        // wall-driven angle bounded by sigma
        assert!(rep.norms.sup_theta <= 0.01 + 1e-8);
        assert!(rep.norms.sup_theta > 0.001);
        assert!(rep.norms.sup_psi_slope < 0.1);
        // jump conditions on the trace at solver tolerance
        assert!(rep.diagnostics.trace_rh_residual < 1e-9);
        assert!(rep.hypothesis.all_ok);
    }

    #[test]
    fn frozen_delta_xi_is_respected() {
        let setup = setup_zero_inflow(0.01);
        let pe = setup.pe_interval.mid();
        let grid = SolverGrid { nx: 16, ny: 12, march_nx: None };
        let opts = SolverOptions {
            freeze_delta_xi: Some(0.07),
            ..SolverOptions::default()
        };
        let rep = fixed_point_solve(&setup, pe, grid, SeedInit::default(), &opts).unwrap();
        assert_eq!(rep.front.delta_xi, 0.07);
    }

    #[test]
    fn frozen_sweep_reports_seed_disagreement() {
        let setup = setup_zero_inflow(0.01);
        let pe = setup.pe_interval.mid();
        let grid = SolverGrid { nx: 16, ny: 12, march_nx: None };
        let v = uniqueness_sweep_frozen(
            &setup,
            pe,
            grid,
            &[0.03, 0.08],
            &SolverOptions::default(),
        )
        .unwrap();
        assert_eq!(v.verdict, Verdict::SeedDisagreement);
        assert!(v.max_delta_xi_spread > 1e-3);
    }
}
