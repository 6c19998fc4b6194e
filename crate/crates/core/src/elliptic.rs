//! Fixed-domain subsonic sub-problem behind the shock front: the
//! divergence-form elliptic equation for the flow angle with oblique
//! conditions on the exit and the straightened shock boundary, followed by
//! recovery of pressure (integrated from the exit), entropy and speed
//! (transported from the shock trace along streamlines).

use crate::error::{Error, Result};
use crate::gas::{derived, GasModel, GasState};
use crate::linalg::BandMatrix;
use crate::shock::{h1_residual_and_gradient, h1_scaled_gradients, Branch};
use serde::{Deserialize, Serialize};

/// Uniform rectangle (xi0, L) x (0, eta0) in the straightened coordinates.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FixedDomainGrid {
    /// cell counts (nodes are nx+1 by ny+1)
    pub nx: usize,
    pub ny: usize,
    pub xi0: f64,
    pub length_l: f64,
    pub eta0: f64,
}

impl FixedDomainGrid {
    pub fn new(nx: usize, ny: usize, xi0: f64, length_l: f64, eta0: f64) -> Result<Self> {
        if nx < 8 || ny < 8 {
            return Err(Error::Config(format!("grid must be at least 8x8 cells (got {nx}x{ny})")));
        }
        if !(xi0 > 0.0 && xi0 < length_l && eta0 > 0.0) {
            return Err(Error::Config("grid extents must satisfy 0 < xi0 < L, eta0 > 0".into()));
        }
        Ok(FixedDomainGrid { nx, ny, xi0, length_l, eta0 })
    }

    #[inline]
    pub fn dxi(&self) -> f64 {
        (self.length_l - self.xi0) / self.nx as f64
    }

    #[inline]
    pub fn deta(&self) -> f64 {
        self.eta0 / self.ny as f64
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        i * (self.ny + 1) + j
    }

    pub fn n_nodes(&self) -> usize {
        (self.nx + 1) * (self.ny + 1)
    }

    pub fn xi(&self, i: usize) -> f64 {
        self.xi0 + i as f64 * self.dxi()
    }

    pub fn eta(&self, j: usize) -> f64 {
        j as f64 * self.deta()
    }

    /// Sup over nodes outside a one-cell collar around each corner.
    pub fn sup_excluding_corners(&self, values: &[f64]) -> f64 {
        let mut m = 0.0f64;
        for i in 0..=self.nx {
            for j in 0..=self.ny {
                let near_xi = i <= 1 || i + 1 >= self.nx;
                let near_eta = j <= 1 || j + 1 >= self.ny;
                if near_xi && near_eta {
                    continue;
                }
                m = m.max(values[self.idx(i, j)].abs());
            }
        }
        m
    }
}

/// Nodal (p, theta, q, s) fields on a fixed-domain grid.
#[derive(Debug, Clone)]
pub struct FieldSet {
    pub p: Vec<f64>,
    pub theta: Vec<f64>,
    pub q: Vec<f64>,
    pub s: Vec<f64>,
}

impl FieldSet {
    pub fn planar(grid: &FixedDomainGrid, state: &GasState) -> Self {
        let n = grid.n_nodes();
        FieldSet {
            p: vec![state.p; n],
            theta: vec![state.theta; n],
            q: vec![state.q; n],
            s: vec![state.s; n],
        }
    }

    pub fn state_at(&self, k: usize) -> GasState {
        GasState::new(self.p[k], self.theta[k], self.q[k], self.s[k])
    }

    pub fn max_abs_diff(&self, other: &FieldSet, grid: &FixedDomainGrid) -> f64 {
        let d = |a: &[f64], b: &[f64]| -> Vec<f64> {
            a.iter().zip(b).map(|(x, y)| x - y).collect()
        };
        grid.sup_excluding_corners(&d(&self.p, &other.p))
            .max(grid.sup_excluding_corners(&d(&self.theta, &other.theta)))
            .max(grid.sup_excluding_corners(&d(&self.q, &other.q)))
            .max(grid.sup_excluding_corners(&d(&self.s, &other.s)))
    }
}

/// Coefficients of the divergence-form angle equation at one state.
#[derive(Debug, Clone, Copy)]
pub struct ThetaCoeffs {
    pub a11: f64,
    pub a12: f64,
    pub a22: f64,
    /// smallest eigenvalue of the symmetric coefficient matrix
    pub lambda_lower: f64,
}

/// Literal coefficient evaluation; fails on ellipticity loss (M >= 1 or
/// cos(theta) <= 0).
pub fn theta_coefficients(model: &GasModel, u: &GasState) -> Result<ThetaCoeffs> {
    let d = derived(model, u)?;
    let m2 = d.mach * d.mach;
    let cos_t = u.theta.cos();
    if m2 >= 1.0 || cos_t <= 0.0 {
        return Err(Error::Hypothesis {
            what: format!("ellipticity lost: M^2 = {m2:.6}, cos(theta) = {cos_t:.6}"),
            location: None,
        });
    }
    let sin_t = u.theta.sin();
    let denom = (1.0 - m2) * cos_t;
    let a11 = u.q * (1.0 - m2 * cos_t * cos_t) / denom;
    let a12 = -d.rho * u.q * u.q * sin_t / denom;
    let a22 = d.rho * d.rho * u.q.powi(3) / denom;
    let tr = a11 + a22;
    let det = a11 * a22 - a12 * a12;
    let lambda_lower = 0.5 * (tr - (tr * tr - 4.0 * det).max(0.0).sqrt());
    Ok(ThetaCoeffs { a11, a12, a22, lambda_lower })
}

/// Exit oblique pair (A_e, B_e) in A_e d/dn + B_e d/dtau = 0 with inner
/// normal (-1, 0) and tangent (0, 1).
pub fn exit_oblique_coeffs(model: &GasModel, u: &GasState) -> Result<(f64, f64)> {
    let c = theta_coefficients(model, u)?;
    Ok((c.a11, -c.a12))
}

/// Shock oblique triple (A_s, B_s, f_s) in A_s d/dn + B_s d/dtau = f_s on
/// the front, with n = (1, -psi')/sqrt(1+psi'^2), tau = (-psi', -1)/sqrt(..).
///
/// `du_minus_dtau` is the tangential derivative of the upstream trace,
/// ordered (p-, theta-, q-, s-), obtained by differencing the supersonic
/// trace along the front. The A_s > 0 certificate is checked against the
/// hypothesis p+ > p* + eps on the trace.
pub fn shock_oblique_coeffs(
    model: &GasModel,
    u_plus: &GasState,
    u_minus: &GasState,
    psi_slope: f64,
    p_star: f64,
    eps_p: f64,
    du_minus_dtau: [f64; 4],
) -> Result<(f64, f64, f64)> {
    if u_plus.p <= p_star + eps_p {
        return Err(Error::Hypothesis {
            what: format!(
                "shock-trace pressure {:.6} not above critical pressure {:.6} + eps {:.3}",
                u_plus.p, p_star, eps_p
            ),
            location: None,
        });
    }
    let branch = if u_plus.theta >= u_minus.theta {
        Branch::Upper
    } else {
        Branch::Lower
    };
    let h1 = h1_residual_and_gradient(model, u_plus.theta, u_plus.p, u_minus, branch)?;
    let d = derived(model, u_plus)?;
    let m2 = d.mach * d.mach;
    let (sin_t, cos_t) = u_plus.theta.sin_cos();
    let rho_q = d.rho * u_plus.q;
    let den = (1.0 + psi_slope * psi_slope) * (1.0 - m2) * cos_t;
    let a_s = u_plus.q
        * ((psi_slope * rho_q + sin_t).powi(2) + (1.0 - m2) * cos_t * cos_t)
        * h1.d_p
        / den;
    let b_s = h1.d_theta
        + u_plus.q
            * (rho_q * (1.0 - psi_slope * psi_slope) * sin_t
                + psi_slope * (rho_q * rho_q - 1.0 + m2 * cos_t * cos_t))
            * h1.d_p
            / den;
    let f_s = -(h1.d_upstream[0] * du_minus_dtau[0]
        + h1.d_upstream[1] * du_minus_dtau[1]
        + h1.d_upstream[2] * du_minus_dtau[2]
        + h1.d_upstream[3] * du_minus_dtau[3]);
    Ok((a_s, b_s, f_s))
}

/// The same triple scaled by 1/dH1/dp, finite through the polar top where
/// the raw gradient diverges. Used by the boundary-row assembly.
pub(crate) fn shock_oblique_scaled(
    model: &GasModel,
    u_plus: &GasState,
    u_minus: &GasState,
    psi_slope: f64,
    du_minus_dtau: [f64; 4],
) -> Result<(f64, f64, f64)> {
    let branch = if u_plus.theta >= u_minus.theta {
        Branch::Upper
    } else {
        Branch::Lower
    };
    let sc = h1_scaled_gradients(model, u_plus.theta, u_plus.p, u_minus, branch)?;
    let d = derived(model, u_plus)?;
    let m2 = d.mach * d.mach;
    let (sin_t, cos_t) = u_plus.theta.sin_cos();
    let rho_q = d.rho * u_plus.q;
    let den = (1.0 + psi_slope * psi_slope) * (1.0 - m2) * cos_t;
    let a_hat = u_plus.q * ((psi_slope * rho_q + sin_t).powi(2) + (1.0 - m2) * cos_t * cos_t) / den;
    let b_hat = sc.theta_over_p
        + u_plus.q
            * (rho_q * (1.0 - psi_slope * psi_slope) * sin_t
                + psi_slope * (rho_q * rho_q - 1.0 + m2 * cos_t * cos_t))
            / den;
    let f_hat = -(sc.upstream_over_p[0] * du_minus_dtau[0]
        + sc.upstream_over_p[1] * du_minus_dtau[1]
        + sc.upstream_over_p[2] * du_minus_dtau[2]
        + sc.upstream_over_p[3] * du_minus_dtau[3]);
    if !(a_hat > 0.0) {
        return Err(Error::Hypothesis {
            what: format!("shock boundary condition lost obliqueness (A_s scale {a_hat:.3e})"),
            location: None,
        });
    }
    Ok((a_hat, b_hat, f_hat))
}

/// Fully assembled discrete problem for the angle equation
/// div(A grad theta) = source with Dirichlet walls and oblique rows in the
/// straightened coordinates (coefficients already carry the transform).
pub struct ThetaProblem<'a> {
    pub grid: &'a FixedDomainGrid,
    pub a11: &'a [f64],
    pub a12: &'a [f64],
    pub a22: &'a [f64],
    pub source: Option<&'a [f64]>,
    /// Dirichlet values along j = 0 and j = ny (length nx+1)
    pub wall_bottom: &'a [f64],
    pub wall_top: &'a [f64],
    /// oblique exit row coefficients at i = nx (length ny+1, interior used):
    /// exit_cxi * dtheta/dxi + exit_ceta * dtheta/deta = exit_rhs
    pub exit_cxi: &'a [f64],
    pub exit_ceta: &'a [f64],
    pub exit_rhs: &'a [f64],
    /// oblique shock row coefficients at i = 0
    pub shock_cxi: &'a [f64],
    pub shock_ceta: &'a [f64],
    pub shock_rhs: &'a [f64],
    pub tol_linear: f64,
}

pub struct ThetaSolution {
    pub theta: Vec<f64>,
    pub linear_residual: f64,
}

/// Assemble and solve the banded system by direct factorization; the
/// discrete residual is checked against the requested tolerance.
pub fn solve_theta(problem: &ThetaProblem) -> Result<ThetaSolution> {
    let g = problem.grid;
    let (nx, ny) = (g.nx, g.ny);
    let n = g.n_nodes();
    let stride = ny + 1;
    let band = 2 * stride;
    let mut mat = BandMatrix::new(n, band, band);
    let mut rhs = vec![0.0; n];
    let dx = g.dxi();
    let dy = g.deta();
    let avg = |a: &[f64], k1: usize, k2: usize| 0.5 * (a[k1] + a[k2]);

    for i in 0..=nx {
        for j in 0..=ny {
            let row = g.idx(i, j);
            // walls take Dirichlet values, corners included
            if j == 0 || j == ny {
                mat.set(row, row, 1.0);
                rhs[row] = if j == 0 {
                    problem.wall_bottom[i]
                } else {
                    problem.wall_top[i]
                };
                continue;
            }
            if i == 0 {
                // shock oblique: one-sided second-order in xi, centered in eta
                let cxi = problem.shock_cxi[j];
                let ceta = problem.shock_ceta[j];
                mat.add(row, g.idx(0, j), -3.0 * cxi / (2.0 * dx));
                mat.add(row, g.idx(1, j), 4.0 * cxi / (2.0 * dx));
                mat.add(row, g.idx(2, j), -cxi / (2.0 * dx));
                mat.add(row, g.idx(0, j + 1), ceta / (2.0 * dy));
                mat.add(row, g.idx(0, j - 1), -ceta / (2.0 * dy));
                rhs[row] = problem.shock_rhs[j];
                continue;
            }
            if i == nx {
                let cxi = problem.exit_cxi[j];
                let ceta = problem.exit_ceta[j];
                mat.add(row, g.idx(nx, j), 3.0 * cxi / (2.0 * dx));
                mat.add(row, g.idx(nx - 1, j), -4.0 * cxi / (2.0 * dx));
                mat.add(row, g.idx(nx - 2, j), cxi / (2.0 * dx));
                mat.add(row, g.idx(nx, j + 1), ceta / (2.0 * dy));
                mat.add(row, g.idx(nx, j - 1), -ceta / (2.0 * dy));
                rhs[row] = problem.exit_rhs[j];
                continue;
            }
            // interior conservative 9-point stencil
            let k = row;
            let ke = g.idx(i + 1, j);
            let kw = g.idx(i - 1, j);
            let kn = g.idx(i, j + 1);
            let ks = g.idx(i, j - 1);
            let a11_e = avg(problem.a11, k, ke);
            let a11_w = avg(problem.a11, k, kw);
            let a22_n = avg(problem.a22, k, kn);
            let a22_s = avg(problem.a22, k, ks);
            let a12_e = avg(problem.a12, k, ke);
            let a12_w = avg(problem.a12, k, kw);
            let a12_n = avg(problem.a12, k, kn);
            let a12_s = avg(problem.a12, k, ks);

            // d/dxi (a11 dtheta/dxi)
            mat.add(row, ke, a11_e / (dx * dx));
            mat.add(row, kw, a11_w / (dx * dx));
            mat.add(row, k, -(a11_e + a11_w) / (dx * dx));
            // d/deta (a22 dtheta/deta)
            mat.add(row, kn, a22_n / (dy * dy));
            mat.add(row, ks, a22_s / (dy * dy));
            mat.add(row, k, -(a22_n + a22_s) / (dy * dy));
            // d/dxi (a12 dtheta/deta): fluxes at i+-1/2 use the eta-average
            // of the four surrounding nodes
            let c = 1.0 / (4.0 * dx * dy);
            mat.add(row, g.idx(i + 1, j + 1), a12_e * c);
            mat.add(row, g.idx(i, j + 1), a12_e * c);
            mat.add(row, g.idx(i + 1, j - 1), -a12_e * c);
            mat.add(row, g.idx(i, j - 1), -a12_e * c);
            mat.add(row, g.idx(i - 1, j + 1), -a12_w * c);
            mat.add(row, g.idx(i, j + 1), -a12_w * c);
            mat.add(row, g.idx(i - 1, j - 1), a12_w * c);
            mat.add(row, g.idx(i, j - 1), a12_w * c);
            // d/deta (a12 dtheta/dxi)
            mat.add(row, g.idx(i + 1, j + 1), a12_n * c);
            mat.add(row, g.idx(i + 1, j), a12_n * c);
            mat.add(row, g.idx(i - 1, j + 1), -a12_n * c);
            mat.add(row, g.idx(i - 1, j), -a12_n * c);
            mat.add(row, g.idx(i + 1, j - 1), -a12_s * c);
            mat.add(row, g.idx(i + 1, j), -a12_s * c);
            mat.add(row, g.idx(i - 1, j - 1), a12_s * c);
            mat.add(row, g.idx(i - 1, j), a12_s * c);

            rhs[row] = problem.source.map_or(0.0, |s| s[row]);
        }
    }

    let unfactored = mat.clone();
    let lu = mat.factor()?;
    let theta = lu.solve(&rhs);
    // residual audit
    let mut res = 0.0f64;
    let mut bscale = 0.0f64;
    for row in 0..n {
        let lo = row.saturating_sub(band);
        let hi = (row + band).min(n - 1);
        let mut ax = 0.0;
        for col in lo..=hi {
            let v = unfactored.get(row, col);
            if v != 0.0 {
                ax += v * theta[col];
            }
        }
        res = res.max((ax - rhs[row]).abs());
        bscale = bscale.max(rhs[row].abs());
    }
    let rel = res / (1.0 + bscale);
    if rel > problem.tol_linear {
        return Err(Error::LinearSolve(format!(
            "discrete residual {rel:.3e} above tolerance {:.1e}",
            problem.tol_linear
        )));
    }
    Ok(ThetaSolution { theta, linear_residual: rel })
}

/// Discrete first derivatives on the grid: centered inside, one-sided
/// second-order on the boundary.
pub(crate) fn grad_xi(grid: &FixedDomainGrid, f: &[f64], i: usize, j: usize) -> f64 {
    let dx = grid.dxi();
    let nx = grid.nx;
    if i == 0 {
        (-3.0 * f[grid.idx(0, j)] + 4.0 * f[grid.idx(1, j)] - f[grid.idx(2, j)]) / (2.0 * dx)
    } else if i == nx {
        (3.0 * f[grid.idx(nx, j)] - 4.0 * f[grid.idx(nx - 1, j)] + f[grid.idx(nx - 2, j)])
            / (2.0 * dx)
    } else {
        (f[grid.idx(i + 1, j)] - f[grid.idx(i - 1, j)]) / (2.0 * dx)
    }
}

pub(crate) fn grad_eta(grid: &FixedDomainGrid, f: &[f64], i: usize, j: usize) -> f64 {
    let dy = grid.deta();
    let ny = grid.ny;
    if j == 0 {
        (-3.0 * f[grid.idx(i, 0)] + 4.0 * f[grid.idx(i, 1)] - f[grid.idx(i, 2)]) / (2.0 * dy)
    } else if j == ny {
        (3.0 * f[grid.idx(i, ny)] - 4.0 * f[grid.idx(i, ny - 1)] + f[grid.idx(i, ny - 2)])
            / (2.0 * dy)
    } else {
        (f[grid.idx(i, j + 1)] - f[grid.idx(i, j - 1)]) / (2.0 * dy)
    }
}

/// Straightening transform data per node: xi-dilation J(eta) and the mixed
/// term W(xi, eta); physical derivatives are d/dxi = J d/dxi~,
/// d/deta = W d/dxi~ + d/deta~.
pub struct TransformFields {
    pub j_of_eta: Vec<f64>,
    pub w: Vec<f64>,
}

impl TransformFields {
    /// Identity transform (planar front at xi0).
    pub fn identity(grid: &FixedDomainGrid) -> Self {
        TransformFields {
            j_of_eta: vec![1.0; grid.ny + 1],
            w: vec![0.0; grid.n_nodes()],
        }
    }

    /// Built from the front position psi(eta_j) and slope psi'(eta_j).
    pub fn from_front(grid: &FixedDomainGrid, psi: &[f64], psi_slope: &[f64]) -> Result<Self> {
        let l = grid.length_l;
        let mut j_of_eta = vec![0.0; grid.ny + 1];
        for j in 0..=grid.ny {
            let denom = l - psi[j];
            if denom <= 0.0 {
                return Err(Error::Domain(format!(
                    "front position psi = {:.4} reaches the exit plane",
                    psi[j]
                )));
            }
            j_of_eta[j] = (l - grid.xi0) / denom;
        }
        let mut w = vec![0.0; grid.n_nodes()];
        for i in 0..=grid.nx {
            let xi_t = grid.xi(i);
            for j in 0..=grid.ny {
                w[grid.idx(i, j)] = (xi_t - l) * psi_slope[j] / (l - psi[j]);
            }
        }
        Ok(TransformFields { j_of_eta, w })
    }
}

/// Pressure recovery: integrate the pressure xi-derivative relation along
/// each streamline from the exit value inward, in the straightened
/// coordinates. Returns the field and the cross-relation audit (max
/// interior mismatch of the eta-derivative relation).
pub fn recover_p(
    model: &GasModel,
    grid: &FixedDomainGrid,
    theta: &[f64],
    coeff_fields: &FieldSet,
    transform: &TransformFields,
    exit_values: &[f64],
) -> Result<(Vec<f64>, f64)> {
    if exit_values.len() != grid.ny + 1 {
        return Err(Error::Domain("exit pressure values must match the eta grid".into()));
    }
    let (nx, ny) = (grid.nx, grid.ny);
    let mut gp_xi = vec![0.0; grid.n_nodes()];
    let mut gp_eta = vec![0.0; grid.n_nodes()];
    for i in 0..=nx {
        for j in 0..=ny {
            let k = grid.idx(i, j);
            let st = coeff_fields.state_at(k);
            let d = derived(model, &st)?;
            let m2 = d.mach * d.mach;
            let cos_t = st.theta.cos();
            if m2 >= 1.0 || cos_t <= 0.0 {
                return Err(Error::Hypothesis {
                    what: format!("pressure recovery lost ellipticity (M^2 = {m2:.4})"),
                    location: Some((i, j)),
                });
            }
            let sin_t = st.theta.sin();
            let denom = (1.0 - m2) * cos_t;
            let th_xi_t = grad_xi(grid, theta, i, j);
            let th_eta_t = grad_eta(grid, theta, i, j);
            let jj = transform.j_of_eta[j];
            let ww = transform.w[k];
            let th_xi = jj * th_xi_t;
            let th_eta = ww * th_xi_t + th_eta_t;
            let rho_q2 = d.rho * st.q * st.q;
            gp_xi[k] = (-rho_q2 * sin_t * th_xi + d.rho * rho_q2 * st.q * th_eta) / denom;
            gp_eta[k] =
                (-st.q * (1.0 - m2 * cos_t * cos_t) * th_xi + rho_q2 * sin_t * th_eta) / denom;
        }
    }
    let dx = grid.dxi();
    let mut p = vec![0.0; grid.n_nodes()];
    for j in 0..=ny {
        p[grid.idx(nx, j)] = exit_values[j];
        let jj = transform.j_of_eta[j];
        for i in (0..nx).rev() {
            let k = grid.idx(i, j);
            let k1 = grid.idx(i + 1, j);
            // dp/dxi~ = (physical dp/dxi) / J
            p[k] = p[k1] - 0.5 * dx * (gp_xi[k] / jj + gp_xi[k1] / jj);
        }
    }
    // audit: the eta-derivative relation evaluated on the recovered field;
    // the one-cell boundary ring (where one-sided and centered stencils mix)
    // is excluded, mirroring the corner-excluded norms
    let mut audit = 0.0f64;
    for i in 2..nx.saturating_sub(1) {
        for j in 2..ny.saturating_sub(1) {
            let k = grid.idx(i, j);
            let p_eta_phys =
                transform.w[k] * grad_xi(grid, &p, i, j) + grad_eta(grid, &p, i, j);
            audit = audit.max((p_eta_phys - gp_eta[k]).abs());
        }
    }
    Ok((p, audit))
}

/// Entropy and speed recovery: s is transported unchanged along each
/// streamline from its shock-trace value, q comes from the Bernoulli
/// invariant of the trace state.
pub fn recover_q_s(
    model: &GasModel,
    grid: &FixedDomainGrid,
    p: &[f64],
    trace_states: &[GasState],
) -> Result<(Vec<f64>, Vec<f64>)> {
    if trace_states.len() != grid.ny + 1 {
        return Err(Error::Domain("trace state count must match the eta grid".into()));
    }
    let mut q = vec![0.0; grid.n_nodes()];
    let mut s = vec![0.0; grid.n_nodes()];
    for j in 0..=grid.ny {
        let tr = &trace_states[j];
        let b = derived(model, tr)?.bernoulli_b;
        for i in 0..=grid.nx {
            let k = grid.idx(i, j);
            s[k] = tr.s;
            let enth = model.enthalpy(p[k], tr.s)?;
            let q2 = 2.0 * (b - enth);
            if q2 <= 0.0 {
                return Err(Error::Hypothesis {
                    what: format!("Bernoulli inversion failed (q^2 = {q2:.3e})"),
                    location: Some((i, j)),
                });
            }
            q[k] = q2.sqrt();
        }
    }
    Ok((q, s))
}

/// Worst-case margins of the uniqueness-regime hypotheses.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub eps: f64,
    pub mach_ok: bool,
    pub worst_m2: f64,
    pub worst_m2_location: (usize, usize),
    pub u_positive_ok: bool,
    pub worst_u: f64,
    pub worst_u_location: (usize, usize),
    pub trace_pressure_ok: bool,
    /// min over the trace of p+ - (p* + eps)
    pub worst_trace_margin: f64,
    pub worst_trace_index: usize,
    pub ellipticity_ok: bool,
    pub lambda_min: f64,
    pub all_ok: bool,
}

/// Check M^2 <= 1 - eps and u > 0 over the fields, p+ >= p* + eps on the
/// shock trace, and a positive ellipticity floor.
pub fn check_hypotheses(
    model: &GasModel,
    grid: &FixedDomainGrid,
    fields: &FieldSet,
    trace_p: &[f64],
    trace_p_star: &[f64],
    eps: f64,
) -> Result<HypothesisReport> {
    let mut worst_m2 = f64::NEG_INFINITY;
    let mut worst_m2_loc = (0, 0);
    let mut worst_u = f64::INFINITY;
    let mut worst_u_loc = (0, 0);
    let mut lambda_min = f64::INFINITY;
    for i in 0..=grid.nx {
        for j in 0..=grid.ny {
            let k = grid.idx(i, j);
            let st = fields.state_at(k);
            let d = derived(model, &st)?;
            let m2 = d.mach * d.mach;
            if m2 > worst_m2 {
                worst_m2 = m2;
                worst_m2_loc = (i, j);
            }
            let u = st.q * st.theta.cos();
            if u < worst_u {
                worst_u = u;
                worst_u_loc = (i, j);
            }
            if m2 < 1.0 && st.theta.cos() > 0.0 {
                let c = theta_coefficients(model, &st)?;
                lambda_min = lambda_min.min(c.lambda_lower);
            } else {
                lambda_min = lambda_min.min(0.0);
            }
        }
    }
    let mut worst_trace_margin = f64::INFINITY;
    let mut worst_trace_index = 0;
    for (j, (&p, &ps)) in trace_p.iter().zip(trace_p_star.iter()).enumerate() {
        let margin = p - (ps + eps);
        if margin < worst_trace_margin {
            worst_trace_margin = margin;
            worst_trace_index = j;
        }
    }
    let mach_ok = worst_m2 <= 1.0 - eps;
    let u_positive_ok = worst_u > 0.0;
    let trace_pressure_ok = worst_trace_margin >= 0.0;
    let ellipticity_ok = lambda_min > 0.0;
    Ok(HypothesisReport {
        eps,
        mach_ok,
        worst_m2,
        worst_m2_location: worst_m2_loc,
        u_positive_ok,
        worst_u,
        worst_u_location: worst_u_loc,
        trace_pressure_ok,
        worst_trace_margin,
        worst_trace_index,
        ellipticity_ok,
        lambda_min,
        all_ok: mach_ok && u_positive_ok && trace_pressure_ok && ellipticity_ok,
    })
}
