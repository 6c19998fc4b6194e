//! Scalar root finding, quadrature and interpolation helpers.

use crate::error::{Error, Result};

/// Bisection on a bracketing interval, refined to `tol` in x.
///
/// `f(a)` and `f(b)` must have opposite signs (a zero endpoint is accepted
/// as the root).
pub fn bisect<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: f64) -> Result<f64> {
    let (mut lo, mut hi) = (a, b);
    let (mut flo, fhi) = (f(lo), f(hi));
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo * fhi > 0.0 {
        return Err(Error::RootSolve(format!(
            "bisect: no sign change on [{a}, {b}] (f = {flo:.3e}, {fhi:.3e})"
        )));
    }
    // 200 halvings is plenty for any f64 interval.
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (hi - lo).abs() <= tol || mid == lo || mid == hi {
            return Ok(mid);
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if flo * fm < 0.0 {
            hi = mid;
        } else {
            lo = mid;
            flo = fm;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Bisection followed by a few secant steps to polish the root toward
/// machine precision. Keeps the bracketing guarantee of `bisect` while
/// making the result a smooth function of problem data.
pub fn bisect_polished<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: f64) -> Result<f64> {
    let mut x0 = bisect(&mut f, a, b, tol)?;
    let mut x1 = x0 + tol.max(1e-300);
    let mut f0 = f(x0);
    for _ in 0..8 {
        let f1 = f(x1);
        let denom = f1 - f0;
        if denom == 0.0 {
            break;
        }
        let x2 = x1 - f1 * (x1 - x0) / denom;
        if !x2.is_finite() || x2 < a.min(b) || x2 > a.max(b) {
            break;
        }
        x0 = x1;
        f0 = f1;
        x1 = x2;
        if (x1 - x0).abs() <= 1e-16 * (1.0 + x1.abs()) {
            break;
        }
    }
    Ok(x1)
}

/// Damped Newton on a scalar function with a maintained bracket; falls back
/// to bisection steps whenever Newton leaves the bracket.
pub fn newton_bracketed<F, D>(
    mut f: F,
    mut df: D,
    mut lo: f64,
    mut hi: f64,
    x0: f64,
    tol: f64,
    max_iter: usize,
) -> Result<f64>
where
    F: FnMut(f64) -> f64,
    D: FnMut(f64) -> f64,
{
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo * fhi > 0.0 {
        return Err(Error::RootSolve(format!(
            "newton_bracketed: no sign change on [{lo}, {hi}]"
        )));
    }
    let mut x = x0.clamp(lo.min(hi), lo.max(hi));
    for _ in 0..max_iter {
        let fx = f(x);
        if fx == 0.0 {
            return Ok(x);
        }
        if flo * fx < 0.0 {
            hi = x;
        } else {
            lo = x;
            flo = fx;
        }
        let d = df(x);
        let mut next = if d != 0.0 { x - fx / d } else { f64::NAN };
        if !next.is_finite() || next <= lo.min(hi) || next >= lo.max(hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= tol * (1.0 + x.abs()) {
            return Ok(next);
        }
        x = next;
    }
    Ok(x)
}

/// Composite quadrature of uniformly sampled values over [x0, x0 + (n-1) h].
///
/// Simpson on even interval counts; one Simpson-3/8 cell absorbs the odd
/// interval. Needs at least 2 samples.
pub fn integrate_uniform(values: &[f64], h: f64) -> f64 {
    let n = values.len();
    assert!(n >= 2, "integrate_uniform needs >= 2 samples");
    if n == 2 {
        return 0.5 * h * (values[0] + values[1]);
    }
    let intervals = n - 1;
    if intervals % 2 == 0 {
        let mut acc = 0.0;
        for k in 0..intervals / 2 {
            acc += values[2 * k] + 4.0 * values[2 * k + 1] + values[2 * k + 2];
        }
        return acc * h / 3.0;
    }
    // 3/8 rule over the first three intervals, Simpson on the (even) rest.
    let head = 3.0 * h / 8.0 * (values[0] + 3.0 * values[1] + 3.0 * values[2] + values[3]);
    if n == 4 {
        head
    } else {
        head + integrate_uniform(&values[3..], h)
    }
}

/// Cumulative integral of uniformly sampled values: out[k] = integral over
/// [x0, x_k]. Locally quadratic (Simpson-consistent), second order or better.
pub fn cumulative_integral_uniform(values: &[f64], h: f64) -> Vec<f64> {
    let n = values.len();
    assert!(n >= 2);
    let mut out = vec![0.0; n];
    if n == 2 {
        out[1] = 0.5 * h * (values[0] + values[1]);
        return out;
    }
    for k in 0..n - 1 {
        // integrate values over [x_k, x_{k+1}] with the quadratic through the
        // three nearest samples
        let (f0, f1, f2, first) = if k == 0 {
            (values[0], values[1], values[2], true)
        } else {
            (values[k - 1], values[k], values[k + 1], false)
        };
        let seg = if first {
            // quadratic through (0,f0),(h,f1),(2h,f2), integral over [0,h]
            h * (5.0 * f0 + 8.0 * f1 - f2) / 12.0
        } else {
            // same quadratic, integral over [h,2h] shifted
            h * (-f0 + 8.0 * f1 + 5.0 * f2) / 12.0
        };
        out[k + 1] = out[k] + seg;
    }
    out
}

/// Monotone (Fritsch–Carlson) piecewise cubic interpolant on a strictly
/// increasing abscissa table.
#[derive(Debug, Clone)]
pub struct MonotoneCubic {
    x: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
}

impl MonotoneCubic {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() || x.len() < 2 {
            return Err(Error::Input("monotone cubic needs >= 2 matching samples".into()));
        }
        for w in x.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::Input("monotone cubic abscissae must increase".into()));
            }
        }
        let n = x.len();
        let mut slope = vec![0.0; n - 1];
        for k in 0..n - 1 {
            slope[k] = (y[k + 1] - y[k]) / (x[k + 1] - x[k]);
        }
        let mut d = vec![0.0; n];
        d[0] = slope[0];
        d[n - 1] = slope[n - 2];
        for k in 1..n - 1 {
            if slope[k - 1] * slope[k] <= 0.0 {
                d[k] = 0.0;
            } else {
                let w1 = 2.0 * (x[k + 1] - x[k]) + (x[k] - x[k - 1]);
                let w2 = (x[k + 1] - x[k]) + 2.0 * (x[k] - x[k - 1]);
                d[k] = (w1 + w2) / (w1 / slope[k - 1] + w2 / slope[k]);
            }
        }
        // Fritsch-Carlson limiter
        for k in 0..n - 1 {
            if slope[k] == 0.0 {
                d[k] = 0.0;
                d[k + 1] = 0.0;
            } else {
                let a = d[k] / slope[k];
                let b = d[k + 1] / slope[k];
                let s = (a * a + b * b).sqrt();
                if s > 3.0 {
                    let t = 3.0 / s;
                    d[k] = t * a * slope[k];
                    d[k + 1] = t * b * slope[k];
                }
            }
        }
        Ok(Self { x, y, d })
    }

    pub fn eval(&self, xq: f64) -> f64 {
        let n = self.x.len();
        if xq <= self.x[0] {
            return self.y[0] + self.d[0] * (xq - self.x[0]);
        }
        if xq >= self.x[n - 1] {
            return self.y[n - 1] + self.d[n - 1] * (xq - self.x[n - 1]);
        }
        let mut lo = 0usize;
        let mut hi = n - 1;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if self.x[mid] <= xq {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let h = self.x[lo + 1] - self.x[lo];
        let t = (xq - self.x[lo]) / h;
        let (y0, y1, d0, d1) = (self.y[lo], self.y[lo + 1], self.d[lo], self.d[lo + 1]);
        let h00 = (1.0 + 2.0 * t) * (1.0 - t) * (1.0 - t);
        let h10 = t * (1.0 - t) * (1.0 - t);
        let h01 = t * t * (3.0 - 2.0 * t);
        let h11 = t * t * (t - 1.0);
        h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1
    }
}

/// Four-point Lagrange interpolation on a uniform grid of slice values.
///
/// `values[i]` is the sample at `x0 + i h`; degrades to the available
/// points near the ends.
pub fn interp_uniform(values: &[f64], x0: f64, h: f64, xq: f64) -> f64 {
    let n = values.len();
    assert!(n >= 2);
    let t = (xq - x0) / h;
    let i1 = (t.floor() as isize).clamp(0, n as isize - 2) as usize;
    // choose a 4-point window [i0, i0+3] containing [i1, i1+1]
    let i0 = i1.saturating_sub(1).min(n.saturating_sub(4));
    let m = (n - i0).min(4);
    let xs: Vec<f64> = (0..m).map(|k| (i0 + k) as f64).collect();
    let mut acc = 0.0;
    for k in 0..m {
        let mut lk = 1.0;
        for j in 0..m {
            if j != k {
                lk *= (t - xs[j]) / (xs[k] - xs[j]);
            }
        }
        acc += lk * values[i0 + k];
    }
    acc
}

/// n evenly spaced points including both endpoints.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2);
    (0..n)
        .map(|k| a + (b - a) * k as f64 / (n - 1) as f64)
        .collect()
}

/// Solve a small dense system by Gaussian elimination with partial pivoting.
pub fn solve_dense(a: &mut [Vec<f64>], b: &mut [f64]) -> Result<Vec<f64>> {
    let n = b.len();
    for (row, _) in a.iter().zip(0..n) {
        debug_assert_eq!(row.len(), n);
    }
    for col in 0..n {
        let mut piv = col;
        for r in col + 1..n {
            if a[r][col].abs() > a[piv][col].abs() {
                piv = r;
            }
        }
        if a[piv][col] == 0.0 {
            return Err(Error::LinearSolve("singular dense system".into()));
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let m = a[r][col] / a[col][col];
            if m != 0.0 {
                for c in col..n {
                    a[r][c] -= m * a[col][c];
                }
                b[r] -= m * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut s = b[row];
        for c in row + 1..n {
            s -= a[row][c] * x[c];
        }
        x[row] = s / a[row][row];
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bisect_finds_sqrt2() {
        let r = bisect(|x| x * x - 2.0, 0.0, 2.0, 1e-14).unwrap();
        assert!((r - std::f64::consts::SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn bisect_rejects_no_bracket() {
        assert!(bisect(|x| x * x + 1.0, -1.0, 1.0, 1e-12).is_err());
    }

    #[test]
    fn polished_root_hits_machine_precision() {
        let r = bisect_polished(|x| x.cos() - x, 0.0, 1.0, 1e-10).unwrap();
        assert!((r.cos() - r).abs() < 1e-15);
    }

    #[test]
    fn simpson_exact_for_cubics() {
        let h = 0.1;
        let vals: Vec<f64> = (0..11).map(|k| {
            let x = k as f64 * h;
            x * x * x - 2.0 * x + 1.0
        }).collect();
        let exact = 0.25 - 1.0 + 1.0; // integral over [0,1]
        assert!((integrate_uniform(&vals, h) - exact).abs() < 1e-14);
    }

    #[test]
    fn simpson_handles_odd_interval_count() {
        let n = 10; // 9 intervals
        let h = 1.0 / (n as f64 - 1.0);
        let vals: Vec<f64> = (0..n).map(|k| (k as f64 * h).powi(3)).collect();
        assert!((integrate_uniform(&vals, h) - 0.25).abs() < 1e-14);
    }

    #[test]
    fn cumulative_matches_antiderivative() {
        let n = 201;
        let h = 1.0 / (n as f64 - 1.0);
        let vals: Vec<f64> = (0..n).map(|k| (3.0 * (k as f64) * h).sin()).collect();
        let cum = cumulative_integral_uniform(&vals, h);
        for k in 0..n {
            let x = k as f64 * h;
            let exact = (1.0 - (3.0 * x).cos()) / 3.0;
            assert!((cum[k] - exact).abs() < 1e-7, "k={k}");
        }
    }

    #[test]
    fn monotone_cubic_preserves_monotonicity() {
        let x = linspace(0.0, 1.0, 9);
        let y: Vec<f64> = x.iter().map(|t| t * t).collect();
        let m = MonotoneCubic::new(x, y).unwrap();
        let mut prev = m.eval(0.0);
        for k in 1..=1000 {
            let cur = m.eval(k as f64 / 1000.0);
            assert!(cur >= prev - 1e-14);
            prev = cur;
        }
    }

    #[test]
    fn interp_uniform_is_exact_on_cubics() {
        let h = 0.25;
        let vals: Vec<f64> = (0..9).map(|k| {
            let x = k as f64 * h;
            2.0 * x * x * x - x + 0.5
        }).collect();
        let xq = 1.137;
        let exact = 2.0 * xq * xq * xq - xq + 0.5;
        assert!((interp_uniform(&vals, 0.0, h, xq) - exact).abs() < 1e-12);
    }

    #[test]
    fn dense_solve_roundtrip() {
        let mut a = vec![
            vec![2.0, 1.0, -1.0],
            vec![-3.0, -1.0, 2.0],
            vec![-2.0, 1.0, 2.0],
        ];
        let mut b = vec![8.0, -11.0, -3.0];
        let x = solve_dense(&mut a, &mut b).unwrap();
        assert!((x[0] - 2.0).abs() < 1e-12);
        assert!((x[1] - 3.0).abs() < 1e-12);
        assert!((x[2] - -1.0).abs() < 1e-12);
    }
}
