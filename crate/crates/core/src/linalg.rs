//! Banded LU factorization with partial pivoting.
//!
//! The elliptic stencil couples node (i, j) to neighbours at most two
//! eta-columns away in the lexicographic ordering, so the system is banded
//! with a halfwidth of about twice the fast-index stride. LAPACK-style band
//! storage: row `ku + kl + row - col` of column `col` holds entry (row, col),
//! with `kl` extra rows on top as fill space for pivoting.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    /// column-major: ab[col * ldab + r]
    ab: Vec<f64>,
    ldab: usize,
}

impl BandMatrix {
    pub fn new(n: usize, kl: usize, ku: usize) -> Self {
        let ldab = 2 * kl + ku + 1;
        BandMatrix {
            n,
            kl,
            ku,
            ab: vec![0.0; ldab * n],
            ldab,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    fn slot(&self, row: usize, col: usize) -> usize {
        debug_assert!(row < self.n && col < self.n);
        debug_assert!(
            row + self.ku >= col && col + self.kl >= row,
            "entry ({row},{col}) outside band kl={} ku={}",
            self.kl,
            self.ku
        );
        col * self.ldab + (self.kl + self.ku + row - col)
    }

    pub fn add(&mut self, row: usize, col: usize, v: f64) {
        let s = self.slot(row, col);
        self.ab[s] += v;
    }

    pub fn set(&mut self, row: usize, col: usize, v: f64) {
        let s = self.slot(row, col);
        self.ab[s] = v;
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        if row + self.ku < col || col + self.kl < row {
            return 0.0;
        }
        self.ab[self.slot(row, col)]
    }

    /// Factor in place (gbtrf-style). Returns the pivot vector.
    pub fn factor(mut self) -> Result<BandLu> {
        let (n, kl, ku, ldab) = (self.n, self.kl, self.ku, self.ldab);
        let kv = kl + ku; // superdiagonal count in the working storage
        let mut ipiv = vec![0usize; n];
        for j in 0..n {
            // pivot search in column j over rows j..=min(j+kl, n-1)
            let km = kl.min(n - 1 - j);
            let mut piv = 0usize;
            let mut pmax = 0.0f64;
            for k in 0..=km {
                let v = self.ab[j * ldab + kv + k].abs();
                if v > pmax {
                    pmax = v;
                    piv = k;
                }
            }
            if pmax == 0.0 {
                return Err(Error::LinearSolve(format!(
                    "banded LU: zero pivot column {j}"
                )));
            }
            ipiv[j] = j + piv;
            // swap rows j and j+piv across the stored band of columns j..=j+kv
            if piv != 0 {
                let jmax = (j + kv).min(n - 1);
                for col in j..=jmax {
                    let a = col * ldab + kl + ku + j - col;
                    let b = a + piv;
                    self.ab.swap(a, b);
                }
            }
            // eliminate below the diagonal
            let diag = self.ab[j * ldab + kv];
            for k in 1..=km {
                let idx = j * ldab + kv + k;
                let m = self.ab[idx] / diag;
                self.ab[idx] = m;
                if m != 0.0 {
                    let jmax = (j + kv).min(n - 1);
                    for col in j + 1..=jmax {
                        let u = col * ldab + kl + ku + j - col;
                        let t = self.ab[u];
                        if t != 0.0 {
                            self.ab[u + k] -= m * t;
                        }
                    }
                }
            }
        }
        Ok(BandLu {
            n,
            kl,
            ku,
            ab: self.ab,
            ldab,
            ipiv,
        })
    }
}

#[derive(Debug, Clone)]
pub struct BandLu {
    n: usize,
    kl: usize,
    ku: usize,
    ab: Vec<f64>,
    ldab: usize,
    ipiv: Vec<usize>,
}

impl BandLu {
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let (n, kl, ku, ldab) = (self.n, self.kl, self.ku, self.ldab);
        let kv = kl + ku;
        let mut x = rhs.to_vec();
        // forward: apply P and L
        for j in 0..n {
            let p = self.ipiv[j];
            if p != j {
                x.swap(j, p);
            }
            let km = kl.min(n - 1 - j);
            let xj = x[j];
            if xj != 0.0 {
                for k in 1..=km {
                    x[j + k] -= self.ab[j * ldab + kv + k] * xj;
                }
            }
        }
        // backward: solve U x = y; U has bandwidth kv above the diagonal
        for j in (0..n).rev() {
            let lo = j.saturating_sub(kv);
            let xj = x[j] / self.ab[j * ldab + kv];
            x[j] = xj;
            if xj != 0.0 {
                for row in lo..j {
                    x[row] -= self.ab[j * ldab + kl + ku + row - j] * xj;
                }
            }
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dense_solve_oracle(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
        let mut m: Vec<Vec<f64>> = a.to_vec();
        let mut rhs = b.to_vec();
        crate::numerics::solve_dense(&mut m, &mut rhs).unwrap()
    }

    #[test]
    fn band_lu_matches_dense_on_random_systems() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for trial in 0..20 {
            let n = rng.gen_range(5..40);
            let kl = rng.gen_range(1..4.min(n));
            let ku = rng.gen_range(1..4.min(n));
            let mut band = BandMatrix::new(n, kl, ku);
            let mut dense = vec![vec![0.0; n]; n];
            for row in 0..n {
                for col in 0..n {
                    if row + ku >= col && col + kl >= row {
                        let v: f64 = rng.gen_range(-1.0..1.0);
                        let v = if row == col { v + 4.0 } else { v };
                        band.set(row, col, v);
                        dense[row][col] = v;
                    }
                }
            }
            let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let lu = band.factor().unwrap();
            let x = lu.solve(&b);
            let y = dense_solve_oracle(&dense, &b);
            for k in 0..n {
                assert!(
                    (x[k] - y[k]).abs() < 1e-10,
                    "trial {trial} k {k}: {} vs {}",
                    x[k],
                    y[k]
                );
            }
        }
    }

    #[test]
    fn band_lu_pivots_without_diagonal_dominance() {
        // small diagonal forces genuine pivoting
        let n = 6;
        let mut band = BandMatrix::new(n, 2, 2);
        let mut dense = vec![vec![0.0; n]; n];
        let entries = [
            (0usize, 0usize, 1e-13),
            (0, 1, 2.0),
            (1, 0, 3.0),
            (1, 1, 1.0),
            (1, 2, -1.0),
            (2, 1, 1.5),
            (2, 2, 0.5),
            (2, 3, 2.5),
            (3, 2, 1.0),
            (3, 3, -2.0),
            (3, 4, 1.0),
            (4, 3, 2.0),
            (4, 4, 1.0),
            (4, 5, 0.5),
            (5, 4, 1.0),
            (5, 5, 3.0),
            (2, 0, -0.5),
            (3, 5, 0.25),
        ];
        for &(r, c, v) in &entries {
            band.set(r, c, v);
            dense[r][c] = v;
        }
        let b = vec![1.0, -2.0, 0.5, 3.0, -1.0, 2.0];
        let x = band.factor().unwrap().solve(&b);
        let y = dense_solve_oracle(&dense, &b);
        for k in 0..n {
            assert!((x[k] - y[k]).abs() < 1e-9);
        }
    }
}
