//! Real symmetric tridiagonal matrices: Sturm counts, bisection eigenvalues,
//! inverse-iteration eigenvectors and direct solves.

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct SymTridiag {
    pub diag: Vec<f64>,
    /// `off[i]` couples rows `i` and `i + 1`.
    pub off: Vec<f64>,
}

impl SymTridiag {
    pub fn new(diag: Vec<f64>, off: Vec<f64>) -> Self {
        assert_eq!(off.len() + 1, diag.len(), "off-diagonal length");
        SymTridiag { diag, off }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.len();
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut s = self.diag[i] * x[i];
            if i > 0 {
                s += self.off[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                s += self.off[i] * x[i + 1];
            }
            y[i] = s;
        }
        y
    }

    pub fn shifted(&self, sigma: f64) -> SymTridiag {
        SymTridiag {
            diag: self.diag.iter().map(|d| d - sigma).collect(),
            off: self.off.clone(),
        }
    }

    /// Gershgorin interval containing the spectrum.
    pub fn bounds(&self) -> (f64, f64) {
        let n = self.len();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let mut rad = 0.0;
            if i > 0 {
                rad += self.off[i - 1].abs();
            }
            if i + 1 < n {
                rad += self.off[i].abs();
            }
            lo = lo.min(self.diag[i] - rad);
            hi = hi.max(self.diag[i] + rad);
        }
        (lo, hi)
    }

    pub fn norm_inf(&self) -> f64 {
        let (lo, hi) = self.bounds();
        lo.abs().max(hi.abs())
    }

    /// Number of eigenvalues strictly below `x` (Sturm sequence of the LDLᵀ pivots).
    pub fn count_below(&self, x: f64) -> usize {
        let tiny = f64::MIN_POSITIVE.sqrt() * (1.0 + self.norm_inf());
        let mut count = 0;
        let mut d = 1.0;
        for i in 0..self.len() {
            let e2 = if i > 0 { self.off[i - 1] * self.off[i - 1] } else { 0.0 };
            d = self.diag[i] - x - if i > 0 { e2 / d } else { 0.0 };
            if d.abs() < tiny {
                d = -tiny;
            }
            if d < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// `k`-th smallest eigenvalue (0-based), bisected to `tol` absolute.
    pub fn eigenvalue(&self, k: usize, tol: f64) -> f64 {
        assert!(k < self.len());
        let (mut lo, mut hi) = self.bounds();
        lo -= 1e-12 * (1.0 + lo.abs());
        hi += 1e-12 * (1.0 + hi.abs());
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.count_below(mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo <= tol.max(4.0 * f64::EPSILON * mid.abs()) {
                break;
            }
        }
        0.5 * (lo + hi)
    }

    /// The `k` smallest eigenvalues.
    pub fn lowest(&self, k: usize, tol: f64) -> Vec<f64> {
        (0..k.min(self.len())).map(|i| self.eigenvalue(i, tol)).collect()
    }

    /// Eigenvector for an (accurately known) eigenvalue, unit Euclidean norm.
    pub fn eigenvector(&self, lambda: f64) -> Vec<f64> {
        let n = self.len();
        let scale = 1.0 + self.norm_inf();
        let shift = lambda + 1e-13 * scale;
        let mut x: Vec<f64> = (0..n).map(|i| 1.0 + 0.01 * ((i * 7919) % 101) as f64).collect();
        for _ in 0..4 {
            x = self.shifted(shift).solve_unchecked(&x);
            let nrm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            x.iter_mut().for_each(|v| *v /= nrm);
        }
        x
    }

    /// Gaussian elimination with partial pivoting (no singularity check).
    pub fn solve_unchecked(&self, b: &[f64]) -> Vec<f64> {
        // Rows stored as (sub, diag, sup, sup2); pivoting can create one extra super-diagonal.
        let n = self.len();
        let mut a = vec![[0.0f64; 4]; n];
        for i in 0..n {
            a[i][0] = if i > 0 { self.off[i - 1] } else { 0.0 };
            a[i][1] = self.diag[i];
            a[i][2] = if i + 1 < n { self.off[i] } else { 0.0 };
        }
        let mut x = b.to_vec();
        let tiny = f64::EPSILON * (1.0 + self.norm_inf()) * 1e-3;
        for i in 0..n.saturating_sub(1) {
            // candidates: row i (diag = a[i][1]) and row i+1 (sub = a[i+1][0])
            if a[i + 1][0].abs() > a[i][1].abs() {
                let ri = a[i];
                let rn = a[i + 1];
                // row i+1 in column layout relative to pivot column i: [sub, diag, sup]
                a[i] = [0.0, rn[0], rn[1], rn[2]];
                a[i + 1] = [ri[1], ri[2], ri[3], 0.0];
                x.swap(i, i + 1);
            } else {
                let ri = a[i];
                a[i] = [0.0, ri[1], ri[2], ri[3]];
                let rn = a[i + 1];
                a[i + 1] = [rn[0], rn[1], rn[2], 0.0];
            }
            let piv = if a[i][1].abs() < tiny { tiny } else { a[i][1] };
            a[i][1] = piv;
            let m = a[i + 1][0] / piv;
            a[i + 1][0] = 0.0;
            a[i + 1][1] -= m * a[i][2];
            a[i + 1][2] -= m * a[i][3];
            x[i + 1] -= m * x[i];
        }
        if a[n - 1][1].abs() < tiny {
            a[n - 1][1] = tiny;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            if i + 1 < n {
                s -= a[i][2] * x[i + 1];
            }
            if i + 2 < n {
                s -= a[i][3] * x[i + 2];
            }
            x[i] = s / a[i][1];
        }
        x
    }

    /// Direct solve; fails when the matrix is numerically singular.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let x = self.solve_unchecked(b);
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::EigensolveFailure("singular tridiagonal system".into()));
        }
        Ok(x)
    }
}
