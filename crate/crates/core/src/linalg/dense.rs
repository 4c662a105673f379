//! Thin wrappers over `faer` dense eigensolvers.

use faer::complex_native::c64;
use faer::{Mat, Side};
use num_complex::Complex64;

/// Row-major dense real matrix.
#[derive(Clone, Debug)]
pub struct DenseMatrix {
    pub n: usize,
    pub data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(n: usize) -> Self {
        DenseMatrix {
            n,
            data: vec![0.0; n * n],
        }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] += v;
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        self.data
            .chunks(self.n)
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    fn to_faer(&self) -> Mat<f64> {
        Mat::from_fn(self.n, self.n, |i, j| self.get(i, j))
    }

    /// All eigenvalues of a general real matrix.
    pub fn eigenvalues(&self) -> Vec<Complex64> {
        self.to_faer()
            .eigenvalues::<c64>()
            .into_iter()
            .map(|z| Complex64::new(z.re, z.im))
            .collect()
    }

    /// Eigenvalues (ascending) and column eigenvectors of a symmetric matrix.
    pub fn symmetric_eigen(&self) -> (Vec<f64>, Vec<Vec<f64>>) {
        let evd = self.to_faer().selfadjoint_eigendecomposition(Side::Lower);
        let s = evd.s().column_vector();
        let u = evd.u();
        let mut idx: Vec<usize> = (0..self.n).collect();
        idx.sort_by(|&a, &b| s.read(a).total_cmp(&s.read(b)));
        let vals = idx.iter().map(|&k| s.read(k)).collect();
        let vecs = idx
            .iter()
            .map(|&k| (0..self.n).map(|i| u.read(i, k)).collect())
            .collect();
        (vals, vecs)
    }

    /// Singular values (ascending) and the matching right singular vectors.
    pub fn svd_ascending(&self) -> (Vec<f64>, Vec<Vec<f64>>) {
        let svd = self.to_faer().svd();
        let s = svd.s_diagonal();
        let v = svd.v();
        let mut idx: Vec<usize> = (0..self.n).collect();
        idx.sort_by(|&a, &b| s.read(a).total_cmp(&s.read(b)));
        let vals = idx.iter().map(|&k| s.read(k)).collect();
        let vecs = idx
            .iter()
            .map(|&k| (0..self.n).map(|i| v.read(i, k)).collect())
            .collect();
        (vals, vecs)
    }

    /// Inverse via partial-pivoting LU; `None` when a pivot vanishes.
    pub fn inverse(&self) -> Option<DenseMatrix> {
        use faer::linalg::solvers::SolverCore;
        let inv = self.to_faer().partial_piv_lu().inverse();
        let out = DenseMatrix {
            n: self.n,
            data: (0..self.n * self.n).map(|k| inv.read(k / self.n, k % self.n)).collect(),
        };
        out.data.iter().all(|v| v.is_finite()).then_some(out)
    }

    pub fn symmetric_eigenvalues(&self) -> Vec<f64> {
        let mut v = self.to_faer().selfadjoint_eigenvalues(Side::Lower);
        v.sort_by(|a, b| a.total_cmp(b));
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rotation_generator_has_imaginary_pair() {
        let mut m = DenseMatrix::zeros(2);
        m.set(0, 1, 1.0);
        m.set(1, 0, -1.0);
        let mut ev = m.eigenvalues();
        ev.sort_by(|a, b| a.im.total_cmp(&b.im));
        assert!((ev[0] - Complex64::new(0.0, -1.0)).norm() < 1e-14);
        assert!((ev[1] - Complex64::new(0.0, 1.0)).norm() < 1e-14);
    }

    #[test]
    fn symmetric_eigen_sorted() {
        let mut m = DenseMatrix::zeros(3);
        for (i, d) in [3.0, 1.0, 2.0].iter().enumerate() {
            m.set(i, i, *d);
        }
        let (vals, vecs) = m.symmetric_eigen();
        assert_eq!(vals, vec![1.0, 2.0, 3.0]);
        assert!((vecs[0][1].abs() - 1.0).abs() < 1e-14);
    }
}
