//! Complex banded matrices with an LU factorization (partial pivoting).

use num_complex::Complex64;

use crate::error::{Error, Result};

type C = Complex64;

/// Square band matrix with `kl` sub- and `ku` super-diagonals.
#[derive(Clone, Debug)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    /// Row-major, `width = kl + ku + 1`; entry `(i, j)` at `i * width + (j + kl - i)`.
    data: Vec<C>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        BandMatrix {
            n,
            kl,
            ku,
            data: vec![C::new(0.0, 0.0); n * (kl + ku + 1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    fn width(&self) -> usize {
        self.kl + self.ku + 1
    }

    pub fn in_band(&self, i: usize, j: usize) -> bool {
        j + self.kl >= i && j <= i + self.ku
    }

    pub fn get(&self, i: usize, j: usize) -> C {
        if !self.in_band(i, j) {
            return C::new(0.0, 0.0);
        }
        self.data[i * self.width() + (j + self.kl - i)]
    }

    pub fn set(&mut self, i: usize, j: usize, v: C) {
        assert!(self.in_band(i, j), "({i}, {j}) outside band");
        let w = self.width();
        self.data[i * w + (j + self.kl - i)] = v;
    }

    pub fn add(&mut self, i: usize, j: usize, v: C) {
        assert!(self.in_band(i, j), "({i}, {j}) outside band");
        let w = self.width();
        self.data[i * w + (j + self.kl - i)] += v;
    }

    pub fn shift_diagonal(&mut self, z: C) {
        for i in 0..self.n {
            self.add(i, i, -z);
        }
    }

    pub fn matvec(&self, x: &[C]) -> Vec<C> {
        let mut y = vec![C::new(0.0, 0.0); self.n];
        for (i, yi) in y.iter_mut().enumerate() {
            let j0 = i.saturating_sub(self.kl);
            let j1 = (i + self.ku).min(self.n - 1);
            for j in j0..=j1 {
                *yi += self.get(i, j) * x[j];
            }
        }
        y
    }

    pub fn transpose(&self) -> BandMatrix {
        let mut t = BandMatrix::zeros(self.n, self.ku, self.kl);
        for i in 0..self.n {
            let j0 = i.saturating_sub(self.kl);
            let j1 = (i + self.ku).min(self.n - 1);
            for j in j0..=j1 {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    pub fn factor(&self) -> Result<BandLu> {
        BandLu::new(self)
    }
}

/// `P A = L U` for a band matrix; `U` carries `kl + ku` super-diagonals.
#[derive(Clone, Debug)]
pub struct BandLu {
    n: usize,
    kl: usize,
    uw: usize,
    /// Row `i` of `U`, columns `i..i + uw`.
    u: Vec<C>,
    /// Multipliers of step `k`, rows `k+1..k+kl`.
    l: Vec<C>,
    piv: Vec<usize>,
    min_pivot: f64,
}

impl BandLu {
    fn new(a: &BandMatrix) -> Result<Self> {
        let n = a.n;
        let kl = a.kl;
        let uw = a.kl + a.ku + 1;
        // Working row windows: `starts[i]` is the absolute column of `rows[i][0]`.
        let ww = 2 * kl + a.ku + 1;
        let mut starts: Vec<usize> = (0..n).map(|i| i.saturating_sub(kl)).collect();
        let mut rows: Vec<Vec<C>> = (0..n)
            .map(|i| {
                let mut r = vec![C::new(0.0, 0.0); ww];
                let j0 = i.saturating_sub(kl);
                let j1 = (i + a.ku).min(n - 1);
                for j in j0..=j1 {
                    r[j - j0] = a.get(i, j);
                }
                r
            })
            .collect();
        let mut u = vec![C::new(0.0, 0.0); n * uw];
        let lw = kl.max(1);
        let mut l = vec![C::new(0.0, 0.0); n * lw];
        let mut piv = vec![0usize; n];
        let mut min_pivot = f64::INFINITY;
        let scale = a.data.iter().map(|v| v.norm()).fold(0.0, f64::max).max(1e-300);
        for k in 0..n {
            let last = (k + kl).min(n - 1);
            // Columns left of k are eliminated; re-base candidate rows at k so
            // their windows cover the whole fill range k..k + kl + ku.
            for i in k..=last {
                let shift = k - starts[i].min(k);
                if shift > 0 {
                    rows[i].rotate_left(shift);
                    for v in rows[i].iter_mut().skip(ww - shift) {
                        *v = C::new(0.0, 0.0);
                    }
                    starts[i] = k;
                }
            }
            let lead = |rows: &Vec<Vec<C>>, starts: &Vec<usize>, i: usize| rows[i][k - starts[i]];
            let mut p = k;
            let mut best = lead(&rows, &starts, k).norm();
            for i in k + 1..=last {
                let v = lead(&rows, &starts, i).norm();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            piv[k] = p;
            if p != k {
                rows.swap(p, k);
                starts.swap(p, k);
            }
            let pivot = lead(&rows, &starts, k);
            if pivot.norm() == 0.0 || !pivot.norm().is_finite() {
                return Err(Error::EigensolveFailure("singular band matrix".into()));
            }
            min_pivot = min_pivot.min(pivot.norm() / scale);
            let ncol = uw.min(n - k);
            for c in 0..ncol {
                u[k * uw + c] = rows[k][c];
            }
            for i in k + 1..=last {
                let m = rows[i][0] / pivot;
                l[k * lw + (i - k - 1)] = m;
                if m.norm() == 0.0 {
                    continue;
                }
                for c in 0..ncol {
                    let v = rows[k][c];
                    rows[i][c] -= m * v;
                }
            }
        }
        Ok(BandLu {
            n,
            kl,
            uw,
            u,
            l,
            piv,
            min_pivot,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Smallest pivot relative to the largest matrix entry.
    pub fn min_relative_pivot(&self) -> f64 {
        self.min_pivot
    }

    pub fn solve(&self, b: &[C]) -> Vec<C> {
        let n = self.n;
        let kl = self.kl;
        let mut x = b.to_vec();
        for k in 0..n {
            let p = self.piv[k];
            if p != k {
                x.swap(p, k);
            }
            let last = (k + kl).min(n - 1);
            let xk = x[k];
            for i in k + 1..=last {
                x[i] -= self.l[k * kl.max(1) + (i - k - 1)] * xk;
            }
        }
        for k in (0..n).rev() {
            let jmax = (k + self.uw - 1).min(n - 1);
            let mut s = x[k];
            for j in k + 1..=jmax {
                s -= self.u[k * self.uw + (j - k)] * x[j];
            }
            x[k] = s / self.u[k * self.uw];
        }
        x
    }

    pub fn solve_real(&self, b: &[f64]) -> Vec<C> {
        let bc: Vec<C> = b.iter().map(|&v| C::new(v, 0.0)).collect();
        self.solve(&bc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(n: usize, kl: usize, ku: usize) -> BandMatrix {
        let mut a = BandMatrix::zeros(n, kl, ku);
        for i in 0..n {
            for j in i.saturating_sub(kl)..=(i + ku).min(n - 1) {
                let v = ((i * 31 + j * 17) % 13) as f64 - 6.0;
                let w = ((i * 7 + j * 3) % 5) as f64 - 2.0;
                a.set(i, j, C::new(v, 0.3 * w));
            }
        }
        a
    }

    #[test]
    fn lu_solves_random_band_systems() {
        for &(n, kl, ku) in &[(20, 2, 2), (37, 1, 3), (50, 3, 1), (9, 2, 2)] {
            let a = sample(n, kl, ku);
            let x: Vec<C> = (0..n).map(|i| C::new(i as f64 * 0.1 - 1.0, (i % 3) as f64)).collect();
            let b = a.matvec(&x);
            let got = a.factor().unwrap().solve(&b);
            let err: f64 = got.iter().zip(&x).map(|(g, e)| (g - e).norm()).fold(0.0, f64::max);
            assert!(err < 1e-9, "n={n} kl={kl} ku={ku} err={err}");
        }
    }

    #[test]
    fn transpose_roundtrip() {
        let a = sample(12, 2, 1);
        let t = a.transpose();
        for i in 0..12 {
            for j in 0..12 {
                assert_eq!(a.get(i, j), t.get(j, i));
            }
        }
    }
}
