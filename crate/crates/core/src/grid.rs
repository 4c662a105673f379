//! Uniform radial grid for radial functions on ℝ³.
//!
//! Nodes are `r_i = i·h`, `i = 1..=n`, `h = r_max / n`, so `r_n = r_max`.
//! The origin is not a node: regularity is imposed through `v = r·u`, which
//! vanishes at `r = 0`, and the Dirichlet condition sits at the ghost node
//! `r_{n+1}`. Quadrature weights `4π r_i² h` are the trapezoid rule in `v`,
//! so every weighted inner product becomes a plain dot product of the
//! scaled values `√w_i · u_i`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub r_max: f64,
    pub n_points: usize,
}

impl GridSpec {
    /// `r_max = 30/√ω`, 2000 points.
    pub fn default_for(omega: f64) -> Self {
        GridSpec {
            r_max: 30.0 / omega.sqrt(),
            n_points: 2000,
        }
    }

    pub fn build(&self) -> Result<RadialGrid> {
        RadialGrid::new(self.r_max, self.n_points)
    }
}

#[derive(Clone, Debug)]
pub struct RadialGrid {
    r_max: f64,
    h: f64,
    r: Vec<f64>,
    w: Vec<f64>,
    sqrt_w: Vec<f64>,
}

impl PartialEq for RadialGrid {
    fn eq(&self, other: &Self) -> bool {
        self.r.len() == other.r.len() && self.r_max == other.r_max
    }
}

impl RadialGrid {
    pub fn new(r_max: f64, n_points: usize) -> Result<Self> {
        if !(r_max > 0.0 && r_max.is_finite()) {
            return Err(Error::InvalidInput(format!("r_max must be positive, got {r_max}")));
        }
        if n_points < 8 {
            return Err(Error::InvalidInput(format!(
                "need at least 8 grid points, got {n_points}"
            )));
        }
        let h = r_max / n_points as f64;
        let r: Vec<f64> = (1..=n_points).map(|i| i as f64 * h).collect();
        let w: Vec<f64> = r.iter().map(|&ri| 4.0 * PI * ri * ri * h).collect();
        let sqrt_w = w.iter().map(|x| x.sqrt()).collect();
        Ok(RadialGrid {
            r_max,
            h,
            r,
            w,
            sqrt_w,
        })
    }

    pub fn spec(&self) -> GridSpec {
        GridSpec {
            r_max: self.r_max,
            n_points: self.len(),
        }
    }

    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn nodes(&self) -> &[f64] {
        &self.r
    }

    pub fn weights(&self) -> &[f64] {
        &self.w
    }

    pub fn sqrt_weights(&self) -> &[f64] {
        &self.sqrt_w
    }

    /// Same spacing, `factor` times as many points (domain enlarged accordingly).
    pub fn extended(&self, factor: usize) -> RadialGrid {
        self.with_points(self.len() * factor.max(1))
    }

    /// Same spacing with `n` points; the first `min(n, len)` nodes coincide.
    pub fn with_points(&self, n: usize) -> RadialGrid {
        RadialGrid::new(self.h * n as f64, n.max(8)).expect("resize of a valid grid")
    }

    /// Same domain, `n_points` scaled by `factor`.
    pub fn refined(&self, factor: f64) -> Result<RadialGrid> {
        RadialGrid::new(self.r_max, (self.len() as f64 * factor).round() as usize)
    }

    pub fn ensure_same(&self, other: &RadialGrid) -> Result<()> {
        if self != other {
            return Err(Error::GridMismatch(format!(
                "({}, {}) vs ({}, {})",
                self.r_max,
                self.len(),
                other.r_max,
                other.len()
            )));
        }
        Ok(())
    }

    pub fn integrate(&self, f: &[f64]) -> f64 {
        self.w.iter().zip(f).map(|(w, v)| w * v).sum()
    }

    pub fn dot(&self, f: &[f64], g: &[f64]) -> f64 {
        self.w.iter().zip(f).zip(g).map(|((w, a), b)| w * a * b).sum()
    }

    pub fn norm(&self, f: &[f64]) -> f64 {
        self.dot(f, f).sqrt()
    }

    /// `∫ f · conj(g)`.
    pub fn cdot(&self, f: &[Complex64], g: &[Complex64]) -> Complex64 {
        self.w
            .iter()
            .zip(f)
            .zip(g)
            .map(|((w, a), b)| a * b.conj() * *w)
            .sum()
    }

    pub fn cnorm(&self, f: &[Complex64]) -> f64 {
        self.w
            .iter()
            .zip(f)
            .map(|(w, a)| w * a.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// Grid values to the scaled coordinates `√w · f` in which the weighted
    /// inner product is Euclidean.
    pub fn to_flat(&self, f: &[f64]) -> Vec<f64> {
        f.iter().zip(&self.sqrt_w).map(|(a, s)| a * s).collect()
    }

    pub fn from_flat(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.sqrt_w).map(|(a, s)| a / s).collect()
    }

    pub fn to_flat_c(&self, f: &[Complex64]) -> Vec<Complex64> {
        f.iter().zip(&self.sqrt_w).map(|(a, s)| a * s).collect()
    }

    pub fn from_flat_c(&self, x: &[Complex64]) -> Vec<Complex64> {
        x.iter().zip(&self.sqrt_w).map(|(a, s)| a / s).collect()
    }

    /// Radial `H¹` inner product `∫ (u'·conj(v') + u·conj(v)) 4πr² dr`.
    ///
    /// Derivatives are one-sided differences placed at the cell midpoints;
    /// the first cell uses `u'(0) = 0` (the mirror `u_0 = u_1`) and the last
    /// one the Dirichlet ghost `u_{n+1} = 0`.
    pub fn h1_dot(&self, u: &[Complex64], v: &[Complex64]) -> Complex64 {
        let n = self.len();
        let h = self.h;
        let mut grad = Complex64::new(0.0, 0.0);
        for i in 0..n {
            let (du, dv) = if i + 1 < n {
                (u[i + 1] - u[i], v[i + 1] - v[i])
            } else {
                (-u[i], -v[i])
            };
            let rm = (i as f64 + 1.5) * h;
            grad += du * dv.conj() * (4.0 * PI * rm * rm / h);
        }
        grad + self.cdot(u, v)
    }

    pub fn h1_norm(&self, u: &[Complex64]) -> f64 {
        self.h1_dot(u, u).re.max(0.0).sqrt()
    }

    /// Linear interpolation of `f` (given on this grid) at radius `r`;
    /// zero beyond the Dirichlet node, even extension through the origin.
    pub fn interpolate(&self, f: &[f64], r: f64) -> f64 {
        let n = self.len();
        let x = r / self.h;
        if x <= 1.0 {
            // Between the even mirror at -h and r_1 the profile is flat to O(h²).
            let slope = (f[1] - f[0]) / (3.0 * self.h);
            return f[0] + slope * (r * r / self.h - self.h);
        }
        let i = x.floor() as usize;
        if i >= n + 1 {
            return 0.0;
        }
        let t = x - i as f64;
        let left = f[i - 1];
        let right = if i < n { f[i] } else { 0.0 };
        left * (1.0 - t) + right * t
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_quadrature_matches_closed_form() {
        let grid = RadialGrid::new(8.0, 400).unwrap();
        let f: Vec<f64> = grid.nodes().iter().map(|r| (-r * r).exp()).collect();
        let exact = PI.powf(1.5);
        let got = grid.integrate(&f);
        assert!(((got - exact) / exact).abs() <= 1e-6, "{got} vs {exact}");
    }

    #[test]
    fn weights_positive_and_nodes_increasing() {
        let grid = RadialGrid::new(30.0, 2000).unwrap();
        assert!(grid.weights().iter().all(|&w| w > 0.0));
        assert!(grid.nodes().windows(2).all(|p| p[1] > p[0]));
        assert!(grid.nodes()[0] > 0.0);
        assert!((grid.nodes()[grid.len() - 1] - 30.0).abs() < 1e-12);
    }

    #[test]
    fn flat_coordinates_preserve_inner_product() {
        let grid = RadialGrid::new(10.0, 100).unwrap();
        let f: Vec<f64> = grid.nodes().iter().map(|r| (-r).exp()).collect();
        let g: Vec<f64> = grid.nodes().iter().map(|r| (-0.5 * r * r).exp() * r).collect();
        let x = grid.to_flat(&f);
        let y = grid.to_flat(&g);
        let flat: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
        assert!((flat - grid.dot(&f, &g)).abs() < 1e-12);
        let back = grid.from_flat(&x);
        assert!(back.iter().zip(&f).all(|(a, b)| (a - b).abs() < 1e-14));
    }

    #[test]
    fn h1_norm_of_gaussian() {
        // ∫ (|u'|² + |u|²) 4πr² dr for u = exp(-r²/2): π^{3/2}(3/2 + 1).
        let grid = RadialGrid::new(12.0, 3000).unwrap();
        let u: Vec<Complex64> = grid
            .nodes()
            .iter()
            .map(|r| Complex64::new((-0.5 * r * r).exp(), 0.0))
            .collect();
        let exact = PI.powf(1.5) * 2.5;
        let got = grid.h1_norm(&u).powi(2);
        assert!(((got - exact) / exact).abs() < 1e-4, "{got} vs {exact}");
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(RadialGrid::new(-1.0, 100).is_err());
        assert!(RadialGrid::new(10.0, 3).is_err());
    }
}
