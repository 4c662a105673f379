//! Outgoing resolvent `R⁺(Λ) = (H − Λ − i0)⁻¹` on a truncated domain, and the
//! continuous-spectrum projection `P_c`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{BandMatrix, DenseMatrix};
use crate::operators::{LinearizedOperator, Spinor};

type C = Complex64;

/// How the truncated domain is kept from reflecting outgoing waves.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Absorption {
    /// Plain Dirichlet wall; only usable with a domain much longer than `1/ε`.
    None,
    /// Exact discrete outgoing condition at the last node.
    Transparent,
    /// Complex absorbing potential `−iW(r)`, quadratic ramp on `r ≥ 0.8 r_max`.
    Cap { strength: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LimitingAbsorptionConfig {
    /// First `ε` as a fraction of `ω`; later values halve.
    pub epsilon_start: f64,
    pub points: usize,
    /// Largest relative change between the last two extrapolants.
    pub plateau_tol: f64,
    pub absorption: Absorption,
}

impl Default for LimitingAbsorptionConfig {
    fn default() -> Self {
        LimitingAbsorptionConfig {
            epsilon_start: 0.1,
            points: 6,
            plateau_tol: 0.1,
            absorption: Absorption::Transparent,
        }
    }
}

impl LimitingAbsorptionConfig {
    pub fn epsilons(&self, omega: f64) -> Vec<f64> {
        (0..self.points)
            .map(|k| self.epsilon_start * omega * 0.5f64.powi(k as i32))
            .collect()
    }
}

/// `⟨R(Λ + iε) f, g⟩` for each `ε` and its extrapolation to `ε → 0⁺`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LimitingAbsorption {
    pub energy: f64,
    pub samples: Vec<(f64, C)>,
    pub extrapolated: C,
    /// Relative change of the imaginary part between the last two extrapolants.
    pub spread: f64,
}

/// Root of `μ + 1/μ = t` inside the unit disk, or on the circle with `Im μ > 0`.
fn decaying_root(t: C) -> C {
    let d = (t * t - 4.0).sqrt();
    let (m1, m2) = ((t + d) / 2.0, (t - d) / 2.0);
    let (a, b) = if m1.norm() < m2.norm() { (m1, m2) } else { (m2, m1) };
    if (a.norm() - 1.0).abs() < 1e-12 && (b.norm() - 1.0).abs() < 1e-12 {
        if a.im > 0.0 {
            a
        } else {
            b
        }
    } else {
        a
    }
}

/// `H − z` with the selected boundary treatment, interleaved flat layout.
pub fn outgoing_band(h: &LinearizedOperator, z: C, absorption: Absorption) -> Result<BandMatrix> {
    let mut m = h.band(z);
    let grid = h.grid();
    let n = grid.len();
    let hh = grid.h();
    match absorption {
        Absorption::None => {}
        Absorption::Transparent => {
            // Far field: up rows are −Δ + ω − z, down rows are Δ − ω − z.
            let mu1 = decaying_root(C::new(2.0, 0.0) - (z - h.omega) * hh * hh);
            let mu2 = decaying_root(C::new(2.0, 0.0) + (z + h.omega) * hh * hh);
            m.add(2 * n - 2, 2 * n - 2, -mu1 / (hh * hh));
            m.add(2 * n - 1, 2 * n - 1, mu2 / (hh * hh));
        }
        Absorption::Cap { strength } => {
            if !(strength > 0.0) {
                return Err(Error::InvalidInput(format!("absorber strength must be positive, got {strength}")));
            }
            let r0 = 0.8 * grid.r_max();
            for (i, &r) in grid.nodes().iter().enumerate() {
                if r >= r0 {
                    let s = (r - r0) / (grid.r_max() - r0);
                    m.add(2 * i, 2 * i, C::new(0.0, -strength * s * s));
                }
            }
        }
    }
    Ok(m)
}

/// `⟨(H − z)⁻¹ f, g⟩`.
pub fn resolvent_form(h: &LinearizedOperator, z: C, f: &Spinor, g: &Spinor, absorption: Absorption) -> Result<C> {
    let grid = h.grid();
    let lu = outgoing_band(h, z, absorption)?.factor()?;
    let x = lu.solve(&f.to_flat_interleaved(grid));
    let y = g.to_flat_interleaved(grid);
    Ok(x.iter().zip(&y).map(|(a, b)| a * b.conj()).sum())
}

/// Richardson table in `ε` (halving), returning the diagonal.
pub fn richardson_diagonal(values: &[C]) -> Vec<C> {
    let mut prev: Vec<C> = Vec::new();
    let mut diag = Vec::with_capacity(values.len());
    for (k, &v) in values.iter().enumerate() {
        let mut row = vec![v];
        for l in 1..=k {
            let f = 2f64.powi(l as i32) - 1.0;
            let t = row[l - 1] + (row[l - 1] - prev[l - 1]) / f;
            row.push(t);
        }
        diag.push(row[k]);
        prev = row;
    }
    diag
}

/// Limiting absorption `lim_{ε→0⁺} ⟨R(Λ + iε) f, g⟩`.
///
/// `floor` is the absolute size below which the imaginary part counts as zero
/// when judging the plateau.
pub fn limiting_absorption(
    h: &LinearizedOperator,
    energy: f64,
    f: &Spinor,
    g: &Spinor,
    cfg: &LimitingAbsorptionConfig,
    floor: f64,
) -> Result<LimitingAbsorption> {
    use rayon::prelude::*;
    if !(energy > h.omega) {
        return Err(Error::WrongSide { energy, omega: h.omega });
    }
    if cfg.points < 4 {
        return Err(Error::InvalidInput(format!("need at least 4 epsilon values, got {}", cfg.points)));
    }
    let eps = cfg.epsilons(h.omega);
    let values = eps
        .par_iter()
        .map(|&e| resolvent_form(h, C::new(energy, e), f, g, cfg.absorption))
        .collect::<Result<Vec<C>>>()?;
    let diag = richardson_diagonal(&values);
    let k = diag.len() - 1;
    let (last, before) = (diag[k], diag[k - 1]);
    let spread = (last.im - before.im).abs() / last.im.abs().max(floor).max(f64::MIN_POSITIVE);
    if !spread.is_finite() || spread > cfg.plateau_tol {
        return Err(Error::NoExtrapolationPlateau(spread));
    }
    Ok(LimitingAbsorption {
        energy,
        samples: eps.into_iter().zip(values).collect(),
        extrapolated: last,
        spread,
    })
}

/// `P_c = 1 − Σ v_a (M⁻¹)_{ab} ⟨·, w_b⟩` for the discrete spectral subspace
/// spanned by `v` with `σ₃`-dual vectors `w`.
#[derive(Clone, Debug)]
pub struct ContinuumProjector {
    pub v: Vec<Spinor>,
    pub w: Vec<Spinor>,
    gram_inv: Option<DenseMatrix>,
}

impl ContinuumProjector {
    pub fn identity() -> Self {
        ContinuumProjector {
            v: Vec::new(),
            w: Vec::new(),
            gram_inv: None,
        }
    }

    /// Generalized kernel `{σ₃Φ, ∂_ωΦ}` plus each real gap mode `ξ_j` and its
    /// partner `σ₁ξ_j`; the operator must carry a profile with `∂_ωφ`.
    pub fn new(h: &LinearizedOperator, gap_modes: &[Spinor]) -> Result<Self> {
        let phi = h.phi_spinor()?;
        let dphi = h.d_omega_phi()?;
        let mut v = vec![phi.sigma3(), dphi.clone()];
        let mut w = vec![phi, dphi.sigma3()];
        for xi in gap_modes {
            v.push(xi.clone());
            w.push(xi.sigma3());
            v.push(xi.sigma1());
            w.push(xi.sigma1().sigma3());
        }
        Self::from_pairs(h, v, w)
    }

    pub fn from_pairs(h: &LinearizedOperator, v: Vec<Spinor>, w: Vec<Spinor>) -> Result<Self> {
        let grid = h.grid();
        let k = v.len();
        let mut m = DenseMatrix::zeros(k);
        for b in 0..k {
            for a in 0..k {
                m.set(b, a, v[a].dot(&w[b], grid).re);
            }
        }
        let gram_inv = if k == 0 {
            None
        } else {
            Some(m.inverse().ok_or_else(|| Error::IllConditioned(0.0))?)
        };
        Ok(ContinuumProjector { v, w, gram_inv })
    }

    pub fn apply(&self, f: &Spinor, h: &LinearizedOperator) -> Spinor {
        let Some(inv) = &self.gram_inv else {
            return f.clone();
        };
        let grid = h.grid();
        let rhs: Vec<C> = self.w.iter().map(|w| f.dot(w, grid)).collect();
        let mut out = f.clone();
        for (a, va) in self.v.iter().enumerate() {
            let c: C = rhs.iter().enumerate().map(|(b, r)| r * inv.get(a, b)).sum();
            out.axpy(-c, va);
        }
        out
    }
}
