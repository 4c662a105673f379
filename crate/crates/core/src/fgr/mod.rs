//! Taylor coefficients of the nonlinear remainder, the resonance set and
//! Fermi Golden Rule coefficients.
//!
//! Writing `u = e^{iωt}(φ + r)` and `R = (r, r̄)`, the perturbation obeys
//! `iR_t = HR + 𝒩(R)` with `𝒩 = (−P₁, P₂)`, where `P₁` and `P₂` are the
//! parts of degree at least two of `β(|φ + r|²)(φ + r)` and its conjugate.
//! Substituting `R = Σ (z_j ξ_j + z̄_j σ₁ξ_j) + f` gives
//!
//! ```text
//! 𝒩 = Σ R_{m,n} z^m z̄^n + Σ z^m z̄^n A_{m,n} f + O(f²)
//! ```
//!
//! with real `R_{m,n}` and pointwise 2×2 matrices `A_{m,n}`.

mod poly;
pub mod resolvent;

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::RadialGrid;
use crate::nonlinearity::Nonlinearity;
use crate::operators::{LinearizedOperator, Spinor};
use crate::profile::Profile;
use crate::spectral::Spectrum;

use poly::Layout;
pub use resolvent::{
    limiting_absorption, outgoing_band, resolvent_form, richardson_diagonal, Absorption, ContinuumProjector,
    LimitingAbsorption, LimitingAbsorptionConfig,
};

pub type MultiIndex = Vec<usize>;

/// A real gap eigenvalue `λ_j ∈ (0, ω)` with its real eigenvector.
#[derive(Clone, Debug)]
pub struct GapMode {
    pub lambda: f64,
    pub xi: Spinor,
    /// Krein signature `s_j = ⟨ξ_j, σ₃ξ_j⟩` (`±1` after normalization).
    pub signature: f64,
}

impl GapMode {
    /// Positive gap modes of a computed spectrum, ascending in `λ`.
    pub fn from_spectrum(spectrum: &Spectrum) -> Vec<GapMode> {
        spectrum
            .positive_gap_modes()
            .into_iter()
            .filter_map(|m| {
                m.xi.as_ref().map(|xi| GapMode {
                    lambda: m.lambda.re,
                    xi: xi.clone(),
                    signature: m.sigma3_norm,
                })
            })
            .collect()
    }
}

/// Pointwise matrix field acting on `f = (f¹, f²)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PointwiseMatrix {
    /// `entries[i][k]` multiplies `f^k` in component `i`.
    pub entries: [[Vec<f64>; 2]; 2],
}

impl PointwiseMatrix {
    fn zeros(n: usize) -> Self {
        PointwiseMatrix {
            entries: [[vec![0.0; n], vec![0.0; n]], [vec![0.0; n], vec![0.0; n]]],
        }
    }

    pub fn apply(&self, f: &Spinor) -> Spinor {
        let e = &self.entries;
        Spinor {
            up: (0..f.len()).map(|i| f.up[i] * e[0][0][i] + f.down[i] * e[0][1][i]).collect(),
            down: (0..f.len()).map(|i| f.up[i] * e[1][0][i] + f.down[i] * e[1][1][i]).collect(),
        }
    }

    pub fn transpose_apply(&self, f: &Spinor) -> Spinor {
        let e = &self.entries;
        Spinor {
            up: (0..f.len()).map(|i| f.up[i] * e[0][0][i] + f.down[i] * e[1][0][i]).collect(),
            down: (0..f.len()).map(|i| f.up[i] * e[0][1][i] + f.down[i] * e[1][1][i]).collect(),
        }
    }

    /// `σ₁Aσ₁`.
    pub fn sigma1_conjugate(&self) -> Self {
        let e = &self.entries;
        PointwiseMatrix {
            entries: [[e[1][1].clone(), e[1][0].clone()], [e[0][1].clone(), e[0][0].clone()]],
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().flatten().flatten().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Coefficients `R_{m,n}` (`2 ≤ |m+n| ≤ order`) and `A_{m,n}` (`|m+n| ≤ order − 1`).
#[derive(Clone, Debug)]
pub struct TaylorCoefficients {
    pub omega: f64,
    pub order: usize,
    pub modes: Vec<GapMode>,
    pub r: BTreeMap<(MultiIndex, MultiIndex), Spinor>,
    pub a: BTreeMap<(MultiIndex, MultiIndex), PointwiseMatrix>,
}

impl TaylorCoefficients {
    pub fn r(&self, m: &[usize], n: &[usize]) -> Result<&Spinor> {
        self.r
            .get(&(m.to_vec(), n.to_vec()))
            .ok_or_else(|| Error::InvalidInput(format!("coefficient R_({m:?},{n:?}) was not assembled")))
    }

    pub fn a(&self, m: &[usize], n: &[usize]) -> Result<&PointwiseMatrix> {
        self.a
            .get(&(m.to_vec(), n.to_vec()))
            .ok_or_else(|| Error::InvalidInput(format!("coefficient A_({m:?},{n:?}) was not assembled")))
    }

    /// Worst of `‖σ₁R_{m,n} + R_{n,m}‖_∞` and `‖A_{m,n} + σ₁A_{n,m}σ₁‖_∞`
    /// over pairs where both members are present, relative to the largest entry.
    pub fn symmetry_residual(&self) -> f64 {
        let mut worst = 0.0f64;
        let mut scale = f64::MIN_POSITIVE;
        for ((m, n), v) in &self.r {
            scale = scale.max(v.max_abs());
            if let Some(w) = self.r.get(&(n.clone(), m.clone())) {
                let d = v.sigma1();
                let e = (0..v.len())
                    .map(|i| (d.up[i] + w.up[i]).norm().max((d.down[i] + w.down[i]).norm()))
                    .fold(0.0, f64::max);
                worst = worst.max(e);
            }
        }
        for ((m, n), v) in &self.a {
            scale = scale.max(v.max_abs());
            if let Some(w) = self.a.get(&(n.clone(), m.clone())) {
                let s = w.sigma1_conjugate();
                for (x, y) in v.entries.iter().flatten().zip(s.entries.iter().flatten()) {
                    for (p, q) in x.iter().zip(y) {
                        worst = worst.max((p + q).abs());
                    }
                }
            }
        }
        worst / scale
    }

    /// Largest fraction of weighted mass beyond `r_max / 2` over all coefficients.
    pub fn tail_fraction(&self, grid: &RadialGrid) -> f64 {
        let half = 0.5 * grid.r_max();
        let w = grid.weights();
        let frac = |vals: &mut dyn Iterator<Item = f64>| {
            let (mut tot, mut tail) = (0.0, 0.0);
            for (i, v) in vals.enumerate() {
                let m = w[i % w.len()] * v * v;
                tot += m;
                if grid.nodes()[i % w.len()] >= half {
                    tail += m;
                }
            }
            if tot > 0.0 {
                tail / tot
            } else {
                0.0
            }
        };
        let mut worst = 0.0f64;
        for v in self.r.values() {
            worst = worst.max(frac(&mut v.up.iter().chain(&v.down).map(|z| z.re)));
        }
        for a in self.a.values() {
            worst = worst.max(frac(&mut a.entries.iter().flatten().flatten().copied()));
        }
        worst
    }
}

/// Which coefficients to keep.
#[derive(Clone, Debug)]
pub enum Selection {
    /// Everything up to the order.
    Full,
    /// `R_{k,0}` for `k ∈ Res` and `A_{0,k−δ_j}` for `k_j ≥ 1`.
    Resonant(Vec<MultiIndex>),
}

/// Expands the nonlinear remainder pointwise to the given total order in
/// `(z, z̄)` and first order in `f`.
pub fn taylor_coefficients(nl: &Nonlinearity, profile: &Profile, modes: &[GapMode], order: usize) -> Result<TaylorCoefficients> {
    assemble(nl, profile, modes, order, &Selection::Full)
}

/// Only the coefficients the Fermi Golden Rule needs for `res`.
pub fn taylor_coefficients_for(nl: &Nonlinearity, profile: &Profile, modes: &[GapMode], res: &ResonanceSet) -> Result<TaylorCoefficients> {
    let order = res.members.iter().map(|m| m.iter().sum::<usize>()).max().unwrap_or(2).max(2);
    assemble(nl, profile, modes, order, &Selection::Resonant(res.members.clone()))
}

pub fn assemble(
    nl: &Nonlinearity,
    profile: &Profile,
    modes: &[GapMode],
    order: usize,
    selection: &Selection,
) -> Result<TaylorCoefficients> {
    if order < 2 {
        return Err(Error::InvalidInput(format!("Taylor order must be at least 2, got {order}")));
    }
    if order > nl.smoothness() {
        return Err(Error::InsufficientSmoothness {
            order,
            available: nl.smoothness(),
        });
    }
    let n = profile.grid.len();
    let jm = modes.len();
    for m in modes {
        if m.xi.len() != n {
            return Err(Error::GridMismatch("mode length differs from profile".into()));
        }
    }
    let layout = Layout::new(jm, order);
    let (keep_r, keep_a) = wanted(&layout, selection);

    // Coefficient planes indexed by monomial, then grid point.
    let mut up = vec![Vec::new(); layout.len()];
    let mut down = vec![Vec::new(); layout.len()];
    for k in 0..layout.len() {
        if keep_r[k] || keep_a[k] {
            up[k] = vec![0.0; n];
            down[k] = vec![0.0; n];
        }
    }
    let mut fact = vec![1.0; order + 1];
    for k in 1..=order {
        fact[k] = fact[k - 1] * k as f64;
    }
    for i in 0..n {
        let phi = profile.values[i];
        let x1: Vec<f64> = modes.iter().map(|m| m.xi.up[i].re).collect();
        let x2: Vec<f64> = modes.iter().map(|m| m.xi.down[i].re).collect();
        let a = layout.linear(&x1, &x2, [1.0, 0.0]);
        let b = layout.linear(&x2, &x1, [0.0, 1.0]);
        let mut ds = layout.mul(&a, &b);
        for (d, (p, q)) in ds.iter_mut().zip(a.iter().zip(&b)) {
            *d += phi * (p + q);
        }
        let s0 = phi * phi;
        let mut beta = layout.constant(nl.derivative(order, s0) / fact[order]);
        for k in (0..order).rev() {
            beta = layout.mul(&beta, &ds);
            beta[0] += nl.derivative(k, s0) / fact[k];
        }
        let mut pa = a.clone();
        pa[0] += phi;
        let mut pb = b.clone();
        pb[0] += phi;
        let p1 = layout.mul(&beta, &pa);
        let p2 = layout.mul(&beta, &pb);
        for k in 0..layout.len() {
            if !up[k].is_empty() {
                up[k][i] = -p1[k];
                down[k][i] = p2[k];
            }
        }
    }
    for (k, v) in up.iter().chain(&down).enumerate() {
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite Taylor coefficient (monomial {}); beta derivatives blow up on the profile",
                k % layout.len()
            )));
        }
    }

    let mut r = BTreeMap::new();
    let mut am: BTreeMap<(MultiIndex, MultiIndex), PointwiseMatrix> = BTreeMap::new();
    for (k, mono) in layout.monomials.iter().enumerate() {
        let m: MultiIndex = mono[..jm].iter().map(|&e| e as usize).collect();
        let nn: MultiIndex = mono[jm..2 * jm].iter().map(|&e| e as usize).collect();
        let (fu, fv) = (mono[2 * jm], mono[2 * jm + 1]);
        if keep_r[k] {
            r.insert((m, nn), Spinor::from_real(&up[k], &down[k]));
        } else if keep_a[k] {
            let c = if fu == 1 { 0 } else { 1 };
            debug_assert!(fu + fv == 1);
            let e = am.entry((m, nn)).or_insert_with(|| PointwiseMatrix::zeros(n));
            e.entries[0][c] = up[k].clone();
            e.entries[1][c] = down[k].clone();
        }
    }
    Ok(TaylorCoefficients {
        omega: profile.omega,
        order,
        modes: modes.to_vec(),
        r,
        a: am,
    })
}

fn wanted(layout: &Layout, selection: &Selection) -> (Vec<bool>, Vec<bool>) {
    let jm = layout.modes;
    let mut keep_r = vec![false; layout.len()];
    let mut keep_a = vec![false; layout.len()];
    for (k, mono) in layout.monomials.iter().enumerate() {
        let f = mono[2 * jm] + mono[2 * jm + 1];
        let d = layout.degree(k);
        if f == 0 && d >= 2 {
            keep_r[k] = true;
        } else if f == 1 && d >= 2 {
            keep_a[k] = true;
        }
    }
    if let Selection::Resonant(members) = selection {
        let zeros = vec![0usize; jm];
        let mut r = vec![false; layout.len()];
        let mut a = vec![false; layout.len()];
        for kidx in members {
            if let Some(i) = layout.find(kidx, &zeros, None) {
                r[i] = true;
            }
            for j in 0..jm {
                if kidx[j] >= 1 {
                    let mut m = kidx.clone();
                    m[j] -= 1;
                    for c in 0..2 {
                        if let Some(i) = layout.find(&zeros, &m, Some(c)) {
                            a[i] = true;
                        }
                    }
                }
            }
        }
        for k in 0..layout.len() {
            keep_r[k] &= r[k];
            keep_a[k] &= a[k];
        }
    }
    (keep_r, keep_a)
}

/// Multi-indices `m` with `m·λ > ω` whose every strictly smaller index lies below `ω`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResonanceSet {
    pub members: Vec<MultiIndex>,
    pub lambda: Vec<f64>,
    pub omega: f64,
    /// `N_j = ⌊ω/λ_j⌋`.
    pub n_j: Vec<usize>,
    pub n_max: usize,
}

/// Tolerance on `|m·λ − ω|` below which a configuration counts as resonant.
pub const NONDEGENERACY_TOL: f64 = 1e-9;

fn for_each_index(dim: usize, cap: usize, visit: &mut dyn FnMut(&[usize])) {
    fn rec(cur: &mut Vec<usize>, pos: usize, left: usize, visit: &mut dyn FnMut(&[usize])) {
        if pos == cur.len() {
            visit(cur);
            return;
        }
        for e in 0..=left {
            cur[pos] = e;
            rec(cur, pos + 1, left - e, visit);
        }
        cur[pos] = 0;
    }
    let mut cur = vec![0; dim];
    rec(&mut cur, 0, cap, visit);
}

fn dot(m: &[usize], lambda: &[f64]) -> f64 {
    m.iter().zip(lambda).map(|(&k, l)| k as f64 * l).sum()
}

/// Enumerates the resonance set over all `|m| ≤ cap`.
pub fn resonance_set(lambda: &[f64], omega: f64, cap: usize) -> Result<ResonanceSet> {
    if lambda.is_empty() {
        return Err(Error::InvalidInput("no gap eigenvalues".into()));
    }
    if let Some(l) = lambda.iter().find(|&&l| !(l > 0.0 && l < omega)) {
        return Err(Error::InvalidInput(format!("gap eigenvalue {l} is not in (0, omega = {omega})")));
    }
    let mut degenerate = None;
    let mut members = Vec::new();
    for_each_index(lambda.len(), cap, &mut |m| {
        let e = dot(m, lambda);
        if m.iter().any(|&k| k > 0) && (e - omega).abs() <= NONDEGENERACY_TOL && degenerate.is_none() {
            degenerate = Some((m.to_vec(), (e - omega).abs()));
        }
        if e > omega
            && (0..m.len())
                .filter(|&k| m[k] >= 1)
                .all(|k| e - lambda[k] < omega)
        {
            members.push(m.to_vec());
        }
    });
    if let Some((m, gap)) = degenerate {
        return Err(Error::ResonantConfiguration { m, gap });
    }
    members.sort_by(|a, b| a.iter().sum::<usize>().cmp(&b.iter().sum()).then(b.cmp(a)));
    let n_j: Vec<usize> = lambda.iter().map(|l| (omega / l).floor() as usize).collect();
    Ok(ResonanceSet {
        members,
        lambda: lambda.to_vec(),
        omega,
        n_max: n_j.iter().copied().max().unwrap_or(0),
        n_j,
    })
}

impl ResonanceSet {
    /// Pairs `(m, j)` with `m + δ_j ∈ Res`.
    pub fn pairs(&self) -> Vec<(MultiIndex, usize)> {
        let mut out = BTreeSet::new();
        for k in &self.members {
            for j in 0..k.len() {
                if k[j] >= 1 {
                    let mut m = k.clone();
                    m[j] -= 1;
                    out.insert((m, j));
                }
            }
        }
        out.into_iter().collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FgrConfig {
    pub limiting: LimitingAbsorptionConfig,
    /// `Γ ≥ −positivity_tol · scale` counts as nonnegative.
    pub positivity_tol: f64,
}

impl Default for FgrConfig {
    fn default() -> Self {
        FgrConfig {
            limiting: LimitingAbsorptionConfig::default(),
            positivity_tol: 1e-6,
        }
    }
}

/// One `Γ_{m+δ_j, j}` with its limiting-absorption trail.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FgrEntry {
    pub m: MultiIndex,
    pub j: usize,
    /// `Λ = m·λ + λ_j`.
    pub energy: f64,
    pub gamma: f64,
    /// `‖R‖·‖Aᵀσ₃ξ_j‖/ω`, the natural size of the pairing.
    pub scale: f64,
    pub nonnegative: bool,
    pub spread: f64,
    /// `(ε, Re, Im)` of each regularized value.
    pub samples: Vec<[f64; 3]>,
}

impl FgrEntry {
    pub fn key(&self) -> String {
        fgr_key(&self.m, self.j)
    }
}

pub fn fgr_key(m: &[usize], j: usize) -> String {
    let s: Vec<String> = m.iter().map(|k| k.to_string()).collect();
    format!("{}|{}", s.join(","), j)
}

fn entry_from(m: &[usize], j: usize, la: &LimitingAbsorption, value: f64, scale: f64, cfg: &FgrConfig) -> FgrEntry {
    FgrEntry {
        m: m.to_vec(),
        j,
        energy: la.energy,
        gamma: value,
        scale,
        nonnegative: value >= -cfg.positivity_tol * scale,
        spread: la.spread,
        samples: la.samples.iter().map(|(e, z)| [*e, z.re, z.im]).collect(),
    }
}

/// `Γ_{m+δ_j, j} = Im⟨A_{0,m} R⁺(m·λ + λ_j) P_c R_{m+δ_j,0}, σ₃ξ_j⟩`.
pub fn fgr_coefficient(
    h: &LinearizedOperator,
    coeffs: &TaylorCoefficients,
    projector: &ContinuumProjector,
    m: &[usize],
    j: usize,
    cfg: &FgrConfig,
) -> Result<FgrEntry> {
    let modes = &coeffs.modes;
    if m.len() != modes.len() || j >= modes.len() {
        return Err(Error::InvalidInput(format!("index {m:?}|{j} does not match {} modes", modes.len())));
    }
    let mut k = m.to_vec();
    k[j] += 1;
    let zeros = vec![0; m.len()];
    let lambda: Vec<f64> = modes.iter().map(|g| g.lambda).collect();
    let energy = dot(m, &lambda) + lambda[j];
    let rk = coeffs.r(&k, &zeros)?;
    let a = coeffs.a(&zeros, m)?;
    let f = projector.apply(rk, h);
    let g = a.transpose_apply(&modes[j].xi.sigma3());
    let grid = h.grid();
    let scale = rk.norm(grid) * g.norm(grid) / h.omega;
    let la = limiting_absorption(h, energy, &f, &g, &cfg.limiting, cfg.positivity_tol * scale)?;
    Ok(entry_from(m, j, &la, la.extrapolated.im, scale, cfg))
}

/// All `Γ_{m+δ_j, j}` over the resonance set, keyed `"m|j"`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FgrMatrix {
    pub omega: f64,
    pub lambda: Vec<f64>,
    pub epsilon_sequence: Vec<f64>,
    pub entries: BTreeMap<String, FgrEntry>,
}

impl FgrMatrix {
    pub fn get(&self, m: &[usize], j: usize) -> Option<&FgrEntry> {
        self.entries.get(&fgr_key(m, j))
    }

    pub fn all_nonnegative(&self) -> bool {
        self.entries.values().all(|e| e.nonnegative)
    }

    /// Worst relative disagreement with another matrix over shared keys.
    pub fn relative_difference(&self, other: &FgrMatrix) -> f64 {
        self.entries
            .iter()
            .filter_map(|(k, e)| other.entries.get(k).map(|o| (e.gamma, o.gamma)))
            .map(|(a, b)| (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE))
            .fold(0.0, f64::max)
    }

    pub fn write_diagnostics_csv<W: Write>(&self, key: &str, mut out: W) -> Result<()> {
        let e = self
            .entries
            .get(key)
            .ok_or_else(|| Error::InvalidInput(format!("no FGR entry {key}")))?;
        writeln!(out, "epsilon,re_value,im_value")?;
        for s in &e.samples {
            writeln!(out, "{:.12e},{:.12e},{:.12e}", s[0], s[1], s[2])?;
        }
        Ok(())
    }
}

pub fn fgr_matrix(
    h: &LinearizedOperator,
    coeffs: &TaylorCoefficients,
    projector: &ContinuumProjector,
    res: &ResonanceSet,
    cfg: &FgrConfig,
) -> Result<FgrMatrix> {
    use rayon::prelude::*;
    let entries = res
        .pairs()
        .par_iter()
        .map(|(m, j)| fgr_coefficient(h, coeffs, projector, m, *j, cfg))
        .collect::<Result<Vec<_>>>()?;
    Ok(FgrMatrix {
        omega: h.omega,
        lambda: res.lambda.clone(),
        epsilon_sequence: cfg.limiting.epsilons(h.omega),
        entries: entries.into_iter().map(|e| (e.key(), e)).collect(),
    })
}

/// Sphere integral `(1/(2ρ₀))∫_{|η|=ρ₀}|F̂₁(η)|² dσ = 2πρ₀|F̂₁(ρ₀)|²` for a radial
/// `F₁`, with `F̂₁(ρ) = (4π/ρ)∫ r sin(ρr) F₁(r) dr`.
pub fn fgr_free_oracle(f1: &[f64], grid: &RadialGrid, rho0: f64) -> Result<f64> {
    if !(rho0 > 0.0) || !rho0.is_finite() {
        return Err(Error::DomainError(format!("rho0 must be positive, got {rho0}")));
    }
    if f1.len() != grid.len() {
        return Err(Error::GridMismatch("oracle input length".into()));
    }
    // Trapezoid on the uniform grid; the integrand vanishes at r = 0.
    let s: f64 = grid.nodes().iter().zip(f1).map(|(&r, &v)| r * (rho0 * r).sin() * v).sum();
    let ft = 4.0 * std::f64::consts::PI / rho0 * grid.h() * s;
    Ok(2.0 * std::f64::consts::PI * rho0 * ft * ft)
}

/// Both sides of the conjectured identity
/// `Γ_{m+δ_j,j} = (m_j + 1) Im⟨R⁺ P_c R_{m+δ_j,0}, σ₃R_{m+δ_j,0}⟩`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hypothesis44 {
    pub m: MultiIndex,
    pub j: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub relative_gap: f64,
}

pub fn hypothesis44_compare(
    h: &LinearizedOperator,
    coeffs: &TaylorCoefficients,
    projector: &ContinuumProjector,
    m: &[usize],
    j: usize,
    cfg: &FgrConfig,
) -> Result<Hypothesis44> {
    let lhs = fgr_coefficient(h, coeffs, projector, m, j, cfg)?;
    let mut k = m.to_vec();
    k[j] += 1;
    let zeros = vec![0; m.len()];
    let rk = coeffs.r(&k, &zeros)?;
    let f = projector.apply(rk, h);
    let g = rk.sigma3();
    let grid = h.grid();
    let scale = rk.norm(grid).powi(2) / h.omega;
    let la = limiting_absorption(h, lhs.energy, &f, &g, &cfg.limiting, cfg.positivity_tol * scale)?;
    let rhs = (m[j] + 1) as f64 * la.extrapolated.im;
    let relative_gap = (lhs.gamma - rhs).abs() / lhs.gamma.abs().max(rhs.abs()).max(f64::MIN_POSITIVE);
    Ok(Hypothesis44 {
        m: m.to_vec(),
        j,
        lhs: lhs.gamma,
        rhs,
        relative_gap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_mode_resonance() {
        let res = resonance_set(&[0.6], 1.0, 6).unwrap();
        assert_eq!(res.members, vec![vec![2]]);
        assert_eq!(res.n_j, vec![1]);
    }

    #[test]
    fn two_mode_resonance() {
        let res = resonance_set(&[0.6, 0.45], 1.0, 6).unwrap();
        for m in [vec![2, 0], vec![0, 3], vec![1, 1]] {
            assert!(res.members.contains(&m), "{m:?} missing");
        }
    }

    #[test]
    fn exact_resonance_is_rejected() {
        let err = resonance_set(&[0.5], 1.0, 4).unwrap_err();
        assert!(matches!(err, Error::ResonantConfiguration { .. }));
    }

    #[test]
    fn keys_round_trip() {
        assert_eq!(fgr_key(&[1, 0], 1), "1,0|1");
    }
}
