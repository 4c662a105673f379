//! Modulation decomposition `u = e^{iγ}(φ_ω + r)`, projection of `R = (r, r̄)`
//! onto the gap modes, and the orbital distance.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fgr::GapMode;
use crate::grid::RadialGrid;
use crate::nonlinearity::Nonlinearity;
use crate::operators::Spinor;
use crate::profile::{continue_profile, d_omega_profile, Profile, ProfileConfig};

type C = Complex64;

/// The standing-wave family near a reference profile, re-solved by
/// continuation whenever a new `ω` is requested.
#[derive(Clone, Debug)]
pub struct OrbitFamily {
    pub nl: Nonlinearity,
    pub cfg: ProfileConfig,
    pub base: Profile,
}

/// `φ_ω`, `∂_ωφ_ω` and `q(ω)`, `q'(ω)` at one frequency.
#[derive(Clone, Debug)]
pub struct OrbitPoint {
    pub omega: f64,
    pub phi: Vec<f64>,
    pub d_phi: Vec<f64>,
    pub q: f64,
    pub dq: f64,
}

impl OrbitFamily {
    pub fn new(nl: &Nonlinearity, base: &Profile, cfg: &ProfileConfig) -> Result<Self> {
        base.d_omega()?;
        Ok(OrbitFamily {
            nl: nl.clone(),
            cfg: cfg.clone(),
            base: base.clone(),
        })
    }

    pub fn at(&self, omega: f64) -> Result<OrbitPoint> {
        let grid = &self.base.grid;
        let (phi, d_phi) = if omega == self.base.omega {
            (self.base.values.clone(), self.base.d_omega()?.to_vec())
        } else {
            let p = continue_profile(&self.nl, &self.base, omega, &self.cfg)?;
            let d = d_omega_profile(&self.nl, &p, &self.cfg)?;
            (p.values, d)
        };
        let q = grid.dot(&phi, &phi);
        let dq = 2.0 * grid.dot(&phi, &d_phi);
        Ok(OrbitPoint {
            omega,
            phi,
            d_phi,
            q,
            dq,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModulationConfig {
    pub max_iter: usize,
    /// Newton stops once `|Δω| ≤ tol·ω` and `|Δγ| ≤ tol`.
    pub tol: f64,
    /// Decomposition is refused when `‖e^{−iγ}u − φ‖ > max_relative_distance·‖φ‖`.
    pub max_relative_distance: f64,
    /// `|q'(ω)| ≤ slope_tol·q` counts as degenerate.
    pub slope_tol: f64,
}

impl Default for ModulationConfig {
    fn default() -> Self {
        ModulationConfig {
            max_iter: 40,
            tol: 1e-12,
            max_relative_distance: 0.5,
            slope_tol: 1e-10,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Decomposition {
    pub omega: f64,
    pub gamma: f64,
    /// `R = (r, r̄)`.
    pub residual: Spinor,
    pub iterations: usize,
}

impl Decomposition {
    pub fn r(&self) -> &[C] {
        &self.residual.up
    }
}

fn wrap(g: f64) -> f64 {
    g.rem_euclid(2.0 * std::f64::consts::PI)
}

/// Solves `⟨R, Φ_ω⟩ = 0` and `⟨R, σ₃∂_ωΦ_ω⟩ = 0` for `(ω, γ)`, i.e.
/// `Re ∫ r φ_ω = 0` and `Im ∫ r ∂_ωφ_ω = 0` with `r = e^{−iγ}u − φ_ω`.
///
/// The Jacobian drops `Im ∫ e^{−iγ}u ∂²_ωφ`, which is of the size of `r`;
/// the iteration therefore contracts at a rate `O(‖r‖)`.
pub fn modulation_decompose(
    family: &OrbitFamily,
    u: &[C],
    omega_guess: f64,
    cfg: &ModulationConfig,
) -> Result<Decomposition> {
    let grid = family.base.grid.as_ref();
    if u.len() != grid.len() {
        return Err(Error::GridMismatch(format!("field has {} values on a {}-point grid", u.len(), grid.len())));
    }
    let mut omega = omega_guess;
    let mut pt = family.at(omega).map_err(|e| Error::DecompositionFailed(e.to_string()))?;
    let phi_c = |v: &[f64]| -> Vec<C> { v.iter().map(|&x| C::new(x, 0.0)).collect() };
    let mut gamma = wrap(grid.cdot(u, &phi_c(&pt.phi)).arg());
    for it in 1..=cfg.max_iter {
        if pt.dq.abs() <= cfg.slope_tol * pt.q {
            return Err(Error::DegenerateJacobian(pt.dq));
        }
        let rot = C::from_polar(1.0, -gamma);
        let y1 = rot * grid.cdot(u, &phi_c(&pt.phi));
        let y2 = rot * grid.cdot(u, &phi_c(&pt.d_phi));
        let f = [y1.re - pt.q, y2.im];
        let j = [[y2.re - pt.dq, y1.im], [0.0, -y2.re]];
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if det == 0.0 || !det.is_finite() {
            return Err(Error::DegenerateJacobian(pt.dq));
        }
        let d_omega = (f[0] * j[1][1] - f[1] * j[0][1]) / det;
        let d_gamma = (j[0][0] * f[1] - j[1][0] * f[0]) / det;
        let next = omega - d_omega;
        if !(next > 0.0) || !next.is_finite() {
            return Err(Error::DecompositionFailed(format!("frequency left the admissible range ({next:.3e})")));
        }
        gamma = wrap(gamma - d_gamma);
        let done = d_omega.abs() <= cfg.tol * omega && d_gamma.abs() <= cfg.tol;
        if next != omega {
            omega = next;
            pt = family.at(omega).map_err(|e| Error::DecompositionFailed(e.to_string()))?;
        }
        if done {
            let rot = C::from_polar(1.0, -gamma);
            let r: Vec<C> = u.iter().zip(&pt.phi).map(|(v, p)| rot * v - p).collect();
            let size = grid.cnorm(&r);
            if size > cfg.max_relative_distance * pt.q.sqrt() {
                return Err(Error::DecompositionFailed(format!(
                    "residual {:.3e} is outside the tube around the orbit",
                    size / pt.q.sqrt()
                )));
            }
            let rbar: Vec<C> = r.iter().map(|v| v.conj()).collect();
            return Ok(Decomposition {
                omega,
                gamma,
                residual: Spinor { up: r, down: rbar },
                iterations: it,
            });
        }
    }
    Err(Error::DecompositionFailed(format!("Newton stalled after {} iterations", cfg.max_iter)))
}

/// `u = e^{iγ}(φ_ω + r)`.
pub fn synthesize(phi: &[f64], gamma: f64, r: &[C]) -> Vec<C> {
    let rot = C::from_polar(1.0, gamma);
    phi.iter().zip(r).map(|(p, v)| rot * (p + v)).collect()
}

/// `R = Σ (z_j ξ_j + w_j σ₁ξ_j) + f`.
#[derive(Clone, Debug)]
pub struct ModeProjection {
    pub z: Vec<C>,
    /// Coefficients of `σ₁ξ_j`; equal to `z̄_j` when `R = (r, r̄)`.
    pub w: Vec<C>,
    pub f: Spinor,
    /// `max_j |⟨f, σ₃ξ_j⟩| + |⟨f, σ₃σ₁ξ_j⟩|`, relative to `‖R‖·‖ξ_j‖`.
    pub orthogonality: f64,
}

impl ModeProjection {
    pub fn reconstruct(&self, modes: &[GapMode]) -> Spinor {
        let mut out = self.f.clone();
        for ((m, z), w) in modes.iter().zip(&self.z).zip(&self.w) {
            out.axpy(*z, &m.xi);
            out.axpy(*w, &m.xi.sigma1());
        }
        out
    }
}

/// `z_j = s_j⟨R, σ₃ξ_j⟩`, `w_j = −s_j⟨R, σ₃σ₁ξ_j⟩` and the continuum part.
pub fn mode_project(r: &Spinor, modes: &[GapMode], grid: &RadialGrid) -> ModeProjection {
    let mut z = Vec::with_capacity(modes.len());
    let mut w = Vec::with_capacity(modes.len());
    let mut f = r.clone();
    for m in modes {
        let s = m.signature.signum();
        let zj = r.dot(&m.xi.sigma3(), grid) * s;
        let wj = -r.dot(&m.xi.sigma1().sigma3(), grid) * s;
        f.axpy(-zj, &m.xi);
        f.axpy(-wj, &m.xi.sigma1());
        z.push(zj);
        w.push(wj);
    }
    let scale = r.norm(grid).max(f64::MIN_POSITIVE);
    let orthogonality = modes
        .iter()
        .map(|m| {
            let a = f.dot(&m.xi.sigma3(), grid).norm();
            let b = f.dot(&m.xi.sigma1().sigma3(), grid).norm();
            (a + b) / (scale * m.xi.norm(grid))
        })
        .fold(0.0, f64::max);
    ModeProjection { z, w, f, orthogonality }
}

/// The real field perturbation `r = z ξ¹ + z̄ conj(ξ²)` carried by a gap mode.
pub fn mode_field(mode: &GapMode, z: C) -> Vec<C> {
    mode.xi
        .up
        .iter()
        .zip(&mode.xi.down)
        .map(|(a, b)| z * a + z.conj() * b.conj())
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrbitalDistance {
    pub distance: f64,
    pub gamma: f64,
}

/// `min_γ ‖u − e^{iγ}φ‖_{H¹}`, attained at `γ* = arg⟨u, φ⟩_{H¹}`.
pub fn orbital_distance(u: &[C], profile: &Profile) -> Result<OrbitalDistance> {
    let grid = profile.grid.as_ref();
    if u.len() != grid.len() {
        return Err(Error::GridMismatch(format!("field has {} values on a {}-point grid", u.len(), grid.len())));
    }
    let phi: Vec<C> = profile.values.iter().map(|&v| C::new(v, 0.0)).collect();
    let pairing = grid.h1_dot(u, &phi);
    let gamma = if pairing.norm() > 0.0 { wrap(pairing.arg()) } else { 0.0 };
    let rot = C::from_polar(1.0, gamma);
    let diff: Vec<C> = u.iter().zip(&phi).map(|(a, p)| a - rot * p).collect();
    Ok(OrbitalDistance {
        distance: grid.h1_norm(&diff),
        gamma,
    })
}
