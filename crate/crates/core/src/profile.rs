//! Radial standing-wave profiles `Δφ − ωφ + β(φ²)φ = 0` and their ω-derivatives.
//!
//! Profiles are found by shooting on `φ(0)` for the regularized equation
//! `v'' = (ω − β(v²/r²)) v`, `v = rφ`, `v(0) = 0`, `v'(0) = φ(0)`, then
//! polished by Newton's method on the finite-difference equations so that
//! they are exact (to round-off) stationary points of the discrete problem
//! that every downstream operator is assembled on.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::RadialGrid;
use crate::linalg::SymTridiag;
use crate::nonlinearity::Nonlinearity;
use crate::operators::{l_minus, l_plus};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProfileConfig {
    /// Search range for the shooting value `φ(0)`.
    pub phi0_min: f64,
    pub phi0_max: f64,
    /// Geometric scan points used to bracket the node-count transitions.
    pub scan_points: usize,
    pub newton_max_iter: usize,
    /// Relative residual `‖G(v)‖ / ‖v‖` at which the Newton polish stops.
    pub newton_tol: f64,
    /// `L+` eigenvalues closer than this to zero are treated as singular.
    pub singular_tol: f64,
    /// `|dq/dω|` at or below this is a degenerate slope.
    pub slope_tol: f64,
}

impl Default for ProfileConfig {
    fn default() -> Self {
        ProfileConfig {
            phi0_min: 1e-3,
            phi0_max: 50.0,
            scan_points: 400,
            newton_max_iter: 50,
            newton_tol: 1e-10,
            singular_tol: 1e-8,
            slope_tol: 1e-8,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Profile {
    pub omega: f64,
    pub values: Vec<f64>,
    pub node_count: usize,
    pub phi0: f64,
    pub d_omega: Option<Vec<f64>>,
    /// `q(ω) = ‖φ‖²`.
    pub mass: f64,
    pub grid: Arc<RadialGrid>,
}

impl Profile {
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn norm(&self) -> f64 {
        self.grid.norm(&self.values)
    }

    /// `‖φ'' + (2/r)φ' − ωφ + β(φ²)φ‖` on the grid.
    pub fn residual_norm(&self, nl: &Nonlinearity) -> f64 {
        let lm = l_minus(nl, &self.grid, self.omega, &self.values);
        self.grid.norm(&lm.apply(&self.values))
    }

    pub fn d_omega(&self) -> Result<&[f64]> {
        self.d_omega
            .as_deref()
            .ok_or_else(|| Error::InvalidInput("d_omega_profile has not been computed".into()))
    }

    /// Profile with `φ ≡ 0`, used to probe the free operators.
    pub fn zero(grid: Arc<RadialGrid>, omega: f64) -> Profile {
        let n = grid.len();
        Profile {
            omega,
            values: vec![0.0; n],
            node_count: 0,
            phi0: 0.0,
            d_omega: Some(vec![0.0; n]),
            mass: 0.0,
            grid,
        }
    }
}

/// Sign changes among entries above a relative noise floor.
pub fn count_sign_changes(values: &[f64]) -> usize {
    let floor = 1e-12 * values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut count = 0;
    let mut prev = 0.0f64;
    for &v in values {
        if v.abs() <= floor {
            continue;
        }
        if prev != 0.0 && prev.signum() != v.signum() {
            count += 1;
        }
        prev = v;
    }
    count
}

struct Shot {
    crossings: usize,
    /// Radius of the first local minimum of `|φ|` not preceded by a crossing
    /// (the trajectory falls back); `None` if the integration range ran out.
    fallback: Option<f64>,
}

struct Shooter<'a> {
    nl: &'a Nonlinearity,
    omega: f64,
    r_end: f64,
}

impl<'a> Shooter<'a> {
    fn rhs(&self, r: f64, v: f64, a: f64) -> f64 {
        let phi = if r > 0.0 { v / r } else { a };
        (self.omega - self.nl.beta(phi * phi)) * v
    }

    fn step_size(&self, a: f64) -> f64 {
        let rate = (self.omega + self.nl.beta(a * a).abs()).sqrt();
        (0.02 / rate).min(0.005)
    }

    /// Integrates with RK4 and calls `visit(r, v)` after each step; stops when
    /// `visit` returns false.
    fn integrate(&self, a: f64, ds: f64, mut visit: impl FnMut(f64, f64, f64) -> bool) {
        let mut r = 0.0;
        let mut v = 0.0;
        let mut dv = a;
        while r < self.r_end {
            let k1v = dv;
            let k1d = self.rhs(r, v, a);
            let k2v = dv + 0.5 * ds * k1d;
            let k2d = self.rhs(r + 0.5 * ds, v + 0.5 * ds * k1v, a);
            let k3v = dv + 0.5 * ds * k2d;
            let k3d = self.rhs(r + 0.5 * ds, v + 0.5 * ds * k2v, a);
            let k4v = dv + ds * k3d;
            let k4d = self.rhs(r + ds, v + ds * k3v, a);
            v += ds / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
            dv += ds / 6.0 * (k1d + 2.0 * k2d + 2.0 * k3d + k4d);
            r += ds;
            if !v.is_finite() || !visit(r, v, dv) {
                break;
            }
        }
    }

    fn shoot(&self, a: f64) -> Shot {
        let ds = self.step_size(a);
        let mut crossings = 0;
        let mut fallback = None;
        let mut prev_v = 0.0f64;
        let mut prev_growth = f64::NAN;
        self.integrate(a, ds, |r, v, dv| {
            let crossed = prev_v != 0.0 && v.signum() != prev_v.signum();
            if crossed {
                crossings += 1;
            }
            // d|φ|/dr has the sign of φφ' = v(v'r − v)/r³. A turn of |φ| from
            // decreasing to increasing without a sign change is a fall back.
            let growth = v * (dv * r - v);
            if growth > 0.0 && !crossed && !(prev_growth > 0.0) {
                fallback = Some(r);
                return false;
            }
            prev_growth = growth;
            prev_v = v;
            true
        });
        Shot {
            crossings,
            fallback,
        }
    }
}

/// Solves for the radial profile with exactly `node_count` sign changes.
pub fn solve_profile(
    nl: &Nonlinearity,
    omega: f64,
    node_count: usize,
    grid: Arc<RadialGrid>,
    cfg: &ProfileConfig,
) -> Result<Profile> {
    nl.validate()?;
    if !(omega > 0.0 && omega.is_finite()) {
        return Err(Error::InvalidInput(format!("omega must be positive, got {omega}")));
    }
    if !(cfg.phi0_min > 0.0 && cfg.phi0_max > cfg.phi0_min) {
        return Err(Error::InvalidInput("invalid phi(0) search range".into()));
    }
    let shooter = Shooter {
        nl,
        omega,
        r_end: grid.r_max().max(60.0 / omega.sqrt()),
    };

    // Bracket the transition from `node_count` to `node_count + 1` crossings.
    let n_scan = cfg.scan_points.max(8);
    let ratio = (cfg.phi0_max / cfg.phi0_min).powf(1.0 / (n_scan - 1) as f64);
    let mut lo = None;
    let mut hi = None;
    let mut a_prev = cfg.phi0_min;
    let mut c_prev = shooter.shoot(a_prev).crossings;
    for i in 1..n_scan {
        let a = cfg.phi0_min * ratio.powi(i as i32);
        let c = shooter.shoot(a).crossings;
        if c > node_count && c_prev <= node_count {
            // The crossing count is a staircase in φ(0); refine until a step
            // from exactly `node_count` is isolated.
            let (mut l, mut h) = (a_prev, a);
            let mut cl = c_prev;
            for _ in 0..200 {
                if cl == node_count {
                    break;
                }
                let mid = 0.5 * (l + h);
                let cm = shooter.shoot(mid).crossings;
                if cm > node_count {
                    h = mid;
                } else {
                    l = mid;
                    cl = cm;
                }
            }
            if cl == node_count {
                lo = Some(l);
                hi = Some(h);
            }
            break;
        }
        a_prev = a;
        c_prev = c;
    }
    let (mut a_lo, mut a_hi) = match (lo, hi) {
        (Some(l), Some(h)) => (l, h),
        _ => {
            return Err(Error::NoSolution(format!(
                "no {node_count}-node bound state for {} at omega = {omega} with phi(0) in [{}, {}]",
                nl.label(),
                cfg.phi0_min,
                cfg.phi0_max
            )))
        }
    };
    for _ in 0..200 {
        let mid = 0.5 * (a_lo + a_hi);
        if mid <= a_lo || mid >= a_hi {
            break;
        }
        if shooter.shoot(mid).crossings > node_count {
            a_hi = mid;
        } else {
            a_lo = mid;
        }
    }

    let guess = shot_profile(&shooter, a_lo, &grid);
    let values = newton_polish(nl, omega, &grid, guess, cfg)?;
    let nodes = count_sign_changes(&values);
    if nodes != node_count {
        return Err(Error::NoConvergence(format!(
            "Newton polish changed the node count from {node_count} to {nodes}"
        )));
    }
    let mass = grid.dot(&values, &values);
    Ok(Profile {
        omega,
        phi0: a_lo,
        values,
        node_count,
        d_omega: None,
        mass,
        grid,
    })
}

/// The shot trajectory sampled on the grid, continued past the fall-back
/// point by the linear decay `φ(r_s) (r_s/r) e^{−√ω (r − r_s)}`.
fn shot_profile(shooter: &Shooter, a: f64, grid: &RadialGrid) -> Vec<f64> {
    let h = grid.h();
    let base = shooter.step_size(a);
    let sub = (h / base).ceil().max(1.0) as usize;
    let ds = h / sub as f64;
    let n = grid.len();
    let mut vals = Vec::with_capacity(n);
    let mut steps = 0usize;
    let fallback = shooter.shoot(a).fallback;
    let cut = fallback.unwrap_or(f64::INFINITY).min(grid.r_max());
    let mut last = (0.0, 0.0);
    shooter.integrate(a, ds, |r, v, _| {
        steps += 1;
        if steps % sub == 0 {
            if r > cut + 0.5 * ds {
                return false;
            }
            vals.push(v / r);
            last = (r, v / r);
        }
        vals.len() < n
    });
    let (rs, phis) = last;
    let k = shooter.omega.sqrt();
    while vals.len() < n {
        let r = (vals.len() + 1) as f64 * h;
        vals.push(phis * rs / r * (-k * (r - rs)).exp());
    }
    vals
}

fn newton_polish(
    nl: &Nonlinearity,
    omega: f64,
    grid: &Arc<RadialGrid>,
    mut phi: Vec<f64>,
    cfg: &ProfileConfig,
) -> Result<Vec<f64>> {
    let residual = |phi: &[f64]| -> (Vec<f64>, f64) {
        let lm = l_minus(nl, grid, omega, phi);
        let x = grid.to_flat(phi);
        let g = lm.tridiag().matvec(&x);
        let gn = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        let xn = x.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
        (g, gn / xn)
    };
    let (mut g, mut rel) = residual(&phi);
    for _ in 0..cfg.newton_max_iter {
        if rel <= cfg.newton_tol {
            return Ok(phi);
        }
        let jac: SymTridiag = l_plus(nl, grid, omega, &phi).tridiag().clone();
        let step = jac.solve(&g)?;
        let dphi = grid.from_flat(&step);
        let mut damping = 1.0;
        let mut accepted = false;
        for _ in 0..12 {
            let trial: Vec<f64> = phi.iter().zip(&dphi).map(|(p, d)| p - damping * d).collect();
            let (gt, rt) = residual(&trial);
            if rt < rel || rt <= cfg.newton_tol {
                phi = trial;
                g = gt;
                rel = rt;
                accepted = true;
                break;
            }
            damping *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if rel <= cfg.newton_tol.max(1e-9) {
        return Ok(phi);
    }
    Err(Error::NoConvergence(format!(
        "relative residual {rel:.3e} after {} iterations",
        cfg.newton_max_iter
    )))
}

/// Re-solves the profile at a nearby frequency by Newton continuation from `prev`.
pub fn continue_profile(
    nl: &Nonlinearity,
    prev: &Profile,
    omega: f64,
    cfg: &ProfileConfig,
) -> Result<Profile> {
    if !(omega > 0.0) {
        return Err(Error::InvalidInput(format!("omega must be positive, got {omega}")));
    }
    let guess = match &prev.d_omega {
        Some(d) => prev
            .values
            .iter()
            .zip(d)
            .map(|(p, dp)| p + (omega - prev.omega) * dp)
            .collect(),
        None => prev.values.clone(),
    };
    let values = newton_polish(nl, omega, &prev.grid, guess, cfg)?;
    let node_count = count_sign_changes(&values);
    if node_count != prev.node_count {
        return Err(Error::NoConvergence(format!(
            "continuation to omega = {omega} changed the node count"
        )));
    }
    let mass = prev.grid.dot(&values, &values);
    let phi0 = extrapolate_to_origin(&values, &prev.grid);
    Ok(Profile {
        omega,
        values,
        node_count,
        phi0,
        d_omega: None,
        mass,
        grid: prev.grid.clone(),
    })
}

fn extrapolate_to_origin(values: &[f64], grid: &RadialGrid) -> f64 {
    grid.interpolate(values, 0.0)
}

/// `∂_ω φ` from `L+ ψ = −φ`; requires `L+` to be invertible on radial functions.
pub fn d_omega_profile(nl: &Nonlinearity, profile: &Profile, cfg: &ProfileConfig) -> Result<Vec<f64>> {
    let grid = &profile.grid;
    let lp = l_plus(nl, grid, profile.omega, &profile.values);
    let gap = lp.smallest_abs_eigenvalue();
    if gap <= cfg.singular_tol {
        return Err(Error::SingularLinearization(gap));
    }
    let rhs: Vec<f64> = grid.to_flat(&profile.values).iter().map(|v| -v).collect();
    let x = lp.tridiag().solve(&rhs)?;
    Ok(grid.from_flat(&x))
}

/// Fills `profile.d_omega` in place.
pub fn attach_d_omega(nl: &Nonlinearity, profile: &mut Profile, cfg: &ProfileConfig) -> Result<()> {
    let d = d_omega_profile(nl, profile, cfg)?;
    profile.d_omega = Some(d);
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MassSlope {
    pub value: f64,
    pub sign: i8,
}

/// `dq/dω = 2⟨φ, ∂_ω φ⟩`.
pub fn mass_slope(profile: &Profile, cfg: &ProfileConfig) -> Result<MassSlope> {
    let d = profile.d_omega()?;
    let value = 2.0 * profile.grid.dot(&profile.values, d);
    if value.abs() <= cfg.slope_tol {
        return Err(Error::DegenerateSlope(value));
    }
    Ok(MassSlope {
        value,
        sign: if value > 0.0 { 1 } else { -1 },
    })
}

/// Unchecked variant used by sweeps and reports that record degeneracy instead of failing.
pub fn mass_slope_value(profile: &Profile) -> Result<f64> {
    let d = profile.d_omega()?;
    Ok(2.0 * profile.grid.dot(&profile.values, d))
}

/// Convenience: solve, then attach `∂_ω φ`.
pub fn solve_with_derivative(
    nl: &Nonlinearity,
    omega: f64,
    node_count: usize,
    grid: Arc<RadialGrid>,
    cfg: &ProfileConfig,
) -> Result<Profile> {
    let mut p = solve_profile(nl, omega, node_count, grid, cfg)?;
    attach_d_omega(nl, &mut p, cfg)?;
    Ok(p)
}
