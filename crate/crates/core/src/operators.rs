//! Discretized `L±`, the linearization `H_ω`, potential perturbations and the
//! free resolvent kernel.
//!
//! All matrices live in the flat coordinates `x = √w · f` of [`RadialGrid`],
//! where the weighted inner product is Euclidean and the radial Laplacian is
//! the Dirichlet second difference `tridiag(−1, 2, −1) / h²` acting on `rf`.
//!
//! `H_ω` acts on pairs `(r, r̄)`:
//!
//! ```text
//! H = [  L0   c ]      L0 = −Δ + ω − β(φ²) − β'(φ²)φ²
//!     [ −c  −L0 ]      c  = −β'(φ²)φ²
//! ```
//!
//! so that `σ₃H = [[L0, c], [c, L0]]` is symmetric, `σ₁Hσ₁ = −H`,
//! `L+ = L0 + c` and `L− = L0 − c`. With `A = (ξ¹ + ξ²)/2`,
//! `B = (ξ¹ − ξ²)/2` the eigenproblem `Hξ = λξ` becomes
//! `L− B = λA`, `L+ A = λB`, i.e. the real block form `K = [[0, L−], [L+, 0]]`.

use std::f64::consts::PI;
use std::io::Write;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::RadialGrid;
use crate::linalg::{BandMatrix, DenseMatrix, SymTridiag};
use crate::nonlinearity::Nonlinearity;
use crate::profile::Profile;

type C = Complex64;

/// `−Δ` on the flat coordinates.
pub fn laplacian(grid: &RadialGrid) -> SymTridiag {
    let n = grid.len();
    let h2 = grid.h() * grid.h();
    SymTridiag::new(vec![2.0 / h2; n], vec![-1.0 / h2; n - 1])
}

/// `−Δ + ω + V(r)` on the radial grid.
#[derive(Clone, Debug)]
pub struct ScalarOperator {
    pub omega: f64,
    pub potential: Vec<f64>,
    tridiag: SymTridiag,
    grid: Arc<RadialGrid>,
}

impl ScalarOperator {
    pub fn new(grid: Arc<RadialGrid>, omega: f64, potential: Vec<f64>) -> Result<Self> {
        if potential.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "potential has {} values on a {}-point grid",
                potential.len(),
                grid.len()
            )));
        }
        let mut t = laplacian(&grid);
        for (d, v) in t.diag.iter_mut().zip(&potential) {
            *d += omega + v;
        }
        Ok(ScalarOperator {
            omega,
            potential,
            tridiag: t,
            grid,
        })
    }

    /// Symmetric tridiagonal matrix in flat coordinates.
    pub fn tridiag(&self) -> &SymTridiag {
        &self.tridiag
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// Applies the operator to grid values.
    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        self.grid.from_flat(&self.tridiag.matvec(&self.grid.to_flat(f)))
    }

    pub fn apply_c(&self, f: &[C]) -> Vec<C> {
        let re: Vec<f64> = f.iter().map(|z| z.re).collect();
        let im: Vec<f64> = f.iter().map(|z| z.im).collect();
        self.apply(&re)
            .into_iter()
            .zip(self.apply(&im))
            .map(|(a, b)| C::new(a, b))
            .collect()
    }

    /// Solves `A u = f` for grid values.
    pub fn solve(&self, f: &[f64]) -> Result<Vec<f64>> {
        let x = self.tridiag.solve(&self.grid.to_flat(f))?;
        Ok(self.grid.from_flat(&x))
    }

    /// The `k` smallest eigenvalues.
    pub fn lowest_eigenvalues(&self, k: usize) -> Vec<f64> {
        let tol = 1e-14 * (1.0 + self.tridiag.norm_inf());
        self.tridiag.lowest(k, tol)
    }

    /// Eigenvalues strictly below `x`.
    pub fn count_below(&self, x: f64) -> usize {
        self.tridiag.count_below(x)
    }

    /// Eigenvalue of smallest modulus.
    pub fn smallest_abs_eigenvalue(&self) -> f64 {
        let t = &self.tridiag;
        let k = t.count_below(0.0);
        let tol = 1e-14 * (1.0 + t.norm_inf());
        let mut best = f64::INFINITY;
        if k > 0 {
            best = best.min(t.eigenvalue(k - 1, tol).abs());
        }
        if k < t.len() {
            best = best.min(t.eigenvalue(k, tol).abs());
        }
        best
    }

    /// Normalized (grid-norm) eigenfunction for the `k`-th smallest eigenvalue.
    pub fn eigenpair(&self, k: usize) -> (f64, Vec<f64>) {
        let tol = 1e-14 * (1.0 + self.tridiag.norm_inf());
        let lam = self.tridiag.eigenvalue(k, tol);
        let x = self.tridiag.eigenvector(lam);
        (lam, self.grid.from_flat(&x))
    }

    pub fn dense(&self) -> DenseMatrix {
        let n = self.len();
        let mut m = DenseMatrix::zeros(n);
        for i in 0..n {
            m.set(i, i, self.tridiag.diag[i]);
            if i + 1 < n {
                m.set(i, i + 1, self.tridiag.off[i]);
                m.set(i + 1, i, self.tridiag.off[i]);
            }
        }
        m
    }

    /// `‖A − Aᵀ‖_max / ‖A‖_max` of the flat matrix.
    pub fn symmetry_defect(&self) -> f64 {
        let m = self.dense();
        let mut worst = 0.0f64;
        for i in 0..m.n {
            for j in 0..i {
                worst = worst.max((m.get(i, j) - m.get(j, i)).abs());
            }
        }
        worst / m.max_abs().max(f64::MIN_POSITIVE)
    }
}

fn profile_potentials(nl: &Nonlinearity, phi: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut b = Vec::with_capacity(phi.len());
    let mut q = Vec::with_capacity(phi.len());
    for &p in phi {
        let s = p * p;
        b.push(nl.beta(s));
        q.push(if s == 0.0 { 0.0 } else { nl.beta1(s) * s });
    }
    (b, q)
}

/// `L+ = −Δ + ω − β(φ²) − 2φ²β'(φ²)` for raw grid values.
pub fn l_plus(nl: &Nonlinearity, grid: &Arc<RadialGrid>, omega: f64, phi: &[f64]) -> ScalarOperator {
    let (b, q) = profile_potentials(nl, phi);
    let pot = b.iter().zip(&q).map(|(b, q)| -b - 2.0 * q).collect();
    ScalarOperator::new(grid.clone(), omega, pot).expect("profile on its own grid")
}

/// `L− = −Δ + ω − β(φ²)` for raw grid values.
pub fn l_minus(nl: &Nonlinearity, grid: &Arc<RadialGrid>, omega: f64, phi: &[f64]) -> ScalarOperator {
    let (b, _) = profile_potentials(nl, phi);
    let pot = b.iter().map(|b| -b).collect();
    ScalarOperator::new(grid.clone(), omega, pot).expect("profile on its own grid")
}

/// Assembles `(L+, L−)` for a profile.
pub fn build_lpm(nl: &Nonlinearity, profile: &Profile) -> Result<(ScalarOperator, ScalarOperator)> {
    if profile.values.len() != profile.grid.len() {
        return Err(Error::GridMismatch("profile values do not match its grid".into()));
    }
    Ok((
        l_plus(nl, &profile.grid, profile.omega, &profile.values),
        l_minus(nl, &profile.grid, profile.omega, &profile.values),
    ))
}

/// A pair of radial functions `(f¹, f²)`, in the `(r, r̄)` basis unless noted.
#[derive(Clone, Debug, PartialEq)]
pub struct Spinor {
    pub up: Vec<C>,
    pub down: Vec<C>,
}

impl Spinor {
    pub fn zeros(n: usize) -> Self {
        Spinor {
            up: vec![C::new(0.0, 0.0); n],
            down: vec![C::new(0.0, 0.0); n],
        }
    }

    pub fn from_real(up: &[f64], down: &[f64]) -> Self {
        Spinor {
            up: up.iter().map(|&v| C::new(v, 0.0)).collect(),
            down: down.iter().map(|&v| C::new(v, 0.0)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.up.len()
    }

    pub fn is_empty(&self) -> bool {
        self.up.is_empty()
    }

    pub fn sigma1(&self) -> Spinor {
        Spinor {
            up: self.down.clone(),
            down: self.up.clone(),
        }
    }

    pub fn sigma3(&self) -> Spinor {
        Spinor {
            up: self.up.clone(),
            down: self.down.iter().map(|v| -v).collect(),
        }
    }

    pub fn conj(&self) -> Spinor {
        Spinor {
            up: self.up.iter().map(|v| v.conj()).collect(),
            down: self.down.iter().map(|v| v.conj()).collect(),
        }
    }

    pub fn scale(&self, a: C) -> Spinor {
        Spinor {
            up: self.up.iter().map(|v| v * a).collect(),
            down: self.down.iter().map(|v| v * a).collect(),
        }
    }

    /// `self += a · other`.
    pub fn axpy(&mut self, a: C, other: &Spinor) {
        for (s, o) in self.up.iter_mut().zip(&other.up) {
            *s += a * o;
        }
        for (s, o) in self.down.iter_mut().zip(&other.down) {
            *s += a * o;
        }
    }

    pub fn sub(&self, other: &Spinor) -> Spinor {
        let mut out = self.clone();
        out.axpy(C::new(-1.0, 0.0), other);
        out
    }

    /// `⟨f, g⟩ = ∫ f·ḡ` summed over components.
    pub fn dot(&self, other: &Spinor, grid: &RadialGrid) -> C {
        grid.cdot(&self.up, &other.up) + grid.cdot(&self.down, &other.down)
    }

    pub fn norm(&self, grid: &RadialGrid) -> f64 {
        (grid.cnorm(&self.up).powi(2) + grid.cnorm(&self.down).powi(2)).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.up
            .iter()
            .chain(&self.down)
            .fold(0.0f64, |m, v| m.max(v.norm()))
    }

    /// Interleaved flat vector `(x¹_1, x²_1, x¹_2, …)` used by the band solvers.
    pub fn to_flat_interleaved(&self, grid: &RadialGrid) -> Vec<C> {
        let s = grid.sqrt_weights();
        let mut out = Vec::with_capacity(2 * self.len());
        for i in 0..self.len() {
            out.push(self.up[i] * s[i]);
            out.push(self.down[i] * s[i]);
        }
        out
    }

    pub fn from_flat_interleaved(x: &[C], grid: &RadialGrid) -> Spinor {
        let s = grid.sqrt_weights();
        let n = x.len() / 2;
        Spinor {
            up: (0..n).map(|i| x[2 * i] / s[i]).collect(),
            down: (0..n).map(|i| x[2 * i + 1] / s[i]).collect(),
        }
    }

    /// `(A, B) = ((f¹ + f²)/2, (f¹ − f²)/2)`.
    pub fn to_ab(&self) -> (Vec<C>, Vec<C>) {
        let a = self.up.iter().zip(&self.down).map(|(u, d)| 0.5 * (u + d)).collect();
        let b = self.up.iter().zip(&self.down).map(|(u, d)| 0.5 * (u - d)).collect();
        (a, b)
    }

    pub fn from_ab(a: &[C], b: &[C]) -> Spinor {
        Spinor {
            up: a.iter().zip(b).map(|(a, b)| a + b).collect(),
            down: a.iter().zip(b).map(|(a, b)| a - b).collect(),
        }
    }
}

/// Discretized `H_ω` (possibly perturbed by `εU₁`).
#[derive(Clone, Debug)]
pub struct LinearizedOperator {
    pub omega: f64,
    /// Diagonal potential of `L0` (without `ω`).
    pub v0: Vec<f64>,
    /// Off-diagonal coupling `c`.
    pub c: Vec<f64>,
    pub lp: ScalarOperator,
    pub lm: ScalarOperator,
    pub profile: Option<Arc<Profile>>,
    grid: Arc<RadialGrid>,
}

impl LinearizedOperator {
    /// `H_ω` for a profile.
    pub fn new(nl: &Nonlinearity, profile: &Profile) -> Result<Self> {
        let (b, q) = profile_potentials(nl, &profile.values);
        let v0: Vec<f64> = b.iter().zip(&q).map(|(b, q)| -b - q).collect();
        let c: Vec<f64> = q.iter().map(|q| -q).collect();
        let mut op = Self::from_parts(profile.grid.clone(), profile.omega, v0, c)?;
        op.profile = Some(Arc::new(profile.clone()));
        Ok(op)
    }

    pub fn from_parts(grid: Arc<RadialGrid>, omega: f64, v0: Vec<f64>, c: Vec<f64>) -> Result<Self> {
        if v0.len() != grid.len() || c.len() != grid.len() {
            return Err(Error::GridMismatch("potential length".into()));
        }
        let lp = ScalarOperator::new(grid.clone(), omega, v0.iter().zip(&c).map(|(v, c)| v + c).collect())?;
        let lm = ScalarOperator::new(grid.clone(), omega, v0.iter().zip(&c).map(|(v, c)| v - c).collect())?;
        Ok(LinearizedOperator {
            omega,
            v0,
            c,
            lp,
            lm,
            profile: None,
            grid,
        })
    }

    /// `σ₃(−Δ + ω)`, the operator at `φ ≡ 0`.
    pub fn free(grid: Arc<RadialGrid>, omega: f64) -> Result<Self> {
        let n = grid.len();
        Self::from_parts(grid, omega, vec![0.0; n], vec![0.0; n])
    }

    /// `H + ε U₁`.
    pub fn perturbed(&self, pert: &PotentialPerturbation, eps: f64) -> Result<Self> {
        if pert.f.len() != self.len() {
            return Err(Error::GridMismatch("perturbation grid".into()));
        }
        // U₁ = σ₃f + iσ₂g = [[f, g], [−g, −f]].
        let v0 = self.v0.iter().zip(&pert.f).map(|(v, f)| v + eps * f).collect();
        let c = self.c.iter().zip(&pert.g).map(|(c, g)| c + eps * g).collect();
        let mut op = Self::from_parts(self.grid.clone(), self.omega, v0, c)?;
        op.profile = self.profile.clone();
        Ok(op)
    }

    /// The same operator on a grid with `n` points of the same spacing;
    /// potentials are zero-padded (or truncated).
    pub fn resized(&self, n: usize) -> Result<Self> {
        let grid = Arc::new(self.grid.with_points(n));
        let pad = |v: &[f64]| -> Vec<f64> { (0..n).map(|i| v.get(i).copied().unwrap_or(0.0)).collect() };
        Self::from_parts(grid, self.omega, pad(&self.v0), pad(&self.c))
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    fn l0(&self, f: &[C]) -> Vec<C> {
        // L0 = (L+ + L−)/2
        let a = self.lp.apply_c(f);
        let b = self.lm.apply_c(f);
        a.iter().zip(&b).map(|(a, b)| 0.5 * (a + b)).collect()
    }

    /// `H f`.
    pub fn apply(&self, f: &Spinor) -> Spinor {
        let l_up = self.l0(&f.up);
        let l_down = self.l0(&f.down);
        let up = (0..self.len()).map(|i| l_up[i] + self.c[i] * f.down[i]).collect();
        let down = (0..self.len()).map(|i| -self.c[i] * f.up[i] - l_down[i]).collect();
        Spinor { up, down }
    }

    /// `σ₃H f`.
    pub fn apply_sigma3(&self, f: &Spinor) -> Spinor {
        self.apply(f).sigma3()
    }

    /// `⟨f, σ₃ g⟩`.
    pub fn sigma3_dot(&self, f: &Spinor, g: &Spinor) -> C {
        f.dot(&g.sigma3(), &self.grid)
    }

    /// `H − z` in interleaved flat coordinates (bandwidth 2).
    pub fn band(&self, z: C) -> BandMatrix {
        let n = self.len();
        let t = laplacian(&self.grid);
        let mut m = BandMatrix::zeros(2 * n, 2, 2);
        for i in 0..n {
            let d = t.diag[i] + self.omega + self.v0[i];
            let (u, w) = (2 * i, 2 * i + 1);
            m.set(u, u, C::new(d, 0.0) - z);
            m.set(w, w, C::new(-d, 0.0) - z);
            m.set(u, w, C::new(self.c[i], 0.0));
            m.set(w, u, C::new(-self.c[i], 0.0));
            if i + 1 < n {
                let o = t.off[i];
                m.set(u, u + 2, C::new(o, 0.0));
                m.set(u + 2, u, C::new(o, 0.0));
                m.set(w, w + 2, C::new(-o, 0.0));
                m.set(w + 2, w, C::new(-o, 0.0));
            }
        }
        m
    }

    /// Largest entry of `σ₁Hσ₁ + H` on the band (exactly zero by construction).
    pub fn sigma1_anticommutator(&self) -> f64 {
        let m = self.band(C::new(0.0, 0.0));
        let n2 = m.dim();
        let flip = |k: usize| k ^ 1;
        let mut worst = 0.0f64;
        for i in 0..n2 {
            for j in i.saturating_sub(3)..(i + 4).min(n2) {
                worst = worst.max((m.get(flip(i), flip(j)) + m.get(i, j)).norm());
            }
        }
        worst
    }

    /// `‖σ₃H − (σ₃H)ᵀ‖_max / ‖H‖_max` on the band.
    pub fn sigma3_symmetry_defect(&self) -> f64 {
        let m = self.band(C::new(0.0, 0.0));
        let n2 = m.dim();
        let sign = |k: usize| if k % 2 == 0 { 1.0 } else { -1.0 };
        let mut worst = 0.0f64;
        let mut scale = 0.0f64;
        for i in 0..n2 {
            for j in i.saturating_sub(2)..(i + 3).min(n2) {
                let a = m.get(i, j) * sign(i);
                let b = m.get(j, i) * sign(j);
                worst = worst.max((a - b).norm());
                scale = scale.max(m.get(i, j).norm());
            }
        }
        worst / scale.max(f64::MIN_POSITIVE)
    }

    /// Real block form `K = [[0, L−], [L+, 0]]` on flat `(A, B)`; same spectrum as `H`.
    pub fn dense_k(&self) -> DenseMatrix {
        let n = self.len();
        let mut m = DenseMatrix::zeros(2 * n);
        let (p, q) = (self.lp.tridiag(), self.lm.tridiag());
        for i in 0..n {
            m.set(i, n + i, q.diag[i]);
            m.set(n + i, i, p.diag[i]);
            if i + 1 < n {
                m.set(i, n + i + 1, q.off[i]);
                m.set(i + 1, n + i, q.off[i]);
                m.set(n + i, i + 1, p.off[i]);
                m.set(n + i + 1, i, p.off[i]);
            }
        }
        m
    }

    /// Dense `H` in the block `(r, r̄)` flat basis.
    pub fn dense_h(&self) -> DenseMatrix {
        let n = self.len();
        let band = self.band(C::new(0.0, 0.0));
        let mut m = DenseMatrix::zeros(2 * n);
        for i in 0..2 * n {
            for j in i.saturating_sub(2)..(i + 3).min(2 * n) {
                let v = band.get(i, j).re;
                if v != 0.0 {
                    let bi = (i % 2) * n + i / 2;
                    let bj = (j % 2) * n + j / 2;
                    m.set(bi, bj, v);
                }
            }
        }
        m
    }

    /// `Φ = (φ, φ)`.
    pub fn phi_spinor(&self) -> Result<Spinor> {
        let p = self.require_profile()?;
        Ok(Spinor::from_real(&p.values, &p.values))
    }

    /// `σ₃Φ`, in the kernel.
    pub fn sigma3_phi(&self) -> Result<Spinor> {
        Ok(self.phi_spinor()?.sigma3())
    }

    /// `∂_ωΦ`, with `H ∂_ωΦ = −σ₃Φ`.
    pub fn d_omega_phi(&self) -> Result<Spinor> {
        let p = self.require_profile()?;
        let d = p.d_omega()?;
        Ok(Spinor::from_real(d, d))
    }

    fn require_profile(&self) -> Result<&Profile> {
        self.profile
            .as_deref()
            .ok_or_else(|| Error::InvalidInput("operator has no profile".into()))
    }
}

/// Builds `H_ω` for a profile.
pub fn build_h(nl: &Nonlinearity, profile: &Profile) -> Result<LinearizedOperator> {
    LinearizedOperator::new(nl, profile)
}

/// Truncated Gaussian bump `amplitude · exp(−(r − center)² / (2 width²))`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BumpSpec {
    pub center: f64,
    pub width: f64,
    pub amplitude: f64,
}

impl BumpSpec {
    pub fn zero() -> Self {
        BumpSpec {
            center: 0.0,
            width: 1.0,
            amplitude: 0.0,
        }
    }

    /// Values are zero beyond six widths from the center.
    pub fn support_radius(&self) -> f64 {
        self.center + 6.0 * self.width
    }

    pub fn sample(&self, grid: &RadialGrid) -> Result<Vec<f64>> {
        if !(self.width > 0.0) || !self.amplitude.is_finite() || !self.center.is_finite() {
            return Err(Error::InvalidInput(format!("invalid bump {self:?}")));
        }
        Ok(grid
            .nodes()
            .iter()
            .map(|&r| {
                let x = (r - self.center) / self.width;
                if x.abs() > 6.0 {
                    0.0
                } else {
                    self.amplitude * (-0.5 * x * x).exp()
                }
            })
            .collect())
    }
}

/// `U₁ = σ₃f + iσ₂g = [[f, g], [−g, −f]]`.
#[derive(Clone, Debug, PartialEq)]
pub struct PotentialPerturbation {
    pub f: Vec<f64>,
    pub g: Vec<f64>,
}

impl PotentialPerturbation {
    pub fn zeros(n: usize) -> Self {
        PotentialPerturbation {
            f: vec![0.0; n],
            g: vec![0.0; n],
        }
    }

    pub fn apply(&self, u: &Spinor) -> Spinor {
        let n = u.len();
        Spinor {
            up: (0..n).map(|i| self.f[i] * u.up[i] + self.g[i] * u.down[i]).collect(),
            down: (0..n).map(|i| -self.g[i] * u.up[i] - self.f[i] * u.down[i]).collect(),
        }
    }

    pub fn scaled(&self, a: f64) -> PotentialPerturbation {
        PotentialPerturbation {
            f: self.f.iter().map(|v| a * v).collect(),
            g: self.g.iter().map(|v| a * v).collect(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.f.iter().chain(&self.g).all(|&v| v == 0.0)
    }
}

pub fn build_perturbation(f: &BumpSpec, g: &BumpSpec, grid: &RadialGrid) -> Result<PotentialPerturbation> {
    Ok(PotentialPerturbation {
        f: f.sample(grid)?,
        g: g.sample(grid)?,
    })
}

/// `σ₃/(4π d) · diag(e^{−ζd}, e^{−√(2ω − ζ²) d})`, principal square root.
pub fn free_resolvent_kernel(zeta: C, dist: f64, omega: f64) -> Result<[[C; 2]; 2]> {
    if !(dist > 0.0) {
        return Err(Error::DomainError(format!("|x - y| must be positive, got {dist}")));
    }
    if zeta.re < 0.0 {
        return Err(Error::DomainError(format!("Re zeta must be nonnegative, got {zeta}")));
    }
    let mu = (C::new(2.0 * omega, 0.0) - zeta * zeta).sqrt();
    let pre = 1.0 / (4.0 * PI * dist);
    let zero = C::new(0.0, 0.0);
    Ok([
        [(-zeta * dist).exp() * pre, zero],
        [zero, -(-mu * dist).exp() * pre],
    ])
}

/// Writes `rows cols` followed by one row per line.
pub fn write_matrix<W: Write>(mut out: W, m: &DenseMatrix) -> Result<()> {
    writeln!(out, "{} {}", m.n, m.n)?;
    for row in m.data.chunks(m.n) {
        let line: Vec<String> = row.iter().map(|v| format!("{v:.17e}")).collect();
        writeln!(out, "{}", line.join(" "))?;
    }
    Ok(())
}

pub fn read_matrix(text: &str) -> Result<DenseMatrix> {
    let mut tokens = text.split_whitespace();
    let mut next = || -> Result<&str> {
        tokens
            .next()
            .ok_or_else(|| Error::InvalidInput("truncated matrix file".into()))
    };
    let parse_usize = |s: &str| s.parse::<usize>().map_err(|e| Error::InvalidInput(e.to_string()));
    let rows = parse_usize(next()?)?;
    let cols = parse_usize(next()?)?;
    if rows != cols {
        return Err(Error::InvalidInput("only square matrices are supported".into()));
    }
    let mut m = DenseMatrix::zeros(rows);
    for v in m.data.iter_mut() {
        *v = next()?
            .parse::<f64>()
            .map_err(|e| Error::InvalidInput(e.to_string()))?;
    }
    Ok(m)
}
