//! Reduced discrete-mode dynamics with Fermi Golden Rule damping.
//!
//! The truncated system is
//!
//! ```text
//! iζ̇_j = (λ_j + Σ_ℓ a_{jℓ}|ζ_ℓ|²) ζ_j − i s_j Σ_{m+δ_j ∈ Res} Γ_{m+δ_j,j} |ζ^m|² ζ_j.
//! ```
//!
//! Only moduli enter the right-hand side, so it is integrated in the
//! amplitude–phase variables `ρ_j = |ζ_j|²`, `θ_j = arg ζ_j`:
//! `ρ̇_j = −2 s_j Σ Γ ρ^m ρ_j` and `θ̇_j = −(λ_j + Σ a_{jℓ} ρ_ℓ)`. This is the
//! same system, without the fast rotation that would otherwise set the step
//! size over horizons of order `1/(Γ|ζ|²)`.

use std::collections::BTreeMap;
use std::io::Write;

use num_complex::Complex64;
use ode_solvers::{DVector, Dop853, OutputType, System};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fgr::{FgrMatrix, GapMode, MultiIndex};

type C = Complex64;

/// One damping term `Γ_{m+δ_j,j} |ζ^m|² ζ_j` in the equation for `ζ_j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DampingTerm {
    pub m: MultiIndex,
    pub j: usize,
    pub gamma: f64,
}

impl DampingTerm {
    /// `m + δ_j`, the resonant index whose `|ζ^k|²` the term integrates.
    pub fn resonant_index(&self) -> MultiIndex {
        let mut k = self.m.clone();
        k[self.j] += 1;
        k
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReducedModel {
    pub lambda: Vec<f64>,
    /// Krein signatures `s_j = ±1`.
    pub signatures: Vec<f64>,
    pub terms: Vec<DampingTerm>,
    /// Real frequency-shift coefficients `a_{jℓ}`; zero unless configured.
    pub a: Vec<Vec<f64>>,
}

impl ReducedModel {
    /// Model from the gap modes and a computed FGR matrix. Entries inside the
    /// positivity tolerance but below zero are clamped to zero.
    pub fn from_fgr(modes: &[GapMode], fgr: &FgrMatrix, a: Option<Vec<Vec<f64>>>) -> Result<Self> {
        let mut terms = Vec::with_capacity(fgr.entries.len());
        for e in fgr.entries.values() {
            if !e.nonnegative {
                return Err(Error::InvalidInput(format!(
                    "FGR coefficient {} = {:.3e} is negative beyond tolerance",
                    e.key(),
                    e.gamma
                )));
            }
            terms.push(DampingTerm {
                m: e.m.clone(),
                j: e.j,
                gamma: e.gamma.max(0.0),
            });
        }
        let j = modes.len();
        let model = ReducedModel {
            lambda: modes.iter().map(|m| m.lambda).collect(),
            signatures: modes.iter().map(|m| m.signature.signum()).collect(),
            terms,
            a: a.unwrap_or_else(|| vec![vec![0.0; j]; j]),
        };
        model.validate()?;
        Ok(model)
    }

    /// One mode with the quartic term `Γ|ζ|²ζ`.
    pub fn single_mode(lambda: f64, signature: f64, gamma: f64) -> Result<Self> {
        let model = ReducedModel {
            lambda: vec![lambda],
            signatures: vec![signature],
            terms: vec![DampingTerm {
                m: vec![1],
                j: 0,
                gamma,
            }],
            a: vec![vec![0.0]],
        };
        model.validate()?;
        Ok(model)
    }

    pub fn modes(&self) -> usize {
        self.lambda.len()
    }

    pub fn validate(&self) -> Result<()> {
        let j = self.lambda.len();
        if j == 0 {
            return Err(Error::InvalidInput("reduced model has no modes".into()));
        }
        if self.signatures.len() != j || self.a.len() != j || self.a.iter().any(|row| row.len() != j) {
            return Err(Error::InvalidInput("reduced model dimensions disagree".into()));
        }
        if self.signatures.iter().any(|&s| s != 1.0 && s != -1.0) {
            return Err(Error::InvalidInput("signatures must be +1 or -1".into()));
        }
        if self.lambda.iter().chain(self.a.iter().flatten()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite reduced model coefficient".into()));
        }
        for t in &self.terms {
            if t.m.len() != j || t.j >= j {
                return Err(Error::InvalidInput(format!("damping term {:?}|{} does not match {j} modes", t.m, t.j)));
            }
            if !(t.gamma >= 0.0) || !t.gamma.is_finite() {
                return Err(Error::InvalidInput(format!("damping coefficient {} must be nonnegative", t.gamma)));
            }
        }
        Ok(())
    }

    /// `Γ_{2δ_j, j}`, the diagonal coefficient of the quartic term.
    pub fn diagonal_gamma(&self, j: usize) -> f64 {
        self.terms
            .iter()
            .filter(|t| t.j == j && t.m[j] == 1 && t.m.iter().sum::<usize>() == 1)
            .map(|t| t.gamma)
            .sum()
    }

    /// Distinct resonant indices `m + δ_j` carried by the damping terms.
    pub fn resonant_indices(&self) -> Vec<MultiIndex> {
        let mut ks: Vec<MultiIndex> = self.terms.iter().map(DampingTerm::resonant_index).collect();
        ks.sort();
        ks.dedup();
        ks
    }

    /// `ρ̇_j / ρ_j = −2 s_j Σ Γ ρ^m`.
    fn rate(&self, j: usize, rho: &[f64]) -> f64 {
        let sum: f64 = self
            .terms
            .iter()
            .filter(|t| t.j == j)
            .map(|t| t.gamma * monomial(&t.m, rho))
            .sum();
        -2.0 * self.signatures[j] * sum
    }
}

fn monomial(m: &[usize], rho: &[f64]) -> f64 {
    m.iter().zip(rho).map(|(&k, &r)| r.powi(k as i32)).product()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReducedConfig {
    /// Relative tolerance of the embedded 8(5,3) Runge–Kutta pair.
    pub rtol: f64,
    /// Stop once some `|ζ_j|` exceeds this multiple of `max_j |ζ_j(0)|`.
    pub ceiling_factor: f64,
    pub max_steps: u32,
}

impl Default for ReducedConfig {
    fn default() -> Self {
        ReducedConfig {
            rtol: 1e-10,
            ceiling_factor: 1e3,
            max_steps: 1_000_000,
        }
    }
}

/// Blow-up of the truncated model: the ceiling was crossed at `time`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Blowup {
    pub time: f64,
    /// Extrapolated singular time from the local growth rate.
    pub estimate: f64,
    pub mode: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReducedSample {
    pub t: f64,
    pub zeta: Vec<C>,
    /// `∫₀ᵗ |ζ_j|⁴`.
    pub quartic: Vec<f64>,
    /// `∫₀ᵗ |ζ^k|²` for each resonant index.
    pub resonant: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReducedTrajectory {
    pub signatures: Vec<f64>,
    pub resonant_indices: Vec<MultiIndex>,
    /// Accepted steps, starting with the initial state.
    pub samples: Vec<ReducedSample>,
    /// Largest increase of `s_j|ζ_j|²` over one step, relative to `|ζ_j|²`.
    pub monotonicity_violation: f64,
    pub blowup: Option<Blowup>,
    pub accepted_steps: u32,
    pub rejected_steps: u32,
}

impl ReducedTrajectory {
    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    pub fn modulus_sq(&self, j: usize) -> Vec<f64> {
        self.samples.iter().map(|s| s.zeta[j].norm_sqr()).collect()
    }

    /// `s_j |ζ_j(t)|²`, nonincreasing for every `j`.
    pub fn signed(&self, j: usize) -> Vec<f64> {
        let s = self.signatures[j];
        self.samples.iter().map(|x| s * x.zeta[j].norm_sqr()).collect()
    }

    pub fn last(&self) -> &ReducedSample {
        self.samples.last().expect("trajectory holds the initial state")
    }

    /// `|ζ_j(t)|²` by linear interpolation between accepted steps.
    pub fn modulus_sq_at(&self, j: usize, t: f64) -> f64 {
        let k = self.samples.partition_point(|s| s.t < t);
        if k == 0 {
            return self.samples[0].zeta[j].norm_sqr();
        }
        if k >= self.samples.len() {
            return self.last().zeta[j].norm_sqr();
        }
        let (a, b) = (&self.samples[k - 1], &self.samples[k]);
        let w = (t - a.t) / (b.t - a.t);
        a.zeta[j].norm_sqr() * (1.0 - w) + b.zeta[j].norm_sqr() * w
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let j = self.signatures.len();
        let mut header = vec!["t".to_string()];
        for k in 0..j {
            header.push(format!("re_zeta_{k}"));
            header.push(format!("im_zeta_{k}"));
            header.push(format!("abs2_zeta_{k}"));
        }
        writeln!(out, "{}", header.join(","))?;
        for s in &self.samples {
            let mut row = vec![format!("{:.12e}", s.t)];
            for z in &s.zeta {
                row.push(format!("{:.12e}", z.re));
                row.push(format!("{:.12e}", z.im));
                row.push(format!("{:.12e}", z.norm_sqr()));
            }
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// State layout: `[ρ (J), θ (J), ∫ρ² (J), ∫ρ^k (K)]`.
struct Rhs<'a> {
    model: &'a ReducedModel,
    ks: &'a [MultiIndex],
    ceiling_sq: f64,
    crossed: Option<usize>,
}

impl System<f64, DVector<f64>> for &mut Rhs<'_> {
    fn system(&self, _t: f64, y: &DVector<f64>, dy: &mut DVector<f64>) {
        let j = self.model.modes();
        let rho: Vec<f64> = (0..j).map(|k| y[k].max(0.0)).collect();
        for k in 0..j {
            dy[k] = self.model.rate(k, &rho) * rho[k];
            let shift: f64 = self.model.a[k].iter().zip(&rho).map(|(a, r)| a * r).sum();
            dy[j + k] = -(self.model.lambda[k] + shift);
            dy[2 * j + k] = rho[k] * rho[k];
        }
        for (i, kk) in self.ks.iter().enumerate() {
            dy[3 * j + i] = monomial(kk, &rho);
        }
    }

    fn solout(&mut self, _t: f64, y: &DVector<f64>, _dy: &DVector<f64>) -> bool {
        let j = self.model.modes();
        if let Some(k) = (0..j).find(|&k| !(y[k] <= self.ceiling_sq)) {
            self.crossed = Some(k);
            return true;
        }
        false
    }
}

/// Integrates the truncated reduced system from `zeta0` up to `t_final`, or
/// until the ceiling is crossed.
pub fn integrate_reduced(
    model: &ReducedModel,
    zeta0: &[C],
    t_final: f64,
    cfg: &ReducedConfig,
) -> Result<ReducedTrajectory> {
    model.validate()?;
    let j = model.modes();
    if zeta0.len() != j {
        return Err(Error::InvalidInput(format!("{} initial amplitudes for {j} modes", zeta0.len())));
    }
    if !(t_final > 0.0) || !t_final.is_finite() {
        return Err(Error::InvalidInput(format!("t_final must be positive, got {t_final}")));
    }
    if !(cfg.rtol > 0.0) || !(cfg.ceiling_factor > 1.0) {
        return Err(Error::InvalidInput("rtol must be positive and ceiling_factor above one".into()));
    }
    let ks = model.resonant_indices();
    let dim = 3 * j + ks.len();
    let mut y0 = DVector::zeros(dim);
    for (k, z) in zeta0.iter().enumerate() {
        y0[k] = z.norm_sqr();
        y0[j + k] = z.arg();
    }
    let amp = zeta0.iter().fold(0.0f64, |m, z| m.max(z.norm()));
    let ceiling = cfg.ceiling_factor * amp;
    let mut rhs = Rhs {
        model,
        ks: &ks,
        ceiling_sq: if amp > 0.0 { ceiling * ceiling } else { f64::INFINITY },
        crossed: None,
    };
    let (times, states, stats) = {
        let mut solver = Dop853::from_param(
            &mut rhs,
            0.0,
            t_final,
            t_final,
            y0,
            cfg.rtol,
            1e-300,
            0.9,
            0.0,
            0.333,
            6.0,
            t_final,
            // The automatic initial step misjudges states with exact zeros.
            1e-6 * t_final,
            cfg.max_steps,
            u32::MAX,
            OutputType::Sparse,
        );
        let stats = solver
            .integrate()
            .map_err(|e| Error::NoConvergence(format!("reduced model integration: {e}")))?;
        (solver.x_out().clone(), solver.y_out().clone(), stats)
    };

    let samples: Vec<ReducedSample> = times
        .iter()
        .zip(&states)
        .map(|(&t, y)| ReducedSample {
            t,
            zeta: (0..j).map(|k| C::from_polar(y[k].max(0.0).sqrt(), y[j + k])).collect(),
            quartic: (0..j).map(|k| y[2 * j + k]).collect(),
            resonant: (0..ks.len()).map(|i| y[3 * j + i]).collect(),
        })
        .collect();

    let mut violation = 0.0f64;
    for w in states.windows(2) {
        for k in 0..j {
            let s = model.signatures[k];
            let scale = w[0][k].abs().max(w[1][k].abs());
            if scale > 0.0 {
                violation = violation.max((s * (w[1][k] - w[0][k])) / scale);
            }
        }
    }

    let blowup = rhs.crossed.map(|mode| {
        let last = states.last().expect("solver output is never empty");
        let t = *times.last().expect("solver output is never empty");
        let rho: Vec<f64> = (0..j).map(|k| last[k].max(0.0)).collect();
        // Dominant term ρ̇ ∝ ρ^{|m|+1} blows up after another ρ/(|m| ρ̇).
        let p = model
            .terms
            .iter()
            .filter(|d| d.j == mode)
            .max_by(|a, b| (a.gamma * monomial(&a.m, &rho)).total_cmp(&(b.gamma * monomial(&b.m, &rho))))
            .map(|d| d.m.iter().sum::<usize>().max(1))
            .unwrap_or(1) as f64;
        let rate = model.rate(mode, &rho);
        Blowup {
            time: t,
            estimate: t + 1.0 / (p * rate),
            mode,
        }
    });

    Ok(ReducedTrajectory {
        signatures: model.signatures.clone(),
        resonant_indices: ks,
        samples,
        monotonicity_violation: violation.max(0.0),
        blowup,
        accepted_steps: stats.accepted_steps,
        rejected_steps: stats.rejected_steps,
    })
}

/// `|ζ(t)|² = |ζ₀|² / (1 + 2 s Γ |ζ₀|² t)` for one mode.
pub fn single_mode_closed_form(rho0: f64, signature: f64, gamma: f64, t: f64) -> f64 {
    rho0 / (1.0 + 2.0 * signature * gamma * rho0 * t)
}

/// `1/(2Γ|ζ₀|²)`, the blow-up time of a single negative-signature mode.
pub fn blowup_time(gamma: f64, amplitude: f64) -> f64 {
    1.0 / (2.0 * gamma * amplitude * amplitude)
}

/// One row of the lower-bound ledger `|ζ_j(t)|² ≥ |ζ_j(0)|² + Γ_{jj}∫|ζ_j|⁴`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LedgerRow {
    pub mode: usize,
    pub gamma: f64,
    /// `min_t (|ζ_j(t)|² − |ζ_j(0)|² − Γ∫₀ᵗ|ζ_j|⁴)`, relative to `|ζ_j(0)|²`.
    pub worst_margin: f64,
    pub holds: bool,
    /// `|ζ_j(t)|² ≥ |ζ_j(0)|²` at every accepted step.
    pub nondecreasing: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReducedMetrics {
    pub final_time: f64,
    /// `∫₀ᵀ |ζ_j|⁴` per mode.
    pub quartic_integrals: Vec<f64>,
    /// `∫₀ᵀ |ζ^k|²` keyed by the resonant index.
    pub resonant_integrals: BTreeMap<String, f64>,
    /// `∫₀ᵀ|ζ_j|⁴ / ∫₀^{T/2}|ζ_j|⁴`; near one once the integral has saturated.
    pub growth_ratio: Vec<f64>,
    /// Lower-bound ledger for the negative-signature modes.
    pub ledger: Vec<LedgerRow>,
    /// The first negative-signature mode never drops below its initial size
    /// while its quartic integral keeps growing (or the model blows up).
    pub contradiction: bool,
}

const LEDGER_TOL: f64 = 1e-8;

pub fn reduced_instability_metrics(model: &ReducedModel, traj: &ReducedTrajectory) -> ReducedMetrics {
    let j = model.modes();
    let last = traj.last();
    let half = 0.5 * last.t;
    let growth_ratio: Vec<f64> = (0..j)
        .map(|k| {
            let q_end = last.quartic[k];
            let q_half = quartic_at(traj, k, half);
            if q_end > 0.0 && q_half > 0.0 {
                q_end / q_half
            } else {
                0.0
            }
        })
        .collect();
    let resonant_integrals = traj
        .resonant_indices
        .iter()
        .zip(&last.resonant)
        .map(|(k, v)| {
            let s: Vec<String> = k.iter().map(|e| e.to_string()).collect();
            (s.join(","), *v)
        })
        .collect();
    let ledger: Vec<LedgerRow> = (0..j)
        .filter(|&k| model.signatures[k] < 0.0)
        .map(|k| {
            let gamma = model.diagonal_gamma(k);
            let rho0 = traj.samples[0].zeta[k].norm_sqr();
            let scale = rho0.max(f64::MIN_POSITIVE);
            let mut worst = f64::INFINITY;
            let mut nondecreasing = true;
            for s in &traj.samples {
                let rho = s.zeta[k].norm_sqr();
                worst = worst.min((rho - rho0 - gamma * s.quartic[k]) / scale);
                nondecreasing &= rho >= rho0 * (1.0 - LEDGER_TOL);
            }
            LedgerRow {
                mode: k,
                gamma,
                worst_margin: worst,
                holds: worst >= -LEDGER_TOL,
                nondecreasing,
            }
        })
        .collect();
    let contradiction = ledger.first().is_some_and(|row| {
        let grows = traj.blowup.is_some() || growth_ratio[row.mode] >= 1.5;
        row.nondecreasing && grows
    });
    ReducedMetrics {
        final_time: last.t,
        quartic_integrals: last.quartic.clone(),
        resonant_integrals,
        growth_ratio,
        ledger,
        contradiction,
    }
}

fn quartic_at(traj: &ReducedTrajectory, j: usize, t: f64) -> f64 {
    let k = traj.samples.partition_point(|s| s.t < t);
    if k == 0 {
        return 0.0;
    }
    if k >= traj.samples.len() {
        return traj.last().quartic[j];
    }
    let (a, b) = (&traj.samples[k - 1], &traj.samples[k]);
    let w = (t - a.t) / (b.t - a.t);
    a.quartic[j] * (1.0 - w) + b.quartic[j] * w
}
