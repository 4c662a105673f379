//! Seeded evolutions near an excited standing wave, compared with the
//! reduced model started from the same seed.

use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fgr::GapMode;
use crate::nonlinearity::Nonlinearity;
use crate::profile::{Profile, ProfileConfig};

use super::evolve::{nls_evolve, Absorber, EvolveConfig, FieldState, Modulation, Observe, Splitting};
use super::modulation::{mode_field, mode_project, modulation_decompose, orbital_distance, ModulationConfig, OrbitFamily};
use super::reduced::{blowup_time, integrate_reduced, reduced_instability_metrics, ReducedConfig, ReducedMetrics, ReducedModel};

type C = Complex64;

/// How `δ` sizes the seed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SeedScale {
    /// `δ` is the mode coordinate `z(0)` of the σ₃-normalized eigenvector.
    ModeCoordinate,
    /// `δ` is `‖r(0)‖ / ‖φ‖`.
    #[default]
    RelativeToProfile,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub delta: f64,
    pub scale: SeedScale,
    /// Tube radius as a multiple of the seed's orbital distance.
    pub tube_factor: f64,
    /// Horizon as a multiple of the reduced blow-up time, when one exists.
    pub horizon_factor: f64,
    /// Explicit horizon; required when the seed mode has positive signature.
    pub horizon: Option<f64>,
    /// Cap on the simulated time, whatever the horizon.
    pub time_budget: Option<f64>,
    /// Sample count over the simulated interval.
    pub samples: usize,
    pub stop_at_exit: bool,
    pub evolve: EvolveConfig,
    pub reduced: ReducedConfig,
    pub modulation: ModulationConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            delta: 1e-2,
            scale: SeedScale::RelativeToProfile,
            tube_factor: 10.0,
            horizon_factor: 5.0,
            horizon: None,
            time_budget: None,
            samples: 400,
            stop_at_exit: true,
            evolve: EvolveConfig {
                dt: 0.05,
                splitting: Splitting::Strang,
                band_limit: true,
                absorber: Some(Absorber::default()),
                ..EvolveConfig::default()
            },
            reduced: ReducedConfig::default(),
            modulation: ModulationConfig::default(),
        }
    }
}

/// Pipeline artifacts the experiment runs on.
pub struct ExperimentInputs<'a> {
    pub nl: &'a Nonlinearity,
    /// Profile with `∂_ωφ` attached.
    pub profile: &'a Profile,
    pub profile_cfg: &'a ProfileConfig,
    pub modes: &'a [GapMode],
    pub model: Option<&'a ReducedModel>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSample {
    pub t: f64,
    pub distance: f64,
    pub mass: f64,
    pub energy: f64,
    pub modulation: Option<Modulation>,
    /// Mode coordinates of `R`; empty when the decomposition failed.
    pub z: Vec<C>,
    /// `|ζ_seed(t)|²` of the reduced model.
    pub reduced_abs2: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstabilityReport {
    pub omega: f64,
    pub node_count: usize,
    pub seed_mode: Option<usize>,
    pub seed_signature: Option<f64>,
    /// Seed mode coordinate `z(0)`.
    pub seed_amplitude: f64,
    /// `‖r(0)‖ / ‖φ‖`.
    pub seed_relative_size: f64,
    pub initial_distance: f64,
    pub tube_radius: f64,
    /// `1/(2Γ_{jj}δ²)` for a negative-signature seed.
    pub reduced_blowup_time: Option<f64>,
    pub horizon: f64,
    pub simulated_time: f64,
    /// The time budget ended the run before the horizon and before any exit.
    pub horizon_truncated: bool,
    pub tube_exit_time: Option<f64>,
    /// `max_t |z_seed(t)| / |z_seed(0)|` over decomposed samples.
    pub max_growth: f64,
    pub growth_observed: bool,
    /// `tube_exit_time / reduced_blowup_time`.
    pub exit_to_blowup_ratio: Option<f64>,
    /// The ratio lies within one decade of one.
    pub order_of_magnitude_agreement: Option<bool>,
    pub max_distance: f64,
    pub mass_drift: f64,
    pub decomposition_failures: usize,
    pub reduced: Option<ReducedMetrics>,
    pub samples: Vec<ExperimentSample>,
}

impl InstabilityReport {
    pub fn write_trajectory_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let j = self.samples.iter().map(|s| s.z.len()).max().unwrap_or(0);
        let mut header = vec!["t".to_string(), "orbital_distance".into(), "mass".into(), "energy".into()];
        header.push("omega".into());
        header.push("gamma".into());
        for k in 0..j {
            header.push(format!("re_z_{k}"));
            header.push(format!("im_z_{k}"));
        }
        header.push("reduced_abs2".into());
        writeln!(out, "{}", header.join(","))?;
        let f = |v: Option<f64>| v.map(|x| format!("{x:.12e}")).unwrap_or_default();
        for s in &self.samples {
            let mut row = vec![
                format!("{:.12e}", s.t),
                format!("{:.12e}", s.distance),
                format!("{:.12e}", s.mass),
                format!("{:.12e}", s.energy),
                f(s.modulation.map(|m| m.omega)),
                f(s.modulation.map(|m| m.gamma)),
            ];
            for k in 0..j {
                row.push(f(s.z.get(k).map(|z| z.re)));
                row.push(f(s.z.get(k).map(|z| z.im)));
            }
            row.push(f(s.reduced_abs2));
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Initial perturbation `r(0)` and the gap mode it excites.
#[derive(Clone, Debug)]
pub struct Seed {
    pub mode: Option<usize>,
    /// Mode coordinate `z(0)`, or `ε` for the profile-shaped fallback.
    pub amplitude: f64,
    pub field: Vec<C>,
}

/// The first negative-signature gap mode, else the first gap mode, scaled
/// by `δ`; without gap modes the perturbation is `δφ`.
pub fn seed_perturbation(profile: &Profile, modes: &[GapMode], delta: f64, scale: SeedScale) -> Seed {
    let grid = profile.grid.as_ref();
    let mode = modes
        .iter()
        .position(|m| m.signature < 0.0)
        .or(if modes.is_empty() { None } else { Some(0) });
    match mode {
        Some(j) => {
            let shape = mode_field(&modes[j], C::new(1.0, 0.0));
            let z = match scale {
                SeedScale::ModeCoordinate => delta,
                SeedScale::RelativeToProfile => delta * profile.norm() / grid.cnorm(&shape),
            };
            Seed {
                mode,
                amplitude: z,
                field: shape.iter().map(|v| v * z).collect(),
            }
        }
        None => Seed {
            mode,
            amplitude: delta,
            field: profile.values.iter().map(|&p| C::new(delta * p, 0.0)).collect(),
        },
    }
}

/// Seeds `u₀ = φ + r(0)` with [`seed_perturbation`], evolves, and tracks the
/// mode coordinates, the orbital distance and the tube exit.
pub fn instability_experiment(inp: &ExperimentInputs, cfg: &ExperimentConfig) -> Result<InstabilityReport> {
    let profile = inp.profile;
    let grid = profile.grid.as_ref();
    let omega = profile.omega;
    if !(cfg.delta >= 0.0) || !(cfg.tube_factor > 1.0) || !(cfg.horizon_factor > 0.0) || cfg.samples == 0 {
        return Err(Error::InvalidInput("experiment needs delta >= 0, tube_factor > 1, horizon_factor > 0, samples > 0".into()));
    }
    let family = OrbitFamily::new(inp.nl, profile, inp.profile_cfg)?;
    let phi_norm = profile.norm();

    let Seed {
        mode: seed_mode,
        amplitude,
        field: r0,
    } = seed_perturbation(profile, inp.modes, cfg.delta, cfg.scale);
    let u0: Vec<C> = profile.values.iter().zip(&r0).map(|(p, r)| p + r).collect();
    let state0 = FieldState::new(grid, inp.nl, u0, cfg.evolve.flow)?;
    let initial_distance = orbital_distance(&state0.u, profile)?.distance;
    let tube_radius = cfg.tube_factor * initial_distance;

    let seed_signature = seed_mode.map(|j| inp.modes[j].signature.signum());
    let gamma_jj = match (seed_mode, inp.model) {
        (Some(j), Some(model)) => Some(model.diagonal_gamma(j)),
        _ => None,
    };
    let reduced_blowup_time = match (seed_signature, gamma_jj) {
        (Some(s), Some(g)) if s < 0.0 && g > 0.0 && amplitude > 0.0 => Some(blowup_time(g, amplitude)),
        _ => None,
    };
    let horizon = match (cfg.horizon, reduced_blowup_time) {
        (Some(h), _) => h,
        (None, Some(t)) => cfg.horizon_factor * t,
        (None, None) => {
            return Err(Error::InvalidInput(
                "no reduced blow-up time to scale the horizon; set an explicit horizon".into(),
            ))
        }
    };
    let simulated = cfg.time_budget.map_or(horizon, |b| b.min(horizon));

    let reduced_traj = match (seed_mode, inp.model) {
        (Some(j), Some(model)) if amplitude > 0.0 => {
            let mut zeta0 = vec![C::new(0.0, 0.0); model.modes()];
            zeta0[j] = C::new(amplitude, 0.0);
            Some(integrate_reduced(model, &zeta0, horizon, &cfg.reduced)?)
        }
        _ => None,
    };

    let mut ecfg = cfg.evolve.clone();
    ecfg.sample_interval = simulated / cfg.samples as f64;
    let mut samples = Vec::with_capacity(cfg.samples + 1);
    let mut omega_guess = omega;
    let mut tube_exit_time = None;
    let mut failures = 0usize;
    let last = nls_evolve(grid, inp.nl, &state0, simulated, &ecfg, |st| {
        let distance = orbital_distance(&st.u, profile)?.distance;
        let (modulation, z) = match modulation_decompose(&family, &st.u, omega_guess, &cfg.modulation) {
            Ok(d) => {
                omega_guess = d.omega;
                let proj = mode_project(&d.residual, inp.modes, grid);
                (Some(Modulation { omega: d.omega, gamma: d.gamma }), proj.z)
            }
            Err(Error::DecompositionFailed(_)) => {
                failures += 1;
                (None, Vec::new())
            }
            Err(e) => return Err(e),
        };
        let reduced_abs2 = match (&reduced_traj, seed_mode) {
            (Some(tr), Some(j)) => Some(tr.modulus_sq_at(j, st.time)),
            _ => None,
        };
        samples.push(ExperimentSample {
            t: st.time,
            distance,
            mass: st.mass,
            energy: st.energy,
            modulation,
            z,
            reduced_abs2,
        });
        if tube_exit_time.is_none() && distance > tube_radius {
            tube_exit_time = Some(st.time);
            if cfg.stop_at_exit {
                return Ok(Observe::Stop);
            }
        }
        Ok(Observe::Continue)
    })?;

    let max_growth = match seed_mode {
        Some(j) if amplitude > 0.0 => samples
            .iter()
            .filter_map(|s| s.z.get(j))
            .map(|z| z.norm() / amplitude)
            .fold(0.0, f64::max),
        _ => 0.0,
    };
    let exit_to_blowup_ratio = match (tube_exit_time, reduced_blowup_time) {
        (Some(t), Some(ts)) => Some(t / ts),
        _ => None,
    };
    let max_distance = samples.iter().map(|s| s.distance).fold(0.0, f64::max);
    let mass_drift = (last.mass - state0.mass).abs() / state0.mass.max(f64::MIN_POSITIVE);
    let reduced = match (&reduced_traj, inp.model) {
        (Some(tr), Some(model)) => Some(reduced_instability_metrics(model, tr)),
        _ => None,
    };
    Ok(InstabilityReport {
        omega,
        node_count: profile.node_count,
        seed_mode,
        seed_signature,
        seed_amplitude: amplitude,
        seed_relative_size: grid.cnorm(&r0) / phi_norm,
        initial_distance,
        tube_radius,
        reduced_blowup_time,
        horizon,
        simulated_time: last.time,
        horizon_truncated: tube_exit_time.is_none() && simulated < horizon,
        tube_exit_time,
        max_growth,
        growth_observed: max_growth >= 2.0,
        exit_to_blowup_ratio,
        order_of_magnitude_agreement: exit_to_blowup_ratio.map(|r| (0.1..=10.0).contains(&r)),
        max_distance,
        mass_drift,
        decomposition_failures: failures,
        reduced,
        samples,
    })
}
