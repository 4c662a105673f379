//! Run configuration, read from TOML. Every section is optional and unknown
//! keys are rejected.

use std::path::{Path, PathBuf};

use nlsx_core::dynamics::{Absorber, EvolveConfig, ExperimentConfig, ReducedConfig, Splitting};
use nlsx_core::fgr::{FgrConfig, LimitingAbsorptionConfig};
use nlsx_core::spectral::SpectrumConfig;
use nlsx_core::{GridSpec, Nonlinearity, ProfileConfig};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub nonlinearity: Nonlinearity,
    pub omega: f64,
    pub node_count: usize,
    pub grid: GridConfig,
    pub sweep: Option<SweepRange>,
    pub profile: ProfileConfig,
    pub spectrum: SpectrumConfig,
    pub fgr: FgrStage,
    pub reduced: ReducedStage,
    pub evolve: EvolveStage,
    pub experiment: ExperimentConfig,
    pub output_dir: PathBuf,
    /// Seed of the randomized operator checks.
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            nonlinearity: Nonlinearity::saturable(),
            omega: 0.3,
            node_count: 1,
            grid: GridConfig::default(),
            sweep: None,
            profile: ProfileConfig::default(),
            spectrum: SpectrumConfig::default(),
            fgr: FgrStage::default(),
            reduced: ReducedStage::default(),
            evolve: EvolveStage::default(),
            experiment: ExperimentConfig::default(),
            output_dir: PathBuf::from("out"),
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    /// Explicit outer radius; otherwise `r_max_scale / √ω`.
    pub r_max: Option<f64>,
    pub r_max_scale: f64,
    pub n_points: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            r_max: None,
            r_max_scale: 30.0,
            // 2(n + 1) = 1600 keeps the sine transform fast.
            n_points: 799,
        }
    }
}

impl GridConfig {
    pub fn spec(&self, omega: f64, scale: f64) -> GridSpec {
        GridSpec {
            r_max: self.r_max.unwrap_or(self.r_max_scale / omega.sqrt()),
            n_points: ((self.n_points as f64) * scale).round() as usize,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepRange {
    pub omega_min: f64,
    pub omega_max: f64,
    pub points: usize,
    /// Also compute the diagonal FGR coefficients per row.
    #[serde(default)]
    pub fgr: bool,
}

impl SweepRange {
    pub fn omegas(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.omega_min];
        }
        let step = (self.omega_max - self.omega_min) / (self.points - 1) as f64;
        (0..self.points).map(|i| self.omega_min + step * i as f64).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FgrStage {
    /// Largest `|m|` searched for resonant multi-indices.
    pub resonance_cap: usize,
    pub positivity_tol: f64,
    pub limiting: LimitingAbsorptionConfig,
}

impl Default for FgrStage {
    fn default() -> Self {
        let d = FgrConfig::default();
        FgrStage {
            resonance_cap: 6,
            positivity_tol: d.positivity_tol,
            limiting: d.limiting,
        }
    }
}

impl FgrStage {
    pub fn solver(&self) -> FgrConfig {
        FgrConfig {
            limiting: self.limiting.clone(),
            positivity_tol: self.positivity_tol,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReducedStage {
    /// Integration time as a multiple of the blow-up time `1/(2Γδ²)`.
    pub horizon_factor: f64,
    /// Used when no blow-up time exists.
    pub t_final: f64,
    pub solver: ReducedConfig,
}

impl Default for ReducedStage {
    fn default() -> Self {
        ReducedStage {
            horizon_factor: 2.0,
            t_final: 1e6,
            solver: ReducedConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvolveStage {
    pub t_final: f64,
    /// Relative seed size `‖r(0)‖/‖φ‖`; zero evolves the bare standing wave.
    pub delta: f64,
    pub samples: usize,
    /// Write the final field every this many grid points; zero disables it.
    pub snapshot_stride: usize,
    pub solver: EvolveConfig,
}

impl Default for EvolveStage {
    fn default() -> Self {
        EvolveStage {
            t_final: 100.0,
            delta: 0.0,
            samples: 100,
            snapshot_stride: 4,
            solver: EvolveConfig {
                dt: 0.05,
                splitting: Splitting::Strang,
                band_limit: true,
                absorber: Some(Absorber::default()),
                ..EvolveConfig::default()
            },
        }
    }
}

fn positive(name: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::Config(format!("{name} must be positive, got {v}")))
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.nonlinearity
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        positive("omega", self.omega)?;
        positive("grid.r_max_scale", self.grid.r_max_scale)?;
        if let Some(r) = self.grid.r_max {
            positive("grid.r_max", r)?;
        }
        if self.grid.n_points < 16 {
            return Err(CliError::Config(format!("grid.n_points must be at least 16, got {}", self.grid.n_points)));
        }
        let p = &self.profile;
        positive("profile.phi0_min", p.phi0_min)?;
        positive("profile.newton_tol", p.newton_tol)?;
        positive("profile.singular_tol", p.singular_tol)?;
        positive("profile.slope_tol", p.slope_tol)?;
        if !(p.phi0_max > p.phi0_min) {
            return Err(CliError::Config("profile.phi0_max must exceed profile.phi0_min".into()));
        }
        let s = &self.spectrum;
        for (name, v) in [
            ("kernel_tol", s.kernel_tol),
            ("edge_tol", s.edge_tol),
            ("gap_imag_tol", s.gap_imag_tol),
            ("off_axis_tol", s.off_axis_tol),
            ("pair_tol", s.pair_tol),
            ("sig_tol", s.sig_tol),
            ("multiplicity_tol", s.multiplicity_tol),
            ("residual_tol", s.residual_tol),
            ("negative_tol", s.negative_tol),
        ] {
            positive(&format!("spectrum.{name}"), v)?;
        }
        positive("fgr.positivity_tol", self.fgr.positivity_tol)?;
        if self.fgr.resonance_cap == 0 {
            return Err(CliError::Config("fgr.resonance_cap must be at least 1".into()));
        }
        positive("reduced.horizon_factor", self.reduced.horizon_factor)?;
        positive("reduced.t_final", self.reduced.t_final)?;
        positive("reduced.solver.rtol", self.reduced.solver.rtol)?;
        positive("evolve.t_final", self.evolve.t_final)?;
        positive("evolve.solver.dt", self.evolve.solver.dt)?;
        positive("experiment.evolve.dt", self.experiment.evolve.dt)?;
        positive("experiment.modulation.tol", self.experiment.modulation.tol)?;
        if !(self.evolve.delta >= 0.0) || !(self.experiment.delta >= 0.0) {
            return Err(CliError::Config("seed sizes must be nonnegative".into()));
        }
        if self.evolve.samples == 0 || self.experiment.samples == 0 {
            return Err(CliError::Config("sample counts must be positive".into()));
        }
        if let Some(sw) = &self.sweep {
            positive("sweep.omega_min", sw.omega_min)?;
            if sw.points == 0 || !(sw.omega_max >= sw.omega_min) || (sw.points > 1 && sw.omega_max == sw.omega_min) {
                return Err(CliError::Config(format!(
                    "sweep range [{}, {}] with {} points is empty",
                    sw.omega_min, sw.omega_max, sw.points
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_round_trips() {
        let c = RunConfig::default();
        let back = RunConfig::from_toml(&c.to_toml().unwrap()).unwrap();
        assert_eq!(back, c);
        c.validate().unwrap();
    }

    #[test]
    fn sections_are_optional_and_unknown_keys_fail() {
        let c = RunConfig::from_toml("omega = 0.5\n[grid]\nn_points = 400\n").unwrap();
        assert_eq!(c.omega, 0.5);
        assert_eq!(c.grid.n_points, 400);
        assert_eq!(c.profile, ProfileConfig::default());
        assert!(RunConfig::from_toml("omegaa = 0.5\n").is_err());
        assert!(RunConfig::from_toml("[grid]\npoints = 3\n").is_err());
    }

    #[test]
    fn nonlinearity_is_tagged() {
        let c = RunConfig::from_toml("[nonlinearity]\nkind = \"pure-power\"\np = 3.0\n").unwrap();
        assert_eq!(c.nonlinearity, Nonlinearity::cubic());
    }

    #[test]
    fn validation_rejects_bad_values() {
        for text in [
            "omega = -1.0",
            "[grid]\nn_points = 3",
            "[spectrum]\npair_tol = 0.0",
            "[sweep]\nomega_min = 0.5\nomega_max = 0.4\npoints = 3",
            "[sweep]\nomega_min = 0.5\nomega_max = 0.6\npoints = 0",
            "[nonlinearity]\nkind = \"pure-power\"\np = 7.0",
        ] {
            let c = RunConfig::from_toml(text).unwrap();
            assert!(c.validate().is_err(), "{text}");
        }
    }

    #[test]
    fn sweep_points_are_inclusive() {
        let s = SweepRange {
            omega_min: 0.3,
            omega_max: 0.5,
            points: 3,
            fgr: false,
        };
        let w = s.omegas();
        assert_eq!(w.len(), 3);
        assert_eq!(w[0], 0.3);
        assert!((w[2] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn grid_scale_multiplies_points() {
        let g = GridConfig::default().spec(0.25, 2.0);
        assert_eq!(g.n_points, 1598);
        assert_eq!(g.r_max, 60.0);
    }
}
