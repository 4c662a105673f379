//! Stage runner: profile → spectrum → verdict → FGR → reduced model →
//! evolution or instability experiment, with every result persisted.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use nlsx_core::dynamics::{
    blowup_time, instability_experiment, integrate_reduced, nls_evolve, orbital_distance, reduced_instability_metrics,
    seed_perturbation, ExperimentInputs, FieldState, InstabilityReport, Observe, ReducedMetrics, ReducedModel,
    SeedScale,
};
use nlsx_core::fgr::{
    fgr_matrix, resonance_set, taylor_coefficients_for, ContinuumProjector, FgrMatrix, GapMode,
};
use nlsx_core::io::{
    schema_comment, versioned_json, write_eigenvalues_csv, write_profile_csv, write_spectrum_csv, ProfileSidecar,
    SCHEMA_VERSION,
};
use nlsx_core::profile::{mass_slope_value, solve_with_derivative};
use nlsx_core::spectral::{discrete_spectrum, generalized_kernel, stability_verdict, Spectrum, StabilityReport, Verdict};
use nlsx_core::{GridSpec, LinearizedOperator, Nonlinearity, Profile, RadialGrid, Spinor};
use num_complex::Complex64 as C;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{CliError, StageContext};

/// Pipeline verbs, ordered by how far they run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verb {
    Profile,
    Spectrum,
    Verdict,
    Fgr,
    Reduce,
    Evolve,
    Experiment,
}

impl Verb {
    fn needs_spectrum(self) -> bool {
        self >= Verb::Spectrum
    }

    fn needs_verdict(self) -> bool {
        self >= Verb::Verdict && self != Verb::Evolve
    }

    fn needs_fgr(self) -> bool {
        matches!(self, Verb::Fgr | Verb::Reduce | Verb::Experiment)
    }
}

/// Writes named files under one directory and remembers them.
pub struct Artifacts {
    dir: PathBuf,
    pub files: Vec<String>,
}

impl Artifacts {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::Output {
            path: dir.display().to_string(),
            message: e.to_string(),
        })?;
        Ok(Artifacts {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, contents: &[u8]) -> Result<(), CliError> {
        let path = self.dir.join(name);
        fs::write(&path, contents).map_err(|e| CliError::Output {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        self.files.push(name.to_string());
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let text = versioned_json(value).stage("output")?;
        self.write(name, text.as_bytes())
    }

    /// CSV produced by a core writer, prefixed with the schema comment unless
    /// the writer already emitted it.
    pub fn write_csv(
        &mut self,
        name: &str,
        fill: impl FnOnce(&mut Vec<u8>) -> nlsx_core::Result<()>,
    ) -> Result<(), CliError> {
        let mut body = Vec::new();
        fill(&mut body).stage("output")?;
        let comment = schema_comment();
        if body.starts_with(comment.as_bytes()) {
            return self.write(name, &body);
        }
        let mut out = format!("{comment}\n").into_bytes();
        out.extend_from_slice(&body);
        self.write(name, &out)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileSummary {
    pub phi0: f64,
    pub mass: f64,
    pub mass_slope: Option<f64>,
    pub residual_norm: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilitySummary {
    pub gap_eigenvalues: Vec<f64>,
    pub signatures: Vec<i8>,
    pub negative_index: usize,
    pub kernel_dimension: Option<usize>,
    pub inconsistency: Option<String>,
}

/// Randomized operator-symmetry probes, reproducible from the seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomChecks {
    pub seed: u64,
    pub samples: usize,
    /// Worst `|⟨σ₃Hf, g⟩ − ⟨f, σ₃Hg⟩|`, relative.
    pub sigma3_symmetry_defect: f64,
    /// Worst `‖σ₁Hf + Hσ₁f‖ / ‖Hf‖`.
    pub sigma1_anticommutation_defect: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FgrCondition {
    /// Every diagonal coefficient is positive beyond tolerance.
    Holds,
    Fails,
    /// No gap eigenvalues.
    NotApplicable,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FgrSummary {
    pub condition: FgrCondition,
    /// `Γ` of the lowest resonant index of each mode.
    pub diagonal: Vec<f64>,
    pub all_nonnegative: bool,
    pub entries: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReducedSummary {
    pub seed_mode: Option<usize>,
    pub seed_amplitude: f64,
    pub final_time: f64,
    pub predicted_blowup_time: Option<f64>,
    pub blowup_detected: Option<f64>,
    pub contradiction: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvolveSummary {
    pub t_final: f64,
    pub seed_relative_size: f64,
    pub max_distance: f64,
    pub mass_drift: f64,
    pub energy_drift: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub seed_mode: Option<usize>,
    pub seed_relative_size: f64,
    pub reduced_blowup_time: Option<f64>,
    pub horizon: f64,
    pub simulated_time: f64,
    pub tube_radius: f64,
    pub tube_exit_time: Option<f64>,
    pub max_growth: f64,
    pub growth_observed: bool,
    pub exit_to_blowup_ratio: Option<f64>,
    pub order_of_magnitude_agreement: Option<bool>,
    pub horizon_truncated: bool,
}

impl From<&InstabilityReport> for ExperimentSummary {
    fn from(r: &InstabilityReport) -> Self {
        ExperimentSummary {
            seed_mode: r.seed_mode,
            seed_relative_size: r.seed_relative_size,
            reduced_blowup_time: r.reduced_blowup_time,
            horizon: r.horizon,
            simulated_time: r.simulated_time,
            tube_radius: r.tube_radius,
            tube_exit_time: r.tube_exit_time,
            max_growth: r.max_growth,
            growth_observed: r.growth_observed,
            exit_to_blowup_ratio: r.exit_to_blowup_ratio,
            order_of_magnitude_agreement: r.order_of_magnitude_agreement,
            horizon_truncated: r.horizon_truncated,
        }
    }
}

/// Top-level record of one run: the verdict chain and the files written.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub schema_version: u32,
    pub verb: Verb,
    pub seed: u64,
    pub nonlinearity: Nonlinearity,
    pub omega: f64,
    pub node_count: usize,
    pub grid: GridSpec,
    pub profile: ProfileSummary,
    pub verdict: Option<Verdict>,
    pub stability: Option<StabilitySummary>,
    pub randomized_checks: Option<RandomChecks>,
    pub fgr: Option<FgrSummary>,
    pub reduced: Option<ReducedSummary>,
    pub evolution: Option<EvolveSummary>,
    pub experiment: Option<ExperimentSummary>,
    pub artifacts: Vec<String>,
}

/// In-memory results shared between stages.
pub struct Solved {
    pub profile: Profile,
    pub h: Option<LinearizedOperator>,
    pub spectrum: Option<Spectrum>,
    pub modes: Vec<GapMode>,
    pub report: Option<StabilityReport>,
}

pub fn solve_profile(cfg: &RunConfig, omega: f64, grid: &GridSpec) -> Result<Profile, CliError> {
    let g = Arc::new(RadialGrid::new(grid.r_max, grid.n_points).stage("profile")?);
    solve_with_derivative(&cfg.nonlinearity, omega, cfg.node_count, g, &cfg.profile).stage("profile")
}

/// Profile, spectrum and (optionally) the verdict at one frequency.
pub fn solve_linear(cfg: &RunConfig, omega: f64, grid: &GridSpec, verdict: bool) -> Result<Solved, CliError> {
    let profile = solve_profile(cfg, omega, grid)?;
    let h = LinearizedOperator::new(&cfg.nonlinearity, &profile).stage("spectrum")?;
    let spectrum = discrete_spectrum(&h, &cfg.spectrum).stage("spectrum")?;
    let modes = GapMode::from_spectrum(&spectrum);
    let report = if verdict {
        let kernel = generalized_kernel(&h, &cfg.spectrum);
        Some(
            stability_verdict(&h, &spectrum, kernel.as_ref(), mass_slope_value(&profile).ok(), &cfg.spectrum)
                .stage("verdict")?,
        )
    } else {
        None
    };
    Ok(Solved {
        profile,
        h: Some(h),
        spectrum: Some(spectrum),
        modes,
        report,
    })
}

pub fn fgr_stage(cfg: &RunConfig, h: &LinearizedOperator, profile: &Profile, modes: &[GapMode]) -> Result<FgrMatrix, CliError> {
    let lambda: Vec<f64> = modes.iter().map(|m| m.lambda).collect();
    let res = resonance_set(&lambda, profile.omega, cfg.fgr.resonance_cap).stage("fgr")?;
    let coeffs = taylor_coefficients_for(&cfg.nonlinearity, profile, modes, &res).stage("fgr")?;
    let xis: Vec<Spinor> = modes.iter().map(|m| m.xi.clone()).collect();
    let projector = ContinuumProjector::new(h, &xis).stage("fgr")?;
    fgr_matrix(h, &coeffs, &projector, &res, &cfg.fgr.solver()).stage("fgr")
}

/// Diagonal coefficient of each mode: the entry with `m = δ_j`.
pub fn fgr_diagonal(fgr: &FgrMatrix) -> Vec<(f64, f64)> {
    (0..fgr.lambda.len())
        .map(|j| {
            let mut m = vec![0; fgr.lambda.len()];
            m[j] = 1;
            fgr.get(&m, j).map(|e| (e.gamma, e.scale)).unwrap_or((0.0, 0.0))
        })
        .collect()
}

fn fgr_summary(cfg: &RunConfig, fgr: &FgrMatrix) -> FgrSummary {
    let diag = fgr_diagonal(fgr);
    let holds = diag.iter().all(|&(g, s)| g > cfg.fgr.positivity_tol * s);
    FgrSummary {
        condition: if holds { FgrCondition::Holds } else { FgrCondition::Fails },
        diagonal: diag.iter().map(|d| d.0).collect(),
        all_nonnegative: fgr.all_nonnegative(),
        entries: fgr.entries.len(),
    }
}

fn random_spinor(rng: &mut ChaCha8Rng, n: usize) -> Spinor {
    let mut draw = || C::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    Spinor {
        up: (0..n).map(|_| draw()).collect(),
        down: (0..n).map(|_| draw()).collect(),
    }
}

pub fn random_checks(h: &LinearizedOperator, seed: u64, samples: usize) -> RandomChecks {
    let grid = h.grid();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut sym, mut anti) = (0.0f64, 0.0f64);
    for _ in 0..samples {
        let f = random_spinor(&mut rng, grid.len());
        let g = random_spinor(&mut rng, grid.len());
        let hf = h.apply(&f);
        let hg = h.apply(&g);
        let lhs = hf.sigma3().dot(&g, grid);
        let rhs = f.dot(&hg.sigma3(), grid);
        let scale = hf.norm(grid) * g.norm(grid) + f.norm(grid) * hg.norm(grid);
        sym = sym.max((lhs - rhs).norm() / scale);
        let mut s = hf.sigma1();
        s.axpy(C::new(1.0, 0.0), &h.apply(&f.sigma1()));
        anti = anti.max(s.norm(grid) / hf.norm(grid));
    }
    RandomChecks {
        seed,
        samples,
        sigma3_symmetry_defect: sym,
        sigma1_anticommutation_defect: anti,
    }
}

fn key_file(key: &str) -> String {
    format!("fgr_{}.csv", key.replace(',', "-").replace('|', "_"))
}

/// Runs `verb` with outputs under `cfg.output_dir`.
pub fn run_pipeline(cfg: &RunConfig, verb: Verb, grid_scale: f64) -> Result<Summary, CliError> {
    cfg.validate()?;
    if !(grid_scale > 0.0) || !grid_scale.is_finite() {
        return Err(CliError::Config(format!("grid scale must be positive, got {grid_scale}")));
    }
    let grid = cfg.grid.spec(cfg.omega, grid_scale);
    if grid.n_points < 16 {
        return Err(CliError::Config(format!("scaled grid has only {} points", grid.n_points)));
    }
    let nl = &cfg.nonlinearity;
    let mut out = Artifacts::create(&cfg.output_dir)?;

    let solved = if verb.needs_spectrum() {
        solve_linear(cfg, cfg.omega, &grid, verb.needs_verdict())?
    } else {
        Solved {
            profile: solve_profile(cfg, cfg.omega, &grid)?,
            h: None,
            spectrum: None,
            modes: Vec::new(),
            report: None,
        }
    };
    let profile = &solved.profile;
    let sidecar = ProfileSidecar::new(nl, profile);
    out.write_csv("profile.csv", |b| write_profile_csv(profile, b))?;
    out.write_json("profile.json", &sidecar)?;

    let mut summary = Summary {
        schema_version: SCHEMA_VERSION,
        verb,
        seed: cfg.seed,
        nonlinearity: nl.clone(),
        omega: cfg.omega,
        node_count: cfg.node_count,
        grid: grid.clone(),
        profile: ProfileSummary {
            phi0: profile.phi0,
            mass: profile.mass,
            mass_slope: sidecar.mass_slope,
            residual_norm: sidecar.residual_norm,
        },
        verdict: None,
        stability: None,
        randomized_checks: None,
        fgr: None,
        reduced: None,
        evolution: None,
        experiment: None,
        artifacts: Vec::new(),
    };

    if let Some(spectrum) = &solved.spectrum {
        out.write_csv("spectrum.csv", |b| write_spectrum_csv(spectrum, b))?;
        out.write_csv("eigenvalues.csv", |b| write_eigenvalues_csv(spectrum, b))?;
    }
    if let (Some(report), Some(h)) = (&solved.report, &solved.h) {
        out.write_json("stability_report.json", report)?;
        summary.verdict = Some(report.verdict);
        summary.stability = Some(StabilitySummary {
            gap_eigenvalues: report.signatures.iter().map(|s| s.lambda).collect(),
            signatures: report.signatures.iter().map(|s| s.signature.as_int()).collect(),
            negative_index: report.negative_index,
            kernel_dimension: report.kernel_dimension,
            inconsistency: report.inconsistency.clone(),
        });
        summary.randomized_checks = Some(random_checks(h, cfg.seed, 8));
    }

    let mut model = None;
    if verb.needs_fgr() {
        let h = solved.h.as_ref().expect("spectrum stage ran");
        if solved.modes.is_empty() {
            summary.fgr = Some(FgrSummary {
                condition: FgrCondition::NotApplicable,
                diagonal: Vec::new(),
                all_nonnegative: true,
                entries: 0,
            });
        } else {
            let fgr = fgr_stage(cfg, h, profile, &solved.modes)?;
            out.write_json("fgr_matrix.json", &fgr)?;
            for key in fgr.entries.keys() {
                out.write_csv(&key_file(key), |b| fgr.write_diagnostics_csv(key, b))?;
            }
            summary.fgr = Some(fgr_summary(cfg, &fgr));
            model = Some(ReducedModel::from_fgr(&solved.modes, &fgr, None).stage("reduce")?);
        }
    }

    if verb == Verb::Reduce {
        if let Some(model) = &model {
            summary.reduced = Some(reduce_stage(cfg, model, profile, &solved.modes, &mut out)?);
        }
    }

    if verb == Verb::Evolve {
        summary.evolution = Some(evolve_stage(cfg, profile, &solved.modes, &mut out)?);
    }

    if verb == Verb::Experiment {
        let inp = ExperimentInputs {
            nl,
            profile,
            profile_cfg: &cfg.profile,
            modes: &solved.modes,
            model: model.as_ref(),
        };
        let report = instability_experiment(&inp, &cfg.experiment).stage("experiment")?;
        out.write_csv("experiment_trajectory.csv", |b| report.write_trajectory_csv(b))?;
        let mut compact = report.clone();
        compact.samples.clear();
        out.write_json("experiment_report.json", &compact)?;
        summary.experiment = Some(ExperimentSummary::from(&report));
    }

    out.files.push("summary.json".into());
    summary.artifacts = out.files.clone();
    out.write_json("summary.json", &summary)?;
    Ok(summary)
}

#[derive(Serialize)]
struct ReducedArtifact<'a> {
    seed_mode: Option<usize>,
    seed_amplitude: f64,
    metrics: &'a ReducedMetrics,
}

fn reduce_stage(
    cfg: &RunConfig,
    model: &ReducedModel,
    profile: &Profile,
    modes: &[GapMode],
    out: &mut Artifacts,
) -> Result<ReducedSummary, CliError> {
    let seed = seed_perturbation(profile, modes, cfg.experiment.delta, cfg.experiment.scale);
    let j = seed.mode.expect("gap modes exist");
    let mut zeta0 = vec![C::new(0.0, 0.0); model.modes()];
    zeta0[j] = C::new(seed.amplitude, 0.0);
    let gamma = model.diagonal_gamma(j);
    let predicted = (model.signatures[j] < 0.0 && gamma > 0.0 && seed.amplitude > 0.0)
        .then(|| blowup_time(gamma, seed.amplitude));
    let t_final = predicted.map_or(cfg.reduced.t_final, |t| cfg.reduced.horizon_factor * t);
    let traj = integrate_reduced(model, &zeta0, t_final, &cfg.reduced.solver).stage("reduce")?;
    let metrics = reduced_instability_metrics(model, &traj);
    out.write_csv("reduced_trajectory.csv", |b| traj.write_csv(b))?;
    out.write_json(
        "reduced_metrics.json",
        &ReducedArtifact {
            seed_mode: seed.mode,
            seed_amplitude: seed.amplitude,
            metrics: &metrics,
        },
    )?;
    Ok(ReducedSummary {
        seed_mode: seed.mode,
        seed_amplitude: seed.amplitude,
        final_time: traj.last().t,
        predicted_blowup_time: predicted,
        blowup_detected: traj.blowup.as_ref().map(|b| b.estimate),
        contradiction: metrics.contradiction,
    })
}

fn evolve_stage(cfg: &RunConfig, profile: &Profile, modes: &[GapMode], out: &mut Artifacts) -> Result<EvolveSummary, CliError> {
    let grid = profile.grid.as_ref();
    let nl = &cfg.nonlinearity;
    let stage = &cfg.evolve;
    let seed = seed_perturbation(profile, modes, stage.delta, SeedScale::RelativeToProfile);
    let u0: Vec<C> = profile.values.iter().zip(&seed.field).map(|(p, r)| p + r).collect();
    let mut ecfg = stage.solver.clone();
    ecfg.sample_interval = stage.t_final / stage.samples as f64;
    let st = FieldState::new(grid, nl, u0, ecfg.flow).stage("evolve")?;
    let mut rows = Vec::new();
    let last = nls_evolve(grid, nl, &st, stage.t_final, &ecfg, |s| {
        let d = orbital_distance(&s.u, profile)?;
        rows.push([s.time, d.distance, s.mass, s.energy]);
        Ok(Observe::Continue)
    })
    .stage("evolve")?;

    let mut csv = format!("{}\nt,orbital_distance,mass,energy\n", schema_comment());
    for r in &rows {
        csv.push_str(&format!("{:.12e},{:.12e},{:.12e},{:.12e}\n", r[0], r[1], r[2], r[3]));
    }
    out.write("evolve_trajectory.csv", csv.as_bytes())?;
    if stage.snapshot_stride > 0 {
        let mut snap = format!("{}\nr,re_u,im_u\n", schema_comment());
        for (r, u) in grid.nodes().iter().zip(&last.u).step_by(stage.snapshot_stride) {
            snap.push_str(&format!("{r:.12e},{:.12e},{:.12e}\n", u.re, u.im));
        }
        out.write("evolve_snapshot.csv", snap.as_bytes())?;
    }
    let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(f64::MIN_POSITIVE);
    Ok(EvolveSummary {
        t_final: last.time,
        seed_relative_size: grid.cnorm(&seed.field) / profile.norm(),
        max_distance: rows.iter().map(|r| r[1]).fold(0.0, f64::max),
        mass_drift: rel(last.mass, st.mass),
        energy_drift: rows.iter().map(|r| rel(r[3], st.energy)).fold(0.0, f64::max),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verbs_run_in_order() {
        assert!(Verb::Profile < Verb::Spectrum && Verb::Reduce < Verb::Experiment);
        assert!(!Verb::Profile.needs_spectrum());
        assert!(Verb::Evolve.needs_spectrum() && !Verb::Evolve.needs_verdict());
        assert!(Verb::Experiment.needs_fgr() && !Verb::Evolve.needs_fgr());
    }

    #[test]
    fn diagnostic_file_names_are_plain() {
        assert_eq!(key_file("0,1|1"), "fgr_0-1_1.csv");
    }

    #[test]
    fn random_checks_are_reproducible() {
        let grid = Arc::new(RadialGrid::new(10.0, 50).unwrap());
        let h = LinearizedOperator::free(grid, 1.0).unwrap();
        let a = random_checks(&h, 7, 3);
        let b = random_checks(&h, 7, 3);
        assert_eq!(a, b);
        assert!(a.sigma3_symmetry_defect < 1e-13);
        assert!(a.sigma1_anticommutation_defect < 1e-13);
    }
}
