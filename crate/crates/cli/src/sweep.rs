//! Verdict stage over a range of frequencies, run in parallel and written
//! as one table.

use nlsx_core::fgr::resonance_set;
use nlsx_core::io::{schema_comment, SCHEMA_VERSION};
use nlsx_core::spectral::Verdict;
use nlsx_core::Error;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::pipeline::{fgr_diagonal, fgr_stage, solve_linear, Artifacts};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub omega: f64,
    /// `ok`, or the kebab-case failure kind.
    pub status: String,
    pub message: Option<String>,
    pub mass: Option<f64>,
    pub mass_slope: Option<f64>,
    pub lambda: Vec<f64>,
    pub signature: Vec<i8>,
    pub gamma_diagonal: Vec<f64>,
    pub verdict: Option<Verdict>,
    /// The mass slope changed sign since the previous successful row.
    pub slope_sign_change: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub schema_version: u32,
    pub seed: u64,
    pub rows: usize,
    pub failures: usize,
    pub slope_sign_changes: Vec<f64>,
    pub artifacts: Vec<String>,
}

/// Short stable name of a core error, used as the row status.
pub fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::InvalidInput(_) => "invalid-input",
        Error::NoSolution(_) => "no-solution",
        Error::NoConvergence(_) => "no-convergence",
        Error::SingularLinearization(_) => "singular-linearization",
        Error::DegenerateSlope(_) => "degenerate-slope",
        Error::EigensolveFailure(_) => "eigensolve-failure",
        Error::SymmetryViolation { .. } => "symmetry-violation",
        Error::Degenerate(_) => "degenerate",
        Error::IllConditioned(_) => "ill-conditioned",
        Error::TrackingLost(_) => "tracking-lost",
        Error::InsufficientSmoothness { .. } => "insufficient-smoothness",
        Error::ResonantConfiguration { .. } => "resonant-configuration",
        Error::NoExtrapolationPlateau(_) => "no-extrapolation-plateau",
        Error::WrongSide { .. } => "wrong-side",
        Error::DomainError(_) => "domain-error",
        Error::CflViolation { .. } => "cfl-violation",
        Error::NaNDetected(_) => "nan-detected",
        Error::DecompositionFailed(_) => "decomposition-failed",
        Error::DegenerateJacobian(_) => "degenerate-jacobian",
        Error::GridMismatch(_) => "grid-mismatch",
        Error::Io(_) => "io",
    }
}

fn failed(omega: f64, e: &CliError) -> SweepRow {
    let status = match e {
        CliError::Numerical { source, .. } => error_kind(source).to_string(),
        _ => "error".to_string(),
    };
    SweepRow {
        omega,
        status,
        message: Some(e.to_string()),
        mass: None,
        mass_slope: None,
        lambda: Vec::new(),
        signature: Vec::new(),
        gamma_diagonal: Vec::new(),
        verdict: None,
        slope_sign_change: false,
    }
}

pub fn sweep_row(cfg: &RunConfig, omega: f64, grid_scale: f64, with_fgr: bool) -> SweepRow {
    let grid = cfg.grid.spec(omega, grid_scale);
    let solved = match solve_linear(cfg, omega, &grid, true) {
        Ok(s) => s,
        Err(e) => return failed(omega, &e),
    };
    let report = solved.report.as_ref().expect("verdict requested");
    let mut row = SweepRow {
        omega,
        status: "ok".into(),
        message: None,
        mass: Some(solved.profile.mass),
        mass_slope: report.mass_slope,
        lambda: report.signatures.iter().map(|s| s.lambda).collect(),
        signature: report.signatures.iter().map(|s| s.signature.as_int()).collect(),
        gamma_diagonal: Vec::new(),
        verdict: Some(report.verdict),
        slope_sign_change: false,
    };
    if solved.modes.is_empty() {
        return row;
    }
    let lambda: Vec<f64> = solved.modes.iter().map(|m| m.lambda).collect();
    if let Err(e) = resonance_set(&lambda, omega, cfg.fgr.resonance_cap) {
        row.status = error_kind(&e).into();
        row.message = Some(e.to_string());
        return row;
    }
    if with_fgr {
        let h = solved.h.as_ref().expect("operator built");
        match fgr_stage(cfg, h, &solved.profile, &solved.modes) {
            Ok(f) => row.gamma_diagonal = fgr_diagonal(&f).into_iter().map(|d| d.0).collect(),
            Err(e) => {
                let failed = failed(omega, &e);
                row.status = failed.status;
                row.message = failed.message;
            }
        }
    }
    row
}

/// Marks rows whose mass slope differs in sign from the last successful row.
pub fn flag_sign_changes(rows: &mut [SweepRow]) {
    let mut prev: Option<f64> = None;
    for row in rows.iter_mut() {
        if let Some(s) = row.mass_slope {
            if let Some(p) = prev {
                row.slope_sign_change = p.signum() != s.signum();
            }
            prev = Some(s);
        }
    }
}

pub fn write_sweep_csv(rows: &[SweepRow]) -> String {
    let j = rows.iter().map(|r| r.lambda.len()).max().unwrap_or(0);
    let mut header = vec!["omega".to_string(), "status".into(), "mass".into(), "mass_slope".into()];
    header.extend((0..j).map(|k| format!("lambda_{k}")));
    header.extend((0..j).map(|k| format!("s_{k}")));
    header.extend((0..j).map(|k| format!("Gamma_{k}{k}")));
    header.push("verdict".into());
    header.push("slope_sign_change".into());
    let mut out = format!("{}\n{}\n", schema_comment(), header.join(","));
    let num = |v: Option<f64>| v.map(|x| format!("{x:.12e}")).unwrap_or_default();
    for r in rows {
        let mut cols = vec![format!("{:.12e}", r.omega), r.status.clone(), num(r.mass), num(r.mass_slope)];
        cols.extend((0..j).map(|k| num(r.lambda.get(k).copied())));
        cols.extend((0..j).map(|k| r.signature.get(k).map(|s| s.to_string()).unwrap_or_default()));
        cols.extend((0..j).map(|k| num(r.gamma_diagonal.get(k).copied())));
        let verdict = r
            .verdict
            .map(|v| serde_json::to_value(v).ok().and_then(|x| x.as_str().map(String::from)).unwrap_or_default())
            .unwrap_or_default();
        cols.push(verdict);
        cols.push(r.slope_sign_change.to_string());
        out.push_str(&cols.join(","));
        out.push('\n');
    }
    out
}

pub fn run_sweep(cfg: &RunConfig, grid_scale: f64) -> Result<SweepSummary, CliError> {
    cfg.validate()?;
    let range = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| CliError::Config("the sweep verb needs a [sweep] section".into()))?;
    if !(grid_scale > 0.0) || !grid_scale.is_finite() {
        return Err(CliError::Config(format!("grid scale must be positive, got {grid_scale}")));
    }
    let mut out = Artifacts::create(&cfg.output_dir)?;
    let mut rows: Vec<SweepRow> = range
        .omegas()
        .par_iter()
        .map(|&w| sweep_row(cfg, w, grid_scale, range.fgr))
        .collect();
    flag_sign_changes(&mut rows);
    out.write("sweep.csv", write_sweep_csv(&rows).as_bytes())?;
    out.files.push("summary.json".into());
    let summary = SweepSummary {
        schema_version: SCHEMA_VERSION,
        seed: cfg.seed,
        rows: rows.len(),
        failures: rows.iter().filter(|r| r.status != "ok").count(),
        slope_sign_changes: rows.iter().filter(|r| r.slope_sign_change).map(|r| r.omega).collect(),
        artifacts: out.files.clone(),
    };
    out.write_json("summary.json", &summary)?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(omega: f64, slope: Option<f64>) -> SweepRow {
        SweepRow {
            omega,
            status: "ok".into(),
            message: None,
            mass: Some(1.0),
            mass_slope: slope,
            lambda: Vec::new(),
            signature: Vec::new(),
            gamma_diagonal: Vec::new(),
            verdict: None,
            slope_sign_change: false,
        }
    }

    #[test]
    fn sign_changes_skip_failed_rows() {
        let mut rows = vec![row(0.1, Some(-1.0)), row(0.2, None), row(0.3, Some(2.0)), row(0.4, Some(3.0))];
        flag_sign_changes(&mut rows);
        let flags: Vec<bool> = rows.iter().map(|r| r.slope_sign_change).collect();
        assert_eq!(flags, [false, false, true, false]);
    }

    #[test]
    fn table_pads_mode_columns() {
        let mut a = row(0.3, Some(1.0));
        a.lambda = vec![0.2, 0.25];
        a.signature = vec![1, -1];
        a.verdict = Some(Verdict::FailsCondition2);
        let b = row(0.4, Some(1.0));
        let text = write_sweep_csv(&[a, b]);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(
            lines[1],
            "omega,status,mass,mass_slope,lambda_0,lambda_1,s_0,s_1,Gamma_00,Gamma_11,verdict,slope_sign_change"
        );
        assert!(lines[2].contains(",1,-1,,,fails-condition-2,false"), "{}", lines[2]);
        assert_eq!(lines[3].split(',').count(), 12);
    }
}
