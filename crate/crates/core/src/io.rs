//! Plain-text artifacts: profile tables with a JSON sidecar, spectrum tables
//! and JSON documents stamped with a schema version.

use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridSpec, RadialGrid};
use crate::nonlinearity::Nonlinearity;
use crate::profile::{mass_slope_value, Profile};
use crate::spectral::Spectrum;

pub const SCHEMA_VERSION: u32 = 1;

/// Comment line opening every CSV file written by the pipeline.
pub fn schema_comment() -> String {
    format!("# schema_version={SCHEMA_VERSION}")
}

/// Scalar data accompanying a profile table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileSidecar {
    pub schema_version: u32,
    pub nonlinearity: Nonlinearity,
    pub grid: GridSpec,
    pub omega: f64,
    pub node_count: usize,
    pub phi0: f64,
    pub mass: f64,
    pub mass_slope: Option<f64>,
    pub residual_norm: f64,
}

impl ProfileSidecar {
    pub fn new(nl: &Nonlinearity, profile: &Profile) -> Self {
        ProfileSidecar {
            schema_version: SCHEMA_VERSION,
            nonlinearity: nl.clone(),
            grid: profile.grid.spec(),
            omega: profile.omega,
            node_count: profile.node_count,
            phi0: profile.phi0,
            mass: profile.mass,
            mass_slope: mass_slope_value(profile).ok(),
            residual_norm: profile.residual_norm(nl),
        }
    }
}

/// Columns `r, phi, dphi_domega`; the last is empty when `∂_ωφ` is absent.
pub fn write_profile_csv<W: Write>(profile: &Profile, mut out: W) -> Result<()> {
    writeln!(out, "{}", schema_comment())?;
    writeln!(out, "r,phi,dphi_domega")?;
    let d = profile.d_omega.as_deref();
    for (i, (&r, &v)) in profile.grid.nodes().iter().zip(&profile.values).enumerate() {
        match d {
            Some(d) => writeln!(out, "{r:.17e},{v:.17e},{:.17e}", d[i])?,
            None => writeln!(out, "{r:.17e},{v:.17e},")?,
        }
    }
    Ok(())
}

/// Rebuilds a profile from its table and sidecar.
pub fn read_profile(csv: &str, sidecar: &ProfileSidecar) -> Result<Profile> {
    if sidecar.schema_version != SCHEMA_VERSION {
        return Err(Error::InvalidInput(format!("unsupported schema version {}", sidecar.schema_version)));
    }
    let grid = Arc::new(RadialGrid::new(sidecar.grid.r_max, sidecar.grid.n_points)?);
    let mut rows = csv.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty());
    match rows.next() {
        Some("r,phi,dphi_domega") => {}
        other => return Err(Error::InvalidInput(format!("unexpected profile header {other:?}"))),
    }
    let bad = |line: &str| Error::InvalidInput(format!("malformed profile row {line:?}"));
    let mut values = Vec::with_capacity(grid.len());
    let mut d_omega = Vec::with_capacity(grid.len());
    let mut missing = false;
    for line in rows {
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 3 {
            return Err(bad(line));
        }
        values.push(cols[1].parse::<f64>().map_err(|_| bad(line))?);
        if cols[2].is_empty() {
            missing = true;
        } else {
            d_omega.push(cols[2].parse::<f64>().map_err(|_| bad(line))?);
        }
    }
    if values.len() != grid.len() {
        return Err(Error::GridMismatch(format!("{} rows for a {}-point grid", values.len(), grid.len())));
    }
    Ok(Profile {
        omega: sidecar.omega,
        values,
        node_count: sidecar.node_count,
        phi0: sidecar.phi0,
        d_omega: if missing { None } else { Some(d_omega) },
        mass: sidecar.mass,
        grid,
    })
}

/// Classified modes: `re_lambda, im_lambda, classification, signature,
/// sigma3_norm, residual`.
pub fn write_spectrum_csv<W: Write>(spectrum: &Spectrum, mut out: W) -> Result<()> {
    writeln!(out, "{}", schema_comment())?;
    writeln!(out, "re_lambda,im_lambda,classification,signature,sigma3_norm,residual")?;
    for m in &spectrum.modes {
        let class = serde_json::to_value(m.classification)?;
        writeln!(
            out,
            "{:.15e},{:.15e},{},{},{:.6e},{:.3e}",
            m.lambda.re,
            m.lambda.im,
            class.as_str().unwrap_or_default(),
            m.signature.as_int(),
            m.sigma3_norm,
            m.residual
        )?;
    }
    Ok(())
}

/// Every eigenvalue of the discretized operator: `re_lambda, im_lambda`.
pub fn write_eigenvalues_csv<W: Write>(spectrum: &Spectrum, mut out: W) -> Result<()> {
    writeln!(out, "{}", schema_comment())?;
    writeln!(out, "re_lambda,im_lambda")?;
    for z in &spectrum.eigenvalues {
        writeln!(out, "{:.15e},{:.15e}", z.re, z.im)?;
    }
    Ok(())
}

/// Pretty JSON with a top-level `schema_version` added when missing.
pub fn versioned_json<T: Serialize>(value: &T) -> Result<String> {
    let mut v = serde_json::to_value(value)?;
    if let serde_json::Value::Object(map) = &mut v {
        map.entry("schema_version").or_insert(SCHEMA_VERSION.into());
    }
    Ok(serde_json::to_string_pretty(&v)?)
}
