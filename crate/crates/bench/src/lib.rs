//! Shared fixtures for the benchmarks: the saturable one-node state at
//! `ω = 0.3` on a grid of the requested size.

use std::sync::Arc;

use nlsx_core::fgr::GapMode;
use nlsx_core::profile::solve_with_derivative;
use nlsx_core::spectral::{discrete_spectrum, SpectrumConfig};
use nlsx_core::{LinearizedOperator, Nonlinearity, Profile, ProfileConfig, RadialGrid};

pub const OMEGA: f64 = 0.3;

pub struct Fixture {
    pub nl: Nonlinearity,
    pub profile: Profile,
    pub h: LinearizedOperator,
    pub modes: Vec<GapMode>,
}

pub fn grid(n: usize) -> Arc<RadialGrid> {
    Arc::new(RadialGrid::new(30.0 / OMEGA.sqrt(), n).expect("valid grid"))
}

pub fn excited_state(n: usize) -> Fixture {
    let nl = Nonlinearity::saturable();
    let profile = solve_with_derivative(&nl, OMEGA, 1, grid(n), &ProfileConfig::default()).expect("profile");
    let h = LinearizedOperator::new(&nl, &profile).expect("operator");
    let spectrum = discrete_spectrum(&h, &SpectrumConfig::default()).expect("spectrum");
    let modes = GapMode::from_spectrum(&spectrum);
    Fixture { nl, profile, h, modes }
}
