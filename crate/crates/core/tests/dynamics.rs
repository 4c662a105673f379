use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};

use nlsx_core::dynamics::*;
use nlsx_core::fgr::*;
use nlsx_core::profile::*;
use nlsx_core::spectral::*;
use nlsx_core::*;
use num_complex::Complex64 as C;
use proptest::prelude::*;

fn c(re: f64) -> C {
    C::new(re, 0.0)
}

// ---------------------------------------------------------------- reduced model

#[test]
fn single_negative_mode_follows_the_closed_form_until_near_blowup() {
    let (gamma, z0) = (0.5, 0.1);
    let model = ReducedModel::single_mode(0.2, -1.0, gamma).unwrap();
    let t_star = blowup_time(gamma, z0);
    let tr = integrate_reduced(&model, &[c(z0)], 0.9 * t_star, &ReducedConfig::default()).unwrap();
    assert!(tr.blowup.is_none());
    assert!((tr.last().t - 0.9 * t_star).abs() < 1e-9 * t_star);
    for s in &tr.samples {
        let exact = single_mode_closed_form(z0 * z0, -1.0, gamma, s.t);
        let rel = (s.zeta[0].norm_sqr() - exact).abs() / exact;
        assert!(rel < 1e-8, "t = {} rel = {rel:.3e}", s.t);
    }
}

#[test]
fn single_positive_mode_decays_monotonically() {
    let (gamma, z0) = (0.3, 0.2);
    let model = ReducedModel::single_mode(0.2, 1.0, gamma).unwrap();
    let tr = integrate_reduced(&model, &[c(z0)], 1e4, &ReducedConfig::default()).unwrap();
    let rho = tr.modulus_sq(0);
    assert!(rho.windows(2).all(|w| w[1] <= w[0]));
    for (s, r) in tr.samples.iter().zip(&rho) {
        let exact = single_mode_closed_form(z0 * z0, 1.0, gamma, s.t);
        assert!((r - exact).abs() / exact < 1e-8);
    }
}

#[test]
fn blowup_is_reported_with_a_time_estimate() {
    let (gamma, z0) = (0.25, 0.05);
    let model = ReducedModel::single_mode(0.2, -1.0, gamma).unwrap();
    let t_star = blowup_time(gamma, z0);
    let tr = integrate_reduced(&model, &[c(z0)], 3.0 * t_star, &ReducedConfig::default()).unwrap();
    let b = tr.blowup.as_ref().expect("ceiling must be crossed");
    assert_eq!(b.mode, 0);
    assert!(b.time < t_star && b.time > 0.99 * t_star);
    assert!((b.estimate - t_star).abs() < 1e-6 * t_star);
}

#[test]
fn pure_phase_dynamics_keep_moduli_fixed() {
    let model = ReducedModel {
        lambda: vec![0.2, 0.27],
        signatures: vec![1.0, -1.0],
        terms: vec![
            DampingTerm { m: vec![1, 0], j: 0, gamma: 0.0 },
            DampingTerm { m: vec![0, 1], j: 1, gamma: 0.0 },
        ],
        a: vec![vec![0.7, -1.3], vec![2.1, 0.4]],
    };
    let z0 = [C::new(0.3, 0.1), C::new(-0.2, 0.25)];
    let tr = integrate_reduced(&model, &z0, 500.0, &ReducedConfig::default()).unwrap();
    let rho0: Vec<f64> = z0.iter().map(|z| z.norm_sqr()).collect();
    for s in &tr.samples {
        for j in 0..2 {
            assert!((s.zeta[j].norm_sqr() - rho0[j]).abs() < 1e-14);
            let shift: f64 = (0..2).map(|l| model.a[j][l] * rho0[l]).sum();
            let exact = z0[j] * C::from_polar(1.0, -(model.lambda[j] + shift) * s.t);
            assert!((s.zeta[j] - exact).norm() < 1e-8);
        }
    }
}

#[test]
fn two_mode_signatures_split_growth_and_decay() {
    let model = ReducedModel {
        lambda: vec![0.22, 0.23],
        signatures: vec![-1.0, 1.0],
        terms: vec![
            DampingTerm { m: vec![1, 0], j: 0, gamma: 0.4 },
            DampingTerm { m: vec![0, 1], j: 0, gamma: 0.2 },
            DampingTerm { m: vec![1, 0], j: 1, gamma: 0.2 },
            DampingTerm { m: vec![0, 1], j: 1, gamma: 0.3 },
        ],
        a: vec![vec![0.0; 2]; 2],
    };
    let tr = integrate_reduced(&model, &[c(0.1), c(0.15)], 50.0, &ReducedConfig::default()).unwrap();
    let r1 = tr.modulus_sq(0);
    let r2 = tr.modulus_sq(1);
    assert!(r1.windows(2).all(|w| w[1] > w[0]));
    assert!(r2.windows(2).all(|w| w[1] < w[0]));
    assert_eq!(tr.monotonicity_violation, 0.0);
}

fn random_model() -> impl Strategy<Value = (ReducedModel, Vec<C>)> {
    (1usize..=3)
        .prop_flat_map(|j| {
            (
                prop::collection::vec(0.05f64..0.3, j),
                prop::collection::vec(prop::bool::ANY, j),
                prop::collection::vec(0.0f64..2.0, j * j),
                prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), j),
                prop::collection::vec(-1.0f64..1.0, j * j),
            )
        })
        .prop_map(|(lambda, sig, gammas, z, a)| {
            let j = lambda.len();
            let mut terms = Vec::new();
            for k in 0..j {
                for l in 0..j {
                    let mut m = vec![0; j];
                    m[l] = 1;
                    terms.push(DampingTerm { m, j: k, gamma: gammas[k * j + l] });
                }
            }
            let model = ReducedModel {
                lambda,
                signatures: sig.iter().map(|&s| if s { 1.0 } else { -1.0 }).collect(),
                terms,
                a: a.chunks(j).map(|r| r.to_vec()).collect(),
            };
            let zeta0 = z.iter().map(|&(re, im)| C::new(0.1 * re, 0.1 * im)).collect();
            (model, zeta0)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn signed_moduli_never_increase((model, zeta0) in random_model()) {
        let tr = integrate_reduced(&model, &zeta0, 200.0, &ReducedConfig::default()).unwrap();
        prop_assert!(tr.monotonicity_violation <= 1e-12);
        for j in 0..model.modes() {
            let s = tr.signed(j);
            for w in s.windows(2) {
                prop_assert!(w[1] <= w[0] + 1e-12 * w[0].abs());
            }
        }
    }
}

#[test]
fn metrics_ledger_holds_for_a_negative_seed() {
    let model = ReducedModel::single_mode(0.2, -1.0, 0.5).unwrap();
    let tr = integrate_reduced(&model, &[c(0.1)], 2.0 * blowup_time(0.5, 0.1), &ReducedConfig::default()).unwrap();
    let m = reduced_instability_metrics(&model, &tr);
    assert_eq!(m.ledger.len(), 1);
    assert!(m.ledger[0].holds && m.ledger[0].nondecreasing);
    assert!(m.contradiction);
}

#[test]
fn metrics_saturate_for_positive_modes() {
    let (gamma, z0) = (0.5, 0.2);
    let rho0 = z0 * z0;
    let model = ReducedModel::single_mode(0.2, 1.0, gamma).unwrap();
    let t_end = 1e7;
    let tr = integrate_reduced(&model, &[c(z0)], t_end, &ReducedConfig::default()).unwrap();
    let m = reduced_instability_metrics(&model, &tr);
    // ∫₀ᵀ ρ₀²/(1 + 2Γρ₀t)² dt = ρ₀/(2Γ)·(1 − 1/(1 + 2Γρ₀T)).
    let exact = rho0 / (2.0 * gamma) * (1.0 - 1.0 / (1.0 + 2.0 * gamma * rho0 * t_end));
    assert!((m.quartic_integrals[0] - exact).abs() / exact < 1e-8);
    assert!(m.growth_ratio[0] < 1.001);
    assert!(m.ledger.is_empty() && !m.contradiction);
    assert_eq!(m.resonant_integrals["2"], m.quartic_integrals[0]);
}

#[test]
fn zero_data_gives_zero_metrics() {
    let model = ReducedModel::single_mode(0.2, -1.0, 0.5).unwrap();
    let tr = integrate_reduced(&model, &[c(0.0)], 100.0, &ReducedConfig::default()).unwrap();
    let m = reduced_instability_metrics(&model, &tr);
    assert_eq!(m.quartic_integrals, vec![0.0]);
    assert!(m.resonant_integrals.values().all(|&v| v == 0.0));
    assert!(!m.contradiction);
    assert!(tr.blowup.is_none());
}

#[test]
fn reduced_trajectory_csv_has_one_row_per_step() {
    let model = ReducedModel::single_mode(0.2, 1.0, 0.5).unwrap();
    let tr = integrate_reduced(&model, &[c(0.1)], 10.0, &ReducedConfig::default()).unwrap();
    let mut buf = Vec::new();
    tr.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "t,re_zeta_0,im_zeta_0,abs2_zeta_0");
    assert_eq!(lines.count(), tr.samples.len());
}

#[test]
fn reduced_input_errors() {
    let model = ReducedModel::single_mode(0.2, 1.0, 0.5).unwrap();
    assert!(integrate_reduced(&model, &[c(0.1), c(0.1)], 1.0, &ReducedConfig::default()).is_err());
    assert!(integrate_reduced(&model, &[c(0.1)], -1.0, &ReducedConfig::default()).is_err());
    let entry = FgrEntry {
        m: vec![1],
        j: 0,
        energy: 0.4,
        gamma: -1.0,
        scale: 1.0,
        nonnegative: false,
        spread: 0.0,
        samples: vec![],
    };
    let fgr = FgrMatrix {
        omega: 0.3,
        lambda: vec![0.2],
        epsilon_sequence: vec![],
        entries: [(entry.key(), entry)].into_iter().collect(),
    };
    let mode = GapMode {
        lambda: 0.2,
        xi: Spinor::zeros(3),
        signature: 1.0,
    };
    assert!(matches!(
        ReducedModel::from_fgr(&[mode], &fgr, None),
        Err(Error::InvalidInput(_))
    ));
}

// ---------------------------------------------------------------- PDE

struct Wave {
    nl: Nonlinearity,
    profile: Profile,
    modes: Vec<GapMode>,
}

/// Saturable one-node state at `ω = 0.3` on a coarse grid, for time stepping.
fn coarse_wave() -> &'static Wave {
    static W: OnceLock<Wave> = OnceLock::new();
    W.get_or_init(|| {
        let nl = Nonlinearity::saturable();
        let omega: f64 = 0.3;
        let g = Arc::new(RadialGrid::new(30.0 / omega.sqrt(), 399).unwrap());
        let profile = solve_with_derivative(&nl, omega, 1, g, &ProfileConfig::default()).unwrap();
        let h = LinearizedOperator::new(&nl, &profile).unwrap();
        let s = discrete_spectrum(&h, &SpectrumConfig::default()).unwrap();
        let modes = GapMode::from_spectrum(&s);
        Wave { nl, profile, modes }
    })
}

fn fine_step(wave: &Wave, cfg: &EvolveConfig) -> f64 {
    let u: Vec<C> = wave.profile.values.iter().map(|&v| c(v)).collect();
    0.95 * step_ceiling(&wave.profile.grid, &wave.nl, &u, cfg)
}

#[test]
fn standing_wave_stays_on_its_orbit() {
    let w = coarse_wave();
    let g = w.profile.grid.clone();
    let omega = w.profile.omega;
    let mut cfg = EvolveConfig::default();
    cfg.dt = fine_step(w, &cfg);
    cfg.sample_interval = 5.0;
    let u0 = FieldState::from_real(&g, &w.nl, &w.profile.values, cfg.flow).unwrap();
    let mut worst = 0.0f64;
    let mut mass = 0.0f64;
    let last = nls_evolve(&g, &w.nl, &u0, 50.0 / omega, &cfg, |st| {
        let d = orbital_distance(&st.u, &w.profile).unwrap();
        worst = worst.max(d.distance);
        mass = mass.max((st.mass - u0.mass).abs() / u0.mass);
        Ok(Observe::Continue)
    })
    .unwrap();
    assert!(worst <= 1e-6, "orbital distance {worst:.3e}");
    assert!(mass <= 1e-8, "mass drift {mass:.3e}");
    // The phase advances at the rate ω.
    let d = orbital_distance(&last.u, &w.profile).unwrap();
    let expected = (omega * last.time).rem_euclid(2.0 * PI);
    assert!((d.gamma - expected).abs() < 1e-5);
}

#[test]
fn free_gaussian_spreads_as_the_closed_form() {
    let g = RadialGrid::new(40.0, 2047).unwrap();
    let nl = Nonlinearity::zero();
    let cfg = EvolveConfig {
        dt: 0.25,
        flow: LinearFlow::Spectral,
        sample_interval: 0.5,
        ..EvolveConfig::default()
    };
    let u0: Vec<f64> = g.nodes().iter().map(|r| (-0.5 * r * r).exp()).collect();
    let st = FieldState::from_real(&g, &nl, &u0, cfg.flow).unwrap();
    let traj = nls_trajectory(&g, &nl, &st, 2.0, &cfg).unwrap();
    assert_eq!(traj.len(), 5);
    for s in &traj {
        // u = s⁻³ᐟ² exp(−r²/2s) with s = 1 + 2it.
        let sig = C::new(1.0, 2.0 * s.time);
        let err = g
            .nodes()
            .iter()
            .zip(&s.u)
            .map(|(&r, v)| (sig.powf(-1.5) * (-r * r / (2.0 * sig)).exp() - v).norm())
            .fold(0.0, f64::max);
        assert!(err <= 1e-6, "t = {} error {err:.3e}", s.time);
    }
}

#[test]
fn perturbed_wave_conserves_mass_and_energy() {
    let w = coarse_wave();
    let g = w.profile.grid.clone();
    let mut cfg = EvolveConfig::default();
    cfg.dt = fine_step(w, &cfg);
    cfg.sample_interval = 10.0;
    let u0: Vec<C> = w
        .profile
        .values
        .iter()
        .zip(g.nodes())
        .map(|(&p, &r)| c(p) + C::new(0.05, 0.02) * (-0.1 * r * r).exp())
        .collect();
    let st = FieldState::new(&g, &w.nl, u0, cfg.flow).unwrap();
    let t_final = 100.0;
    let traj = nls_trajectory(&g, &w.nl, &st, t_final, &cfg).unwrap();
    let last = traj.last().unwrap();
    assert!((last.mass - st.mass).abs() / st.mass <= 1e-8);
    let drift = traj
        .iter()
        .map(|s| (s.energy - st.energy).abs() / st.energy.abs())
        .fold(0.0, f64::max);
    assert!(drift / t_final <= 1e-6, "energy drift {drift:.3e}");
}

#[test]
fn oversized_steps_are_refused() {
    let w = coarse_wave();
    let g = w.profile.grid.clone();
    let mut cfg = EvolveConfig::default();
    cfg.dt = 2.0 * fine_step(w, &cfg);
    let st = FieldState::from_real(&g, &w.nl, &w.profile.values, cfg.flow).unwrap();
    let err = nls_evolve(&g, &w.nl, &st, 1.0, &cfg, |_| Ok(Observe::Continue)).unwrap_err();
    assert!(matches!(err, Error::CflViolation { .. }));
    // Band limiting drops the resonant modes instead.
    cfg.band_limit = true;
    assert!(nls_evolve(&g, &w.nl, &st, 1.0, &cfg, |_| Ok(Observe::Continue)).is_ok());
}

#[test]
fn non_finite_fields_are_reported_with_the_time() {
    let g = RadialGrid::new(10.0, 63).unwrap();
    let nl = Nonlinearity::cubic();
    let mut u = vec![c(0.1); 63];
    u[5] = C::new(f64::NAN, 0.0);
    let st = FieldState::new(&g, &nl, u, LinearFlow::FiniteDifference).unwrap();
    let cfg = EvolveConfig {
        dt: 1e-3,
        sample_interval: 0.01,
        ..EvolveConfig::default()
    };
    let err = nls_evolve(&g, &nl, &st, 0.1, &cfg, |_| Ok(Observe::Continue)).unwrap_err();
    assert!(matches!(err, Error::NaNDetected(t) if (t - 0.01).abs() < 1e-12));
}

#[test]
fn absorber_removes_outgoing_mass() {
    let g = RadialGrid::new(30.0, 1023).unwrap();
    let nl = Nonlinearity::zero();
    // Outgoing spherical wave packet centred at r = 10.
    let u0: Vec<C> = g
        .nodes()
        .iter()
        .map(|&r| C::from_polar((-(r - 10.0).powi(2)).exp(), 2.0 * r))
        .collect();
    let st = FieldState::new(&g, &nl, u0, LinearFlow::Spectral).unwrap();
    let mut cfg = EvolveConfig {
        dt: 0.05,
        flow: LinearFlow::Spectral,
        sample_interval: 0.0,
        ..EvolveConfig::default()
    };
    let open = nls_evolve(&g, &nl, &st, 20.0, &cfg, |_| Ok(Observe::Continue)).unwrap();
    assert!((open.mass - st.mass).abs() / st.mass < 1e-10);
    cfg.absorber = Some(Absorber { start: 0.6, strength: 1.0 });
    let damped = nls_evolve(&g, &nl, &st, 20.0, &cfg, |_| Ok(Observe::Continue)).unwrap();
    assert!(damped.mass < 0.05 * st.mass);
}

// ---------------------------------------------------------------- modulation

fn phi_c(v: &[f64]) -> Vec<C> {
    v.iter().map(|&x| c(x)).collect()
}

/// Smooth even perturbation satisfying both orthogonality conditions.
fn admissible_perturbation(p: &Profile, a: f64, b: f64, width: f64) -> Vec<C> {
    let g = &p.grid;
    let dphi = p.d_omega().unwrap();
    let mut re: Vec<f64> = g.nodes().iter().map(|&r| a * (-(r / width).powi(2)).exp()).collect();
    let mut im: Vec<f64> = g.nodes().iter().map(|&r| b * r * r * (-(r / width).powi(2)).exp()).collect();
    let k = g.dot(&re, &p.values) / g.dot(&p.values, &p.values);
    re.iter_mut().zip(&p.values).for_each(|(x, y)| *x -= k * y);
    let k = g.dot(&im, dphi) / g.dot(dphi, dphi);
    im.iter_mut().zip(dphi).for_each(|(x, y)| *x -= k * y);
    re.iter().zip(&im).map(|(&x, &y)| C::new(x, y)).collect()
}

#[test]
fn exact_orbit_points_decompose_trivially() {
    let w = coarse_wave();
    let fam = OrbitFamily::new(&w.nl, &w.profile, &ProfileConfig::default()).unwrap();
    let u = synthesize(&w.profile.values, 1.1, &vec![c(0.0); w.profile.values.len()]);
    let d = modulation_decompose(&fam, &u, 0.3 * 1.001, &ModulationConfig::default()).unwrap();
    assert!((d.omega - 0.3).abs() < 1e-12);
    assert!((d.gamma - 1.1).abs() < 1e-12);
    assert!(w.profile.grid.cnorm(d.r()) < 1e-9);
}

#[test]
fn decomposition_recovers_parameters_and_perturbation() {
    let w = coarse_wave();
    let g = &w.profile.grid;
    let fam = OrbitFamily::new(&w.nl, &w.profile, &ProfileConfig::default()).unwrap();
    let r = admissible_perturbation(&w.profile, 0.05, 0.01, 4.0);
    let u = synthesize(&w.profile.values, 2.4, &r);
    let d = modulation_decompose(&fam, &u, 0.3, &ModulationConfig::default()).unwrap();
    assert!((d.omega - 0.3).abs() < 1e-8);
    assert!((d.gamma - 2.4).abs() < 1e-8);
    let diff: Vec<C> = d.r().iter().zip(&r).map(|(a, b)| a - b).collect();
    assert!(g.cnorm(&diff) <= 1e-9 * g.cnorm(&r).max(1.0));
    // The conjugate channel of R carries r̄.
    assert!(d.residual.down.iter().zip(d.r()).all(|(a, b)| (a - b.conj()).norm() == 0.0));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn synthesis_and_decomposition_invert_each_other(
        gamma in 0.0f64..6.28,
        a in -0.05f64..0.05,
        b in -0.01f64..0.01,
        width in 2.0f64..6.0,
        d_omega in -2e-3f64..2e-3,
    ) {
        let w = coarse_wave();
        let g = &w.profile.grid;
        let fam = OrbitFamily::new(&w.nl, &w.profile, &ProfileConfig::default()).unwrap();
        let omega = 0.3 + d_omega;
        let pt = fam.at(omega).unwrap();
        let shifted = Profile {
            omega,
            values: pt.phi.clone(),
            d_omega: Some(pt.d_phi.clone()),
            ..w.profile.clone()
        };
        let r = admissible_perturbation(&shifted, a, b, width);
        let u = synthesize(&pt.phi, gamma, &r);
        let d = modulation_decompose(&fam, &u, 0.3, &ModulationConfig::default()).unwrap();
        prop_assert!((d.omega - omega).abs() <= 1e-9 * omega);
        let dg = (d.gamma - gamma).rem_euclid(2.0 * PI);
        prop_assert!(dg.min(2.0 * PI - dg) <= 1e-9);
        let back = synthesize(&pt.phi, d.gamma, d.r());
        let err: Vec<C> = back.iter().zip(&u).map(|(x, y)| x - y).collect();
        prop_assert!(g.cnorm(&err) <= 1e-9 * g.cnorm(&u));
    }
}

#[test]
fn decomposition_failures() {
    let w = coarse_wave();
    let fam = OrbitFamily::new(&w.nl, &w.profile, &ProfileConfig::default()).unwrap();
    let n = w.profile.values.len();
    let far: Vec<C> = w.profile.values.iter().map(|&v| c(3.0 * v)).collect();
    assert!(matches!(
        modulation_decompose(&fam, &far, 0.3, &ModulationConfig::default()),
        Err(Error::DecompositionFailed(_))
    ));
    let strict = ModulationConfig {
        slope_tol: 1e6,
        ..ModulationConfig::default()
    };
    let u = phi_c(&w.profile.values);
    assert!(matches!(
        modulation_decompose(&fam, &u, 0.3, &strict),
        Err(Error::DegenerateJacobian(_))
    ));
    assert!(matches!(
        modulation_decompose(&fam, &vec![c(0.0); n + 1], 0.3, &ModulationConfig::default()),
        Err(Error::GridMismatch(_))
    ));
}

#[test]
fn frequency_drift_is_quadratic_in_the_perturbation() {
    let w = coarse_wave();
    let g = w.profile.grid.clone();
    let fam = OrbitFamily::new(&w.nl, &w.profile, &ProfileConfig::default()).unwrap();
    let mut cfg = EvolveConfig::default();
    cfg.dt = fine_step(w, &cfg);
    cfg.sample_interval = 1.0;
    let drift = |eps: f64| -> f64 {
        let r = mode_field(&w.modes[1], c(eps));
        let u: Vec<C> = w.profile.values.iter().zip(&r).map(|(p, v)| p + v).collect();
        let st = FieldState::new(&g, &w.nl, u, cfg.flow).unwrap();
        let mut omegas = Vec::new();
        nls_evolve(&g, &w.nl, &st, 20.0, &cfg, |s| {
            let d = modulation_decompose(&fam, &s.u, 0.3, &ModulationConfig::default())?;
            omegas.push(d.omega);
            Ok(Observe::Continue)
        })
        .unwrap();
        omegas.iter().map(|o| (o - 0.3).abs()).fold(0.0, f64::max)
    };
    let (d1, d2) = (drift(0.02), drift(0.04));
    let ratio = d2 / d1;
    assert!(ratio > 3.0 && ratio < 5.0, "drift ratio {ratio}");
}

#[test]
fn mode_projection_of_eigenvectors() {
    let w = coarse_wave();
    let g = &w.profile.grid;
    let modes = &w.modes;
    assert_eq!(modes.len(), 2);
    let p = mode_project(&modes[0].xi, modes, g);
    assert!((p.z[0] - 1.0).norm() < 1e-10 && p.z[1].norm() < 1e-10);
    assert!(p.w.iter().all(|w| w.norm() < 1e-10));
    assert!(p.f.norm(g) < 1e-10 * modes[0].xi.norm(g));
    let p = mode_project(&modes[1].xi.sigma1(), modes, g);
    assert!(p.z.iter().all(|z| z.norm() < 1e-10));
    assert!((p.w[1] - 1.0).norm() < 1e-10 && p.w[0].norm() < 1e-10);
}

#[test]
fn mode_projection_reconstructs_physical_residuals() {
    let w = coarse_wave();
    let g = &w.profile.grid;
    let r: Vec<C> = admissible_perturbation(&w.profile, 0.3, -0.02, 3.0)
        .iter()
        .zip(&mode_field(&w.modes[0], C::new(0.2, -0.1)))
        .map(|(a, b)| a + b)
        .collect();
    let big = Spinor {
        up: r.clone(),
        down: r.iter().map(|v| v.conj()).collect(),
    };
    let p = mode_project(&big, &w.modes, g);
    let back = p.reconstruct(&w.modes);
    assert!(back.sub(&big).norm(g) <= 1e-10 * big.norm(g));
    assert!(p.orthogonality < 1e-10);
    for (z, wj) in p.z.iter().zip(&p.w) {
        assert!((z.conj() - wj).norm() < 1e-10);
    }
}

#[test]
fn orbital_distance_examples() {
    let w = coarse_wave();
    let g = &w.profile.grid;
    let phi = phi_c(&w.profile.values);
    let rotated: Vec<C> = phi.iter().map(|v| v * C::from_polar(1.0, 1.3)).collect();
    let d = orbital_distance(&rotated, &w.profile).unwrap();
    assert!(d.distance < 1e-10 && (d.gamma - 1.3).abs() < 1e-12);

    let doubled: Vec<C> = phi.iter().map(|v| v * 2.0).collect();
    let d = orbital_distance(&doubled, &w.profile).unwrap();
    assert!((d.distance - g.h1_norm(&phi)).abs() < 1e-10 * g.h1_norm(&phi));

    // ψ orthogonal in H¹ to φ and iφ: the distance is ε‖ψ‖.
    let mut psi: Vec<C> = g.nodes().iter().map(|&r| c((-(r / 3.0).powi(2)).exp())).collect();
    let k = g.h1_dot(&psi, &phi) / g.h1_dot(&phi, &phi);
    psi.iter_mut().zip(&phi).for_each(|(x, y)| *x -= k * y);
    let eps = 1e-3;
    let u: Vec<C> = phi.iter().zip(&psi).map(|(a, b)| a + b * eps).collect();
    let d = orbital_distance(&u, &w.profile).unwrap();
    let expected = eps * g.h1_norm(&psi);
    assert!((d.distance - expected).abs() < 1e-10 * expected.max(1.0));
}

// ---------------------------------------------------------------- experiment

fn reduced_for(w: &Wave) -> ReducedModel {
    let omega = w.profile.omega;
    let h = LinearizedOperator::new(&w.nl, &w.profile).unwrap();
    let lambda: Vec<f64> = w.modes.iter().map(|m| m.lambda).collect();
    let res = resonance_set(&lambda, omega, 6).unwrap();
    let coeffs = taylor_coefficients_for(&w.nl, &w.profile, &w.modes, &res).unwrap();
    let xis: Vec<Spinor> = w.modes.iter().map(|m| m.xi.clone()).collect();
    let pc = ContinuumProjector::new(&h, &xis).unwrap();
    let fgr = fgr_matrix(&h, &coeffs, &pc, &res, &FgrConfig::default()).unwrap();
    ReducedModel::from_fgr(&w.modes, &fgr, None).unwrap()
}

#[test]
fn zero_seed_stays_on_the_orbit() {
    let w = coarse_wave();
    let pcfg = ProfileConfig::default();
    let mut cfg = ExperimentConfig {
        delta: 0.0,
        horizon: Some(20.0),
        samples: 10,
        stop_at_exit: false,
        ..ExperimentConfig::default()
    };
    cfg.evolve = EvolveConfig::default();
    cfg.evolve.dt = fine_step(w, &cfg.evolve);
    let inp = ExperimentInputs {
        nl: &w.nl,
        profile: &w.profile,
        profile_cfg: &pcfg,
        modes: &w.modes,
        model: None,
    };
    let rep = instability_experiment(&inp, &cfg).unwrap();
    assert_eq!(rep.samples.len(), 11);
    assert!(rep.max_distance <= 1e-6, "distance {:.3e}", rep.max_distance);
    assert_eq!(rep.decomposition_failures, 0);
}

#[test]
fn short_flagship_experiment_report() {
    let w = coarse_wave();
    let model = reduced_for(w);
    let pcfg = ProfileConfig::default();
    let mut cfg = ExperimentConfig {
        delta: 1e-2,
        scale: SeedScale::RelativeToProfile,
        time_budget: Some(100.0),
        samples: 20,
        ..ExperimentConfig::default()
    };
    cfg.evolve.band_limit = true;
    cfg.evolve.splitting = Splitting::Strang;
    let inp = ExperimentInputs {
        nl: &w.nl,
        profile: &w.profile,
        profile_cfg: &pcfg,
        modes: &w.modes,
        model: Some(&model),
    };
    let rep = instability_experiment(&inp, &cfg).unwrap();
    assert_eq!(rep.seed_mode, Some(1));
    assert_eq!(rep.seed_signature, Some(-1.0));
    assert!((rep.seed_relative_size - 1e-2).abs() < 1e-12);
    let t_star = blowup_time(model.diagonal_gamma(1), rep.seed_amplitude);
    assert!((rep.reduced_blowup_time.unwrap() - t_star).abs() < 1e-9 * t_star);
    assert!(rep.horizon_truncated && rep.tube_exit_time.is_none());
    assert_eq!(rep.samples.len(), 21);
    let z0 = rep.samples[0].z[1];
    assert!((z0.norm() - rep.seed_amplitude).abs() < 1e-3 * rep.seed_amplitude);
    let red = rep.reduced.as_ref().unwrap();
    assert!(red.ledger[0].holds && red.ledger[0].nondecreasing);

    let mut csv = Vec::new();
    rep.write_trajectory_csv(&mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    assert!(text.starts_with("t,orbital_distance,mass,energy,omega,gamma,re_z_0,im_z_0,re_z_1,im_z_1,reduced_abs2"));
    assert_eq!(text.lines().count(), 22);
    let json = serde_json::to_string(&rep).unwrap();
    let back: InstabilityReport = serde_json::from_str(&json).unwrap();
    assert_eq!(back, rep);
}

#[test]
fn experiment_needs_a_horizon_without_a_reduced_model() {
    let w = coarse_wave();
    let pcfg = ProfileConfig::default();
    let inp = ExperimentInputs {
        nl: &w.nl,
        profile: &w.profile,
        profile_cfg: &pcfg,
        modes: &w.modes,
        model: None,
    };
    assert!(matches!(
        instability_experiment(&inp, &ExperimentConfig::default()),
        Err(Error::InvalidInput(_))
    ));
}
