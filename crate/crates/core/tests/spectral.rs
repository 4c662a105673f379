use std::sync::Arc;

use num_complex::Complex64 as C;
use proptest::prelude::*;

use nlsx_core::operators::{build_perturbation, BumpSpec};
use nlsx_core::profile::{mass_slope_value, solve_with_derivative};
use nlsx_core::spectral::*;
use nlsx_core::{Error, LinearizedOperator, Nonlinearity, Profile, ProfileConfig, RadialGrid};

fn state(nl: &Nonlinearity, omega: f64, k: usize, n: usize) -> (Profile, LinearizedOperator) {
    let g = Arc::new(RadialGrid::new(30.0 / omega.sqrt(), n).unwrap());
    let p = solve_with_derivative(nl, omega, k, g, &ProfileConfig::default()).unwrap();
    let h = LinearizedOperator::new(nl, &p).unwrap();
    (p, h)
}

fn report(p: &Profile, h: &LinearizedOperator) -> (Spectrum, StabilityReport) {
    let cfg = SpectrumConfig::default();
    let s = discrete_spectrum(h, &cfg).unwrap();
    let k = generalized_kernel(h, &cfg);
    let r = stability_verdict(h, &s, k.as_ref(), mass_slope_value(p).ok(), &cfg).unwrap();
    (s, r)
}

#[test]
fn spectrum_pairs_and_sigma1_anticommutes() {
    for (nl, omega, k) in [
        (Nonlinearity::cubic(), 1.0, 0),
        (Nonlinearity::saturable(), 0.3, 1),
        (Nonlinearity::PurePower { p: 2.5 }, 2.0, 0),
    ] {
        let (_, h) = state(&nl, omega, k, 500);
        assert_eq!(h.sigma1_anticommutator(), 0.0);
        let s = discrete_spectrum(&h, &SpectrumConfig::default()).unwrap();
        assert!(s.pairing_defect <= 1e-6, "{}", s.pairing_defect);
        for m in s.modes.iter().filter(|m| m.lambda.im.abs() > 1e-6) {
            for partner in [-m.lambda, m.lambda.conj(), -m.lambda.conj()] {
                assert!(s.eigenvalues.iter().any(|z| (z - partner).norm() <= 1e-6 * partner.norm().max(1.0)));
            }
        }
    }
}

#[test]
fn cubic_ground_state_is_exponentially_unstable() {
    let (p, h) = state(&Nonlinearity::cubic(), 1.0, 0, 600);
    let (s, r) = report(&p, &h);
    assert_eq!(r.negative_index, 1);
    assert_eq!(r.negative_index_split, [1, 0]);
    assert_eq!(r.verdict, Verdict::FailsCondition1);
    assert!(r.notes.iter().any(|n| n.contains("exponential")));
    // Purely imaginary pair of size about 5.5.
    assert!((r.worst_off_axis_imag - 5.5).abs() < 0.2, "{}", r.worst_off_axis_imag);
    for m in s.of_class(Classification::OffAxis).filter(|m| m.xi.is_some()) {
        assert!(m.sigma3_norm.abs() <= 1e-8, "{}", m.sigma3_norm);
        assert_eq!(m.signature, Signature::NotApplicable);
    }
    assert!(r.condition3_kernel);
}

#[test]
fn cubic_excited_state_has_real_unstable_modes() {
    let (p, h) = state(&Nonlinearity::cubic(), 1.0, 1, 800);
    let (_, r) = report(&p, &h);
    assert!(r.negative_index >= 2);
    assert_eq!(r.verdict, Verdict::FailsCondition1);
}

#[test]
fn saturable_ground_state_is_linearly_stable() {
    let (p, h) = state(&Nonlinearity::saturable(), 0.5, 0, 600);
    let (s, r) = report(&p, &h);
    assert_eq!(r.verdict, Verdict::LinearlyStable);
    assert!(r.inconsistency.is_none());
    assert!(r.signatures.iter().all(|s| s.signature == Signature::Positive));
    assert!(r.quadratic_form_min >= -1e-6);
    assert!(r.quadratic_form_min_with_modes >= -1e-6);
    for m in s.positive_gap_modes() {
        assert!((m.sigma3_norm - 1.0).abs() < 1e-12);
        assert!(m.residual <= 1e-8);
    }
}

#[test]
fn saturable_excited_state_fails_signature_condition() {
    let nl = Nonlinearity::saturable();
    let (p, h) = state(&nl, 0.3, 1, 400);
    let (s, r) = report(&p, &h);
    assert!(r.condition1_real_spectrum && r.condition3_kernel);
    assert_eq!(r.verdict, Verdict::FailsCondition2);
    assert!(r.negative_index >= 2);
    assert!(r.inconsistency.is_none());
    let neg: Vec<_> = s
        .positive_gap_modes()
        .into_iter()
        .filter(|m| m.signature == Signature::Negative)
        .collect();
    assert_eq!(neg.len(), 1);
    assert!((neg[0].sigma3_norm + 1.0).abs() < 1e-12);
    // Unconstrained form has negative directions; the σ₃-complement of the
    // gap modes removes them.
    assert!(quadratic_form_min(&h, &[]).unwrap() < 0.0);

    // Grid refinement keeps the verdict and moves λ at second order.
    let lam = |n: usize| {
        let (p, h) = state(&nl, 0.3, 1, n);
        let (s, r) = report(&p, &h);
        assert_eq!(r.verdict, Verdict::FailsCondition2);
        s.positive_gap_modes()
            .into_iter()
            .find(|m| m.signature == Signature::Negative)
            .unwrap()
            .lambda
            .re
    };
    let (l1, l2) = (neg[0].lambda.re, lam(800));
    let l4 = lam(1600);
    let ratio = (l1 - l2) / (l2 - l4);
    assert!((1.0..=16.0).contains(&ratio.abs()), "{l1} {l2} {l4} ratio {ratio}");
}

#[test]
fn negative_index_matches_dense_count() {
    let (_, h) = state(&Nonlinearity::saturable(), 0.3, 1, 300);
    let dense_count = |m: nlsx_core::linalg::DenseMatrix| {
        m.symmetric_eigenvalues().into_iter().filter(|&e| e < -1e-9).count()
    };
    let (np, nm) = negative_index(&h.lp, &h.lm, &SpectrumConfig::default());
    assert_eq!(np, dense_count(h.lp.dense()));
    assert_eq!(nm, dense_count(h.lm.dense()));
    assert_eq!((np, nm), (2, 1));
}

#[test]
fn kernel_is_spanned_by_symmetry_vectors() {
    let (_, h) = state(&Nonlinearity::saturable(), 0.5, 0, 600);
    let k = generalized_kernel(&h, &SpectrumConfig::default()).unwrap();
    assert_eq!(k.dims[0], 1);
    assert_eq!(k.dimension, 2);
    assert!(k.angle <= 1e-4);
    assert!(k.residual_sigma3_phi <= 1e-6);
    assert!(k.residual_d_omega_phi <= 1e-6);
}

#[test]
fn degenerate_mass_slope_is_flagged() {
    // Bisect on the ground-state mass slope of the saturable branch.
    let nl = Nonlinearity::saturable();
    let n = 1200;
    let slope = |w: f64| {
        let (p, _) = state(&nl, w, 0, n);
        mass_slope_value(&p).unwrap()
    };
    let (mut lo, mut hi) = (0.03, 0.1);
    assert!(slope(lo) < 0.0 && slope(hi) > 0.0);
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if slope(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (_, h) = state(&nl, 0.5 * (lo + hi), 0, n);
    match generalized_kernel(&h, &SpectrumConfig::default()) {
        Err(Error::IllConditioned(g)) => assert!(g < 1e-6),
        Ok(k) => assert!(k.dimension > 2, "{k:?}"),
        Err(e) => panic!("{e}"),
    }
}

#[test]
fn free_operator_negative_index_and_form() {
    let g = Arc::new(RadialGrid::new(15.0, 150).unwrap());
    let h = LinearizedOperator::free(g, 0.7).unwrap();
    let (np, nm) = negative_index(&h.lp, &h.lm, &SpectrumConfig::default());
    assert_eq!(np + nm, 0);
    assert!(quadratic_form_min(&h, &[]).unwrap() >= 0.7 - 1e-9);
}

#[test]
fn report_round_trips_json() {
    let (p, h) = state(&Nonlinearity::saturable(), 0.5, 0, 300);
    let (_, r) = report(&p, &h);
    let text = serde_json::to_string(&r).unwrap();
    let back: StabilityReport = serde_json::from_str(&text).unwrap();
    assert_eq!(back.verdict, r.verdict);
    assert_eq!(back.negative_index, r.negative_index);
    assert!(text.contains("\"verdict\":\"linearly-stable\""));
    assert_eq!(serde_json::to_value(Verdict::FailsCondition2).unwrap(), "fails-condition-2");
}

fn surrogate() -> (ThresholdSurrogate, Arc<RadialGrid>) {
    let g = Arc::new(RadialGrid::new(20.0, 300).unwrap());
    (ThresholdSurrogate::new(g.clone(), 1.0, 1.0, 1e-10).unwrap(), g)
}

fn scan(amplitude: f64) -> nlsx_core::Result<ThresholdScan> {
    let (sur, g) = surrogate();
    let bump = BumpSpec {
        center: 0.0,
        width: 1.5,
        amplitude,
    };
    let pert = build_perturbation(&bump, &BumpSpec::zero(), &g)?;
    let psi = sur.threshold_state()?;
    let eps: Vec<f64> = (0..9).map(|i| 1e-4 * 10f64.powf(i as f64 / 4.0)).collect();
    threshold_perturbation_scan(|e| sur.dense(&pert, e), 1.0, 1.0 - sur.detuning, &psi, &pert, &g, &eps)
}

#[test]
fn threshold_eigenvalue_emerges_linearly() {
    let s = scan(-1.0).unwrap();
    assert!(s.d < 0.0);
    assert!(s.emerged);
    assert!((s.fitted_slope - 1.0).abs() <= 0.05, "{}", s.fitted_slope);
    assert!((s.fitted_coefficient / s.d.abs() - 1.0).abs() < 0.1);
}

#[test]
fn flipped_perturbation_does_not_emerge() {
    match scan(1.0) {
        Ok(s) => {
            assert!(s.d > 0.0);
            assert!(!s.emerged);
        }
        Err(Error::TrackingLost(_)) => {}
        Err(e) => panic!("{e}"),
    }
}

#[test]
fn zero_perturbation_keeps_trajectory_constant() {
    let s = scan(0.0).unwrap();
    let first = s.trajectory[0].re_lambda;
    assert!(s.trajectory.iter().all(|p| (p.re_lambda - first).abs() < 1e-9));
    let mut buf = Vec::new();
    write_trajectory_csv(&mut buf, &s.trajectory).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("epsilon,re_lambda,im_lambda,branch_id\n"));
    assert_eq!(text.lines().count(), s.trajectory.len() + 1);
}

#[test]
fn surrogate_places_bound_state_below_threshold() {
    let (sur, _) = surrogate();
    let ev = sur.dense(&nlsx_core::PotentialPerturbation::zeros(300), 0.0).unwrap().eigenvalues();
    let near = ev
        .iter()
        .map(|z| (z.re - (1.0 - sur.detuning)).abs() + z.im.abs())
        .fold(f64::INFINITY, f64::min);
    assert!(near < 1e-9, "{near}");
}

#[test]
fn threshold_resonance_is_detected() {
    // Smooth well; the depth is tuned so the regular zero-energy solution
    // u = rF has u'(∞) = 0, using an RK4 oracle on u'' = V u.
    let width = 1.0;
    let well = |r: f64, depth: f64| -depth * (-(r / width).powi(2)).exp();
    let tail_slope = |depth: f64| {
        let (mut r, mut u, mut du) = (0.0f64, 0.0f64, 1.0f64);
        let dt = 1e-3;
        while r < 8.0 {
            let f = |r: f64, u: f64| well(r, depth) * u;
            let k1 = (du, f(r, u));
            let k2 = (du + 0.5 * dt * k1.1, f(r + 0.5 * dt, u + 0.5 * dt * k1.0));
            let k3 = (du + 0.5 * dt * k2.1, f(r + 0.5 * dt, u + 0.5 * dt * k2.0));
            let k4 = (du + dt * k3.1, f(r + dt, u + dt * k3.0));
            u += dt / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
            du += dt / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
            r += dt;
        }
        du
    };
    let (mut lo, mut hi) = (1.0, 5.0);
    assert!(tail_slope(lo) > 0.0 && tail_slope(hi) < 0.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if tail_slope(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let depth = 0.5 * (lo + hi);
    let g = Arc::new(RadialGrid::new(40.0, 4000).unwrap());
    let v0: Vec<f64> = g.nodes().iter().map(|&r| well(r, depth)).collect();
    let h = LinearizedOperator::from_parts(g.clone(), 1.0, v0, vec![0.0; 4000]).unwrap();
    let res = resonance_diagnostic(&h).unwrap();
    assert!(res.resonance_suspected, "{res:?}");
    assert!((res.growth_exponent - 1.0).abs() < 0.2, "{res:?}");

    let free = LinearizedOperator::free(g, 1.0).unwrap();
    let generic = resonance_diagnostic(&free).unwrap();
    assert!(!generic.resonance_suspected, "{generic:?}");
    assert!((generic.growth_exponent - 3.0).abs() < 0.3, "{generic:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn signature_is_scale_invariant(re in -5.0f64..5.0, im in -5.0f64..5.0) {
        prop_assume!(re.abs() + im.abs() > 1e-3);
        let (_, h) = state(&Nonlinearity::saturable(), 0.3, 1, 200);
        let cfg = SpectrumConfig::default();
        let s = discrete_spectrum(&h, &cfg).unwrap();
        for m in s.positive_gap_modes() {
            let xi = m.xi.as_ref().unwrap();
            let (a, _) = signature(xi, &h, &cfg);
            let (b, _) = signature(&xi.scale(C::new(re, im)), &h, &cfg);
            prop_assert_eq!(a, b);
            prop_assert_eq!(a, m.signature);
        }
    }

    #[test]
    fn pairing_defect_is_zero_for_symmetric_sets(vals in prop::collection::vec((0.0f64..3.0, 0.0f64..3.0), 1..10)) {
        let mut ev = Vec::new();
        for (a, b) in vals {
            ev.extend([C::new(a, b), C::new(-a, b), C::new(a, -b), C::new(-a, -b)]);
        }
        prop_assert!(pairing_defect(&ev).0 < 1e-12);
    }
}
