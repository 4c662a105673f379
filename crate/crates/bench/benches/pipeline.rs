use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use nlsx_bench::{excited_state, grid, OMEGA};
use nlsx_core::dynamics::{
    integrate_reduced, nls_evolve, EvolveConfig, FieldState, Observe, ReducedConfig, ReducedModel, SineTransform,
    Splitting,
};
use nlsx_core::fgr::{fgr_coefficient, resonance_set, taylor_coefficients_for, ContinuumProjector, FgrConfig};
use nlsx_core::profile::solve_profile;
use nlsx_core::spectral::{discrete_spectrum, SpectrumConfig};
use nlsx_core::{Nonlinearity, ProfileConfig, Spinor};
use num_complex::Complex64 as C;

fn profile(c: &mut Criterion) {
    let nl = Nonlinearity::saturable();
    let mut group = c.benchmark_group("profile");
    for n in [400, 800] {
        let g = grid(n);
        group.bench_with_input(BenchmarkId::from_parameter(n), &g, |b, g| {
            b.iter(|| solve_profile(&nl, OMEGA, 1, g.clone(), &ProfileConfig::default()).unwrap())
        });
    }
    group.finish();
}

fn spectrum(c: &mut Criterion) {
    let mut group = c.benchmark_group("spectrum");
    group.sample_size(10);
    for n in [200, 400] {
        let f = excited_state(n);
        group.bench_with_input(BenchmarkId::from_parameter(n), &f.h, |b, h| {
            b.iter(|| discrete_spectrum(h, &SpectrumConfig::default()).unwrap())
        });
    }
    group.finish();
}

fn fgr(c: &mut Criterion) {
    let f = excited_state(400);
    let lambda: Vec<f64> = f.modes.iter().map(|m| m.lambda).collect();
    let res = resonance_set(&lambda, OMEGA, 6).unwrap();
    let coeffs = taylor_coefficients_for(&f.nl, &f.profile, &f.modes, &res).unwrap();
    let xis: Vec<Spinor> = f.modes.iter().map(|m| m.xi.clone()).collect();
    let pc = ContinuumProjector::new(&f.h, &xis).unwrap();
    let cfg = FgrConfig::default();
    let mut group = c.benchmark_group("fgr");
    group.sample_size(20);
    group.bench_function("diagonal-negative-mode", |b| {
        b.iter(|| fgr_coefficient(&f.h, &coeffs, &pc, &[0, 1], 1, &cfg).unwrap())
    });
    group.finish();
}

fn evolution(c: &mut Criterion) {
    let mut group = c.benchmark_group("evolve");
    for n in [799, 800] {
        let mut dst = SineTransform::new(n);
        let mut x: Vec<C> = (0..n).map(|k| C::new((k as f64).sin(), 0.0)).collect();
        group.bench_function(BenchmarkId::new("sine-transform", n), |b| b.iter(|| dst.apply(black_box(&mut x))));
    }
    let f = excited_state(799);
    let g = f.profile.grid.clone();
    for (name, splitting, dt) in [("strang", Splitting::Strang, 0.05), ("yoshida4", Splitting::Yoshida4, 0.05)] {
        let cfg = EvolveConfig {
            dt,
            splitting,
            band_limit: true,
            sample_interval: 0.0,
            ..EvolveConfig::default()
        };
        let st = FieldState::from_real(&g, &f.nl, &f.profile.values, cfg.flow).unwrap();
        group.bench_function(BenchmarkId::new("100-steps", name), |b| {
            b.iter(|| nls_evolve(&g, &f.nl, &st, 100.0 * dt, &cfg, |_| Ok(Observe::Continue)).unwrap())
        });
    }
    group.finish();
}

fn reduced(c: &mut Criterion) {
    let model = ReducedModel::single_mode(0.2, -1.0, 1.8e-5).unwrap();
    let cfg = ReducedConfig::default();
    c.bench_function("reduced/single-mode-to-blowup", |b| {
        b.iter(|| integrate_reduced(&model, &[C::new(0.37, 0.0)], 3e5, &cfg).unwrap())
    });
}

criterion_group!(benches, profile, spectrum, fgr, evolution, reduced);
criterion_main!(benches);
