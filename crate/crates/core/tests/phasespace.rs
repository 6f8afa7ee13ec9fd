use std::f64::consts::{FRAC_PI_2, PI, SQRT_2};

use phonon_laser::lindblad::{evolve_expectations, liouvillian, steady_state, DensityMatrix, EvolveOptions};
use phonon_laser::models::presets::Preset;
use phonon_laser::models::PhysicalModel;
use phonon_laser::operator::{coherent_state, destroy, fock_state, number, Operator};
use phonon_laser::phasespace::*;
use phonon_laser::C64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn pure(ket: Vec<C64>) -> DensityMatrix {
    DensityMatrix::from_pure(&ket).unwrap()
}

fn vacuum(n: usize) -> DensityMatrix {
    pure(fock_state(0, n).unwrap())
}

fn gaussian(mean: f64, var: f64) -> impl Fn(f64) -> f64 {
    move |x| (-(x - mean).powi(2) / (2.0 * var)).exp() / (2.0 * PI * var).sqrt()
}

fn wide() -> Vec<f64> {
    symmetric_grid(6.0, 0.02).unwrap()
}

fn random_state(seed: u64, n: usize) -> DensityMatrix {
    let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
    let a = Operator::from_fn(n, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    let p = a.try_matmul(&a.adjoint()).unwrap();
    let tr = p.trace().re;
    DensityMatrix::new(p.scale_real(1.0 / tr)).unwrap()
}

fn reduced_steady(spec: &phonon_laser::models::SystemSpec) -> DensityMatrix {
    let model = PhysicalModel::build(spec).unwrap();
    let ss = steady_state(&model.liouvillian().unwrap()).unwrap();
    ss.rho.reduce_to_motion(&model.layout).unwrap()
}

#[test]
fn vacuum_char_fun() {
    for phi in [0.0, 0.7, FRAC_PI_2, 2.5] {
        let s = char_fun(&vacuum(30), phi, &symmetric_grid(2.0, 0.1).unwrap()).unwrap();
        s.check().unwrap();
        for (b, v) in s.grid.iter().zip(&s.values) {
            assert!((v - c((-b * b / 2.0).exp(), 0.0)).norm() < 1e-12);
        }
    }
}

#[test]
fn coherent_char_fun() {
    let alpha = c(1.2, -0.8);
    let rho = pure(coherent_state(alpha, 50).unwrap());
    let phi = 0.9;
    let s = char_fun(&rho, phi, &symmetric_grid(1.0, 0.05).unwrap()).unwrap();
    s.check().unwrap();
    for (b, v) in s.grid.iter().zip(&s.values) {
        let beta = C64::from_polar(*b, phi);
        let expected = (-beta.norm_sqr() / 2.0 + beta * alpha.conj() - beta.conj() * alpha).exp();
        assert!((v - expected).norm() < 1e-10, "{b}: {v} vs {expected}");
    }
}

#[test]
fn fock_one_char_fun() {
    let rho = pure(fock_state(1, 20).unwrap());
    let s = char_fun(&rho, 0.3, &symmetric_grid(1.0, 0.05).unwrap()).unwrap();
    for (b, v) in s.grid.iter().zip(&s.values) {
        let x = b * b;
        assert!((v - c((-x / 2.0).exp() * (1.0 - x), 0.0)).norm() < 1e-12);
    }
}

#[test]
fn vacuum_marginal_has_half_variance() {
    let s = char_fun(&vacuum(30), FRAC_PI_2, &wide()).unwrap();
    let m = marginal_from_charfun(&s, 6.0, &MarginalGrid::default()).unwrap();
    assert!(m.within_budget(), "norm {} negativity {}", m.raw_norm, m.negativity);
    assert!((m.variance() - 0.5).abs() < 1e-3);
    assert!(m.l1_to(gaussian(0.0, 0.5)) < 0.02);
}

#[test]
fn coherent_marginal_is_displaced() {
    let rho = pure(coherent_state(c(2.0, 0.0), 40).unwrap());
    let s = char_fun(&rho, FRAC_PI_2, &wide()).unwrap();
    let m = marginal_from_charfun(&s, 6.0, &MarginalGrid::default()).unwrap();
    assert!(m.quadrature_angle.abs() < 1e-15);
    assert!((m.mean() - 2.0 * SQRT_2).abs() < 1e-3, "{}", m.mean());
    assert!(m.l1_to(gaussian(2.0 * SQRT_2, 0.5)) < 0.02);
}

#[test]
fn fock_one_marginal() {
    let rho = pure(fock_state(1, 20).unwrap());
    let s = char_fun(&rho, FRAC_PI_2, &wide()).unwrap();
    let m = marginal_from_charfun(&s, 6.0, &MarginalGrid::default()).unwrap();
    let exact = |x: f64| 2.0 * x * x * (-x * x).exp() / PI.sqrt();
    assert!(m.l1_to(exact) < 0.02);
}

#[test]
fn measured_range_runs_with_padding() {
    let s = char_fun(&vacuum(30), FRAC_PI_2, &measured_beta_grid()).unwrap();
    let m = marginal_from_charfun(&s, MEASURED_PAD, &MarginalGrid::default()).unwrap();
    // The short record only resolves a smoothed density, centred on zero.
    assert!(m.mean().abs() < 1e-9);
    let integral = trapezoid(&m.x, &m.density);
    assert!((integral - 1.0).abs() < 1e-12);
}

#[test]
fn wigner_analytic_cases() {
    let pts: Vec<C64> = [c(0.0, 0.0), c(0.3, -0.2), c(-0.9, 0.4), c(1.1, 1.0)].to_vec();
    let w0 = wigner(&vacuum(30), &pts).unwrap();
    let w1 = wigner(&pure(fock_state(1, 30).unwrap()), &pts).unwrap();
    for ((a, v0), v1) in pts.iter().zip(&w0).zip(&w1) {
        let r = a.norm_sqr();
        assert!((v0 - 2.0 / PI * (-2.0 * r).exp()).abs() < 1e-12);
        assert!((v1 - 2.0 / PI * (4.0 * r - 1.0) * (-2.0 * r).exp()).abs() < 1e-12);
    }
    assert!((w1[0] + 2.0 / PI).abs() < 1e-12);
}

#[test]
fn wigner_of_coherent_state_peaks_at_alpha() {
    let alpha = c(1.0, -0.5);
    let rho = pure(coherent_state(alpha, 40).unwrap());
    let w = wigner(&rho, &[alpha, -alpha]).unwrap();
    assert!((w[0] - 2.0 / PI).abs() < 1e-10);
    assert!(w[1] < 1e-3);
}

#[test]
fn wigner_grid_normalizes() {
    let axis: Vec<f64> = (0..81).map(|k| -4.0 + 0.1 * k as f64).collect();
    let g = wigner_grid(&pure(fock_state(1, 20).unwrap()), &axis, &axis).unwrap();
    assert!((g.integral - 1.0).abs() < 0.02);
    assert!(g.boundary_mass < BOUNDARY_MASS_WARN);
}

#[test]
fn pipelines_agree_on_locking_steady_state() {
    let rho = reduced_steady(&Preset::Reference.spec(40).unwrap());
    let grid = MarginalGrid { x_max: 9.0, points: 181 };
    for axis in [0.0, FRAC_PI_2] {
        let s = char_fun(&rho, axis, &wide()).unwrap();
        s.check().unwrap();
        let from_c = marginal_from_charfun(&s, 6.0, &grid).unwrap();
        let from_w = wigner_marginal(&rho, axis - FRAC_PI_2, &grid, 9.0, 181).unwrap();
        assert!(from_c.within_budget());
        let d = from_c.l1_distance(&from_w).unwrap();
        assert!(d < 0.02, "axis {axis}: {d}");
    }
}

#[test]
fn tickle_breaks_phase_symmetry() {
    let base = Preset::Reference.spec(30).unwrap().to_two_level(true);
    let mut locked = base.clone();
    locked.tickle = Some(Preset::tickle(FRAC_PI_2));
    let grid = measured_beta_grid();
    let free = char_fun(&reduced_steady(&base), FRAC_PI_2, &grid).unwrap().max_abs_imag();
    let with = char_fun(&reduced_steady(&locked), FRAC_PI_2, &grid).unwrap().max_abs_imag();
    assert!(with > 5.0 * free.max(1e-12), "{with} vs {free}");
    assert!(with > 0.05);
}

#[test]
fn pure_dephasing_gives_linear_phase_variance() {
    let n = 30;
    let gamma: f64 = 0.4;
    let rho0 = pure(coherent_state(c(2.0, 0.0), n).unwrap());
    let jump = number(n).unwrap().scale_real((2.0 * gamma).sqrt());
    let l = liouvillian(&Operator::zeros(n), &[jump]).unwrap();
    let times: Vec<f64> = (0..=10).map(|k| 0.2 * k as f64).collect();
    let opts = EvolveOptions {
        rtol: 1e-10,
        atol: 1e-12,
        ..EvolveOptions::default()
    };
    let a = destroy(n).unwrap();
    let amps: Vec<C64> = evolve_expectations(&rho0, &l, &times, &[a], &opts)
        .unwrap()
        .into_iter()
        .map(|row| row[0])
        .collect();
    let fit = phase_variance_trace(&times, &amps, 4.0).unwrap();
    assert!(!fit.saturated);
    assert!((fit.rate - 2.0 * gamma).abs() < 1e-6, "{}", fit.rate);
    for (t, th) in fit.times.iter().zip(&fit.theta_sq) {
        assert!((th - 2.0 * gamma * t).abs() < 1e-6);
    }
}

#[test]
fn constant_amplitude_has_no_diffusion() {
    let times = [0.0, 0.5, 1.0, 1.5];
    let amps = [c(0.0, -2.0); 4];
    let fit = phase_variance_trace(&times, &amps, 4.0).unwrap();
    assert!(fit.rate.abs() < 1e-14);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn char_fun_is_bounded_and_hermitian(seed in any::<u64>(), phi in 0.0f64..6.3, n in 2usize..12) {
        let s = char_fun(&random_state(seed, n), phi, &symmetric_grid(1.0, 0.1).unwrap()).unwrap();
        prop_assert!(s.check().is_ok());
        prop_assert!(s.values.iter().all(|v| v.norm() <= 1.0 + 1e-12));
    }

    #[test]
    fn coherent_marginals_are_gaussian(re in -2.0f64..2.0, im in -2.0f64..2.0, axis in 0.0f64..3.2) {
        let alpha = c(re, im);
        let rho = pure(coherent_state(alpha, 40).unwrap());
        let s = char_fun(&rho, axis, &wide()).unwrap();
        let m = marginal_from_charfun(&s, 6.0, &MarginalGrid::default()).unwrap();
        let phi = axis - FRAC_PI_2;
        let mean = SQRT_2 * (alpha * C64::from_polar(1.0, -phi)).re;
        prop_assert!(m.l1_to(gaussian(mean, 0.5)) < 0.02);
    }
}
