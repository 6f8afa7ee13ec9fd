//! Engineered decay of the 4-level heating ion: rate equations, repumper
//! calibration and the effective two-level decay rate.
//!
//! Quantities here are in atomic-physics units: rates in 1/µs, Rabi
//! frequencies and detunings in rad/µs, times in µs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ode::{dopri5, Flow, OdeOptions};
use crate::operator::Operator;
use crate::C64;

/// Excited-state branching rates (1/µs) derived from Clebsch-Gordan
/// coefficients and the measured P-state lifetime.
pub const GAMMA0_PER_US: f64 = 40.0;
pub const GAMMA1_PER_US: f64 = 50.4;
pub const GAMMA2_PER_US: f64 = 29.6;

/// Effective |1⟩ → |0⟩ decay time of the calibrated heating ion, µs.
pub const EFFECTIVE_DECAY_TIME_US: f64 = 15.5;

/// Repumper-1 detuning, rad/µs (2π × 10 MHz).
pub fn default_delta1() -> f64 {
    2.0 * std::f64::consts::PI * 10.0
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateParams {
    /// Excitation rate |1⟩ → |e⟩ by repumper 1.
    pub b1: f64,
    /// Excitation rate |2⟩ → |e⟩ by repumper 2.
    pub b2: f64,
    pub gamma0: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub gamma: f64,
    pub delta: f64,
    pub tau1: f64,
    pub tau2: f64,
    pub omega1: f64,
    pub omega2: f64,
}

fn check_nonneg(field: &str, v: f64) -> Result<()> {
    if !v.is_finite() || v < 0.0 {
        return Err(Error::param(field, format!("must be finite and nonnegative, got {v}")));
    }
    Ok(())
}

fn check_pos(field: &str, v: f64) -> Result<()> {
    if !v.is_finite() || v <= 0.0 {
        return Err(Error::param(field, format!("must be finite and positive, got {v}")));
    }
    Ok(())
}

impl RateParams {
    /// Build from Rabi frequencies. Repumper 2 is taken resonant.
    pub fn from_rabi(omega1: f64, omega2: f64, delta: f64, gamma0: f64, gamma1: f64, gamma2: f64) -> Result<Self> {
        for (f, v) in [("omega1", omega1), ("omega2", omega2), ("gamma0", gamma0), ("gamma1", gamma1), ("gamma2", gamma2)] {
            check_nonneg(f, v)?;
        }
        if !delta.is_finite() {
            return Err(Error::param("delta", "must be finite"));
        }
        let gamma = gamma0 + gamma1 + gamma2;
        check_pos("gamma", gamma)?;
        let b1 = excitation_rate(omega1, delta, gamma);
        let b2 = excitation_rate(omega2, 0.0, gamma);
        let tau = |b: f64, branch: f64| {
            if b * branch > 0.0 {
                gamma / (b * branch)
            } else {
                f64::INFINITY
            }
        };
        Ok(RateParams {
            b1,
            b2,
            gamma0,
            gamma1,
            gamma2,
            gamma,
            delta,
            tau1: tau(b1, gamma0 + gamma2),
            tau2: tau(b2, gamma0 + gamma1),
            omega1,
            omega2,
        })
    }

    /// Build from calibrated time constants τ₁, τ₂ (µs).
    pub fn from_taus(tau1: f64, tau2: f64, delta: f64, gamma0: f64, gamma1: f64, gamma2: f64) -> Result<Self> {
        let omega1 = omega1_from_tau1(tau1, delta, gamma0, gamma1, gamma2)?;
        let omega2 = omega2_from_tau2(tau2, gamma0, gamma1, gamma2)?;
        let mut p = Self::from_rabi(omega1, omega2, delta, gamma0, gamma1, gamma2)?;
        p.tau1 = tau1;
        p.tau2 = tau2;
        Ok(p)
    }
}

/// Effective excitation rate b = γΩ²/(γ² + 4Δ²).
pub fn excitation_rate(omega: f64, delta: f64, gamma: f64) -> f64 {
    gamma * omega * omega / (gamma * gamma + 4.0 * delta * delta)
}

/// Second-order shift of |1⟩ from the detuned repumper 1, rad/µs:
/// Ω₁²Δ/(4Δ² + γ²). Positive pushes |1⟩ up, away from |e⟩ at −Δ.
pub fn repumper1_light_shift(omega1: f64, delta: f64, gamma: f64) -> f64 {
    let den = 4.0 * delta * delta + gamma * gamma;
    if den == 0.0 {
        0.0
    } else {
        omega1 * omega1 * delta / den
    }
}

/// Ω₁ = √[(1/τ₁)(γ² + 4Δ²)/(γ₀ + γ₂)].
pub fn omega1_from_tau1(tau1: f64, delta: f64, gamma0: f64, gamma1: f64, gamma2: f64) -> Result<f64> {
    check_pos("tau1", tau1)?;
    check_nonneg("gamma1", gamma1)?;
    check_pos("gamma0 + gamma2", gamma0 + gamma2)?;
    if !delta.is_finite() {
        return Err(Error::param("delta", "must be finite"));
    }
    let gamma = gamma0 + gamma1 + gamma2;
    Ok(((gamma * gamma + 4.0 * delta * delta) / (tau1 * (gamma0 + gamma2))).sqrt())
}

/// Ω₂ = √[(1/τ₂)γ²/(γ₀ + γ₁)].
pub fn omega2_from_tau2(tau2: f64, gamma0: f64, gamma1: f64, gamma2: f64) -> Result<f64> {
    check_pos("tau2", tau2)?;
    check_nonneg("gamma2", gamma2)?;
    check_pos("gamma0 + gamma1", gamma0 + gamma1)?;
    let gamma = gamma0 + gamma1 + gamma2;
    Ok((gamma * gamma / (tau2 * (gamma0 + gamma1))).sqrt())
}

/// Bright-state population with only repumper 1 on, starting in |1⟩, after
/// adiabatic elimination: P₀(t) = γ₀/(γ₀+γ₂) (1 − e^{−t/τ₁}).
pub fn repumper1_bright_population(t: f64, p: &RateParams) -> f64 {
    p.gamma0 / (p.gamma0 + p.gamma2) * (1.0 - (-t / p.tau1).exp())
}

/// Integrate the population rate equations for (P₀, P₁, P₂, P_e).
pub fn rate_equation_evolve(p0: [f64; 4], params: &RateParams, t_grid: &[f64]) -> Result<Vec<[f64; 4]>> {
    if p0.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(Error::param("p0", "populations must be finite and nonnegative"));
    }
    let total: f64 = p0.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::param("p0", format!("populations must sum to 1, got {total}")));
    }
    let p = *params;
    let rhs = move |_t: f64, y: &[f64], dy: &mut [f64]| {
        let pe = y[3];
        dy[0] = p.gamma0 * pe;
        dy[1] = -p.b1 * y[1] + p.gamma1 * pe;
        dy[2] = -p.b2 * y[2] + p.gamma2 * pe;
        dy[3] = p.b1 * y[1] + p.b2 * y[2] - p.gamma * pe;
    };
    let opts = OdeOptions {
        rtol: 1e-11,
        atol: 1e-13,
        ..OdeOptions::default()
    };
    let mut out = Vec::with_capacity(t_grid.len());
    dopri5(rhs, &p0, t_grid, &opts, |_, _, y| {
        out.push([y[0], y[1], y[2], y[3]]);
        Flow::Continue
    })?;
    Ok(out)
}

/// Coherent 4-level internal dynamics (levels 0, 1, 2, e): repumper
/// couplings, detuning and spontaneous decay. Returns the |0⟩ population at
/// each grid time, starting from |1⟩.
pub fn four_level_bright_population(params: &RateParams, t_grid: &[f64]) -> Result<Vec<f64>> {
    let (h, jumps) = internal_generators(params);
    let d = 4;
    let hd: Vec<C64> = h.data().to_vec();
    let mut k = Operator::zeros(d);
    for (i, v) in hd.iter().enumerate() {
        k.data_mut()[i] = C64::new(0.0, -1.0) * v;
    }
    for l in &jumps {
        let ldl = &l.adjoint() * l;
        k = &k - &ldl.scale_real(0.5);
    }
    let kd = k.data().to_vec();
    let kdag: Vec<C64> = k.adjoint().data().to_vec();
    let ls: Vec<Vec<C64>> = jumps.iter().map(|l| l.data().to_vec()).collect();
    let ldags: Vec<Vec<C64>> = jumps.iter().map(|l| l.adjoint().data().to_vec()).collect();
    let mm = |a: &[C64], b: &[C64], out: &mut [C64]| {
        for r in 0..d {
            for c in 0..d {
                let mut s = C64::new(0.0, 0.0);
                for q in 0..d {
                    s += a[r * d + q] * b[q * d + c];
                }
                out[r * d + c] = s;
            }
        }
    };
    let rhs = move |_t: f64, rho: &[C64], drho: &mut [C64]| {
        let mut t1 = [C64::new(0.0, 0.0); 16];
        let mut t2 = [C64::new(0.0, 0.0); 16];
        mm(&kd, rho, drho);
        mm(rho, &kdag, &mut t1);
        for i in 0..16 {
            drho[i] += t1[i];
        }
        for (l, ld) in ls.iter().zip(&ldags) {
            mm(l, rho, &mut t1);
            mm(&t1, ld, &mut t2);
            for i in 0..16 {
                drho[i] += t2[i];
            }
        }
    };
    let mut rho0 = vec![C64::new(0.0, 0.0); 16];
    rho0[d + 1] = C64::new(1.0, 0.0);
    let opts = OdeOptions {
        rtol: 1e-9,
        atol: 1e-12,
        ..OdeOptions::default()
    };
    let mut out = Vec::with_capacity(t_grid.len());
    dopri5(rhs, &rho0, t_grid, &opts, |_, _, y| {
        out.push(y[0].re);
        Flow::Continue
    })?;
    Ok(out)
}

fn internal_generators(p: &RateParams) -> (Operator, Vec<Operator>) {
    let e = 3;
    let mut x = Operator::zeros(4);
    x.set(e, 1, C64::new(p.omega1 / 2.0, 0.0));
    x.set(e, 2, C64::new(p.omega2 / 2.0, 0.0));
    let mut h = &x + &x.adjoint();
    // Frame co-rotating with both repumpers: |e⟩ and |2⟩ sit at −Δ so that
    // repumper 2 stays resonant and |1⟩, |2⟩ are not two-photon resonant.
    h.add_at(e, e, C64::new(-p.delta, 0.0));
    h.add_at(2, 2, C64::new(-p.delta, 0.0));
    let mut jumps = Vec::new();
    for (lvl, g) in [(0, p.gamma0), (1, p.gamma1), (2, p.gamma2)] {
        if g > 0.0 {
            let mut l = Operator::zeros(4);
            l.set(lvl, e, C64::new(g.sqrt(), 0.0));
            jumps.push(l);
        }
    }
    (h, jumps)
}

/// Result of fitting P₀(t) = 1 − e^{−Γt}.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    /// Fitted rate, 1/ms.
    pub rate_per_ms: f64,
    pub rms_residual: f64,
}

/// Effective |1⟩ → |0⟩ decay rate of the 4-level ion with both repumpers on,
/// from a single-exponential fit to the coherent internal dynamics.
pub fn effective_gamma_h(params: &RateParams) -> Result<DecayFit> {
    if params.omega1 == 0.0 && params.omega2 == 0.0 {
        return Ok(DecayFit {
            rate_per_ms: 0.0,
            rms_residual: 0.0,
        });
    }
    // Window covering several of the slowest expected time constants.
    let slow = params.tau1.max(params.tau2).min(1e4);
    let t_end = (6.0 * slow).clamp(1.0, 2e4);
    let n_pts = 400;
    let grid: Vec<f64> = (0..=n_pts).map(|k| t_end * k as f64 / n_pts as f64).collect();
    let p0 = four_level_bright_population(params, &grid)?;
    let rate = fit_rising_exponential(&grid, &p0)?;
    let rms = (grid
        .iter()
        .zip(&p0)
        .map(|(t, p)| {
            let r = p - (1.0 - (-rate * t).exp());
            r * r
        })
        .sum::<f64>()
        / grid.len() as f64)
        .sqrt();
    if rms > 0.05 {
        return Err(Error::FitNotConverged(format!(
            "single exponential does not describe the transient (rms residual {rms:.3})"
        )));
    }
    Ok(DecayFit {
        rate_per_ms: rate * 1e3,
        rms_residual: rms,
    })
}

/// Least-squares Γ for y(t) = 1 − e^{−Γt} by damped Gauss-Newton.
pub fn fit_rising_exponential(t: &[f64], y: &[f64]) -> Result<f64> {
    if t.len() != y.len() || t.len() < 2 {
        return Err(Error::param("data", "need at least two matching samples"));
    }
    // Start from the 1 − 1/e crossing.
    let target = 1.0 - (-1.0f64).exp();
    let t_cross = t
        .iter()
        .zip(y)
        .find(|(_, v)| **v >= target)
        .map(|(tt, _)| *tt)
        .unwrap_or(t[t.len() - 1]);
    let mut rate = 1.0 / t_cross.max(1e-12);
    let cost = |r: f64| -> f64 {
        t.iter()
            .zip(y)
            .map(|(tt, v)| {
                let d = v - 1.0 + (-r * tt).exp();
                d * d
            })
            .sum()
    };
    let mut c = cost(rate);
    for _ in 0..200 {
        let (mut num, mut den) = (0.0, 0.0);
        for (tt, v) in t.iter().zip(y) {
            let e = (-rate * tt).exp();
            let r = v - 1.0 + e;
            let j = -tt * e;
            num += j * r;
            den += j * j;
        }
        if den == 0.0 {
            break;
        }
        let mut step = -num / den;
        let mut accepted = false;
        for _ in 0..30 {
            let trial = rate + step;
            if trial > 0.0 {
                let ct = cost(trial);
                if ct <= c {
                    rate = trial;
                    c = ct;
                    accepted = true;
                    break;
                }
            }
            step *= 0.5;
        }
        if !accepted || step.abs() < 1e-14 * rate {
            break;
        }
    }
    if !rate.is_finite() || rate <= 0.0 {
        return Err(Error::FitNotConverged("nonpositive decay rate".into()));
    }
    Ok(rate)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn branching_rates(omega1: f64, omega2: f64) -> RateParams {
        RateParams::from_rabi(omega1, omega2, default_delta1(), GAMMA0_PER_US, GAMMA1_PER_US, GAMMA2_PER_US).unwrap()
    }

    #[test]
    fn unit_parameter_identities() {
        // γ = 1 with γ₀+γ₂ = 1, Δ = 0, τ = 1.
        assert!((omega1_from_tau1(1.0, 0.0, 0.5, 0.0, 0.5).unwrap() - 1.0).abs() < 1e-15);
        assert!((omega2_from_tau2(1.0, 0.5, 0.5, 0.0).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn total_decay_rate() {
        let p = branching_rates(1.0, 1.0);
        assert_eq!(p.gamma, GAMMA0_PER_US + GAMMA1_PER_US + GAMMA2_PER_US);
        assert!((p.gamma - 120.0).abs() < 1e-12);
    }

    #[test]
    fn zero_drive_keeps_populations() {
        let p = branching_rates(0.0, 0.0);
        let traj = rate_equation_evolve([0.0, 1.0, 0.0, 0.0], &p, &[0.0, 10.0, 100.0]).unwrap();
        for s in traj {
            assert_eq!(s, [0.0, 1.0, 0.0, 0.0]);
        }
    }

    #[test]
    fn adiabatic_depletion_of_level_one() {
        let p = branching_rates(2.0, 0.0);
        assert!(p.b1 < 0.01 * p.gamma);
        let grid: Vec<f64> = (0..=20).map(|k| k as f64 * 20.0).collect();
        let traj = rate_equation_evolve([0.0, 1.0, 0.0, 0.0], &p, &grid).unwrap();
        for (t, s) in grid.iter().zip(&traj) {
            let expected = (-p.b1 * (p.gamma0 + p.gamma2) / p.gamma * t).exp();
            assert!((s[1] - expected).abs() < 2e-3, "t={t}");
        }
    }

    #[test]
    fn negative_or_unnormalized_populations_rejected() {
        let p = branching_rates(1.0, 1.0);
        assert!(rate_equation_evolve([-0.1, 1.1, 0.0, 0.0], &p, &[0.0, 1.0]).is_err());
        assert!(rate_equation_evolve([0.5, 0.0, 0.0, 0.0], &p, &[0.0, 1.0]).is_err());
    }

    #[test]
    fn fit_recovers_known_rate() {
        let t: Vec<f64> = (0..100).map(|k| k as f64 * 0.1).collect();
        let y: Vec<f64> = t.iter().map(|tt| 1.0 - (-0.37 * tt).exp()).collect();
        assert!((fit_rising_exponential(&t, &y).unwrap() - 0.37).abs() < 1e-10);
    }

    #[test]
    fn no_repumpers_means_no_decay() {
        let p = branching_rates(0.0, 0.0);
        assert_eq!(effective_gamma_h(&p).unwrap().rate_per_ms, 0.0);
    }
}
