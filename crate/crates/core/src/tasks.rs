//! Task runners behind the command-line subcommands. Each returns a
//! serializable report; writing files is left to the caller.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::config::{CharfunConfig, DiffusionConfig, EvolveConfig, CarrierConfig};
use crate::error::{Error, Result};
use crate::lindblad::{
    evolve_expectations, expectation, phonon_distribution, steady_state, DensityMatrix, EvolveOptions, SteadyMethod,
};
use crate::meanfield::{classify_phase, hl_total_diffusion, steady_n, MfParams, Phase};
use crate::models::rates::{four_level_bright_population, rate_equation_evolve, RateParams};
use crate::models::{carrier_signal, effective_gamma_h, khz_to_rad_per_ms, PhysicalModel, SystemSpec};
use crate::operator::{coherent_state, fock_state};
use crate::phasespace::{char_fun, marginal_from_charfun, phase_variance_trace, symmetric_grid, wigner_marginal, MarginalGrid};
use crate::C64;

fn linspace(end: f64, points: usize) -> Vec<f64> {
    let n = points.max(2) - 1;
    (0..=n).map(|k| end * k as f64 / n as f64).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SteadyReport {
    pub nbar: f64,
    pub distribution: Vec<f64>,
    pub tail_mass: f64,
    pub tv_to_poisson: f64,
    pub sz_h: f64,
    pub sz_c: f64,
    /// ⟨a⟩ as [re, im].
    pub amplitude: [f64; 2],
    pub residual: f64,
    pub method: SteadyMethod,
    pub mf_phase: Phase,
    pub mf_nbar: Option<f64>,
}

pub struct SteadyOutcome {
    pub model: PhysicalModel,
    pub rho: DensityMatrix,
    pub report: SteadyReport,
}

pub fn run_steady(spec: &SystemSpec) -> Result<SteadyOutcome> {
    let model = PhysicalModel::build(spec)?;
    let ss = steady_state(&model.liouvillian()?)?;
    let pn = phonon_distribution(&ss.rho, &model.layout)?;
    let a = expectation(&ss.rho, &model.destroy_op()?)?;
    let mf = MfParams::from_spec(spec);
    let report = SteadyReport {
        nbar: pn.mean(),
        tv_to_poisson: pn.tv_distance_to_poisson(),
        tail_mass: pn.tail_mass,
        distribution: pn.p,
        sz_h: expectation(&ss.rho, &model.sz_heating()?)?.re,
        sz_c: expectation(&ss.rho, &model.sz_cooling()?)?.re,
        amplitude: [a.re, a.im],
        residual: ss.residual,
        method: ss.method,
        mf_phase: classify_phase(&mf),
        mf_nbar: steady_n(&mf).ok().and_then(|s| s.mean_phonons()),
    };
    Ok(SteadyOutcome {
        model,
        rho: ss.rho,
        report,
    })
}

/// Motional state ⊗ internal state, both given on their own spaces.
pub fn joint_state(model: &PhysicalModel, motion: &DensityMatrix, internal: &crate::operator::Operator) -> Result<DensityMatrix> {
    if internal.dim() != model.layout.internal_dim() || motion.dim() != model.layout.fock_cutoff {
        return Err(Error::DimensionMismatch {
            expected: model.layout.dim(),
            found: motion.dim() * internal.dim(),
        });
    }
    DensityMatrix::new(motion.as_operator().kron(internal))
}

fn ground_internal(model: &PhysicalModel) -> crate::operator::Operator {
    let mut g = crate::operator::Operator::zeros(model.layout.internal_dim());
    g.set(0, 0, C64::new(1.0, 0.0));
    g
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvolveReport {
    pub t_ms: Vec<f64>,
    pub nbar: Vec<f64>,
    pub amplitude_re: Vec<f64>,
    pub amplitude_im: Vec<f64>,
    pub sz_h: Vec<f64>,
    pub sz_c: Vec<f64>,
}

/// Evolve from a coherent (or vacuum) motional state with both ions in the
/// ground state.
pub fn run_evolve(spec: &SystemSpec, cfg: &EvolveConfig, opts: &EvolveOptions) -> Result<EvolveReport> {
    let model = PhysicalModel::build(spec)?;
    let n = model.layout.fock_cutoff;
    let [re, im] = cfg.initial_alpha.unwrap_or([0.0, 0.0]);
    let motion = DensityMatrix::from_pure(&coherent_state(C64::new(re, im), n)?)?;
    let rho0 = joint_state(&model, &motion, &ground_internal(&model))?;
    let times = linspace(cfg.t_max_ms, cfg.points);
    let ops = [model.number_op()?, model.destroy_op()?, model.sz_heating()?, model.sz_cooling()?];
    let rows = evolve_expectations(&rho0, &model.liouvillian()?, &times, &ops, opts)?;
    Ok(EvolveReport {
        nbar: rows.iter().map(|r| r[0].re).collect(),
        amplitude_re: rows.iter().map(|r| r[1].re).collect(),
        amplitude_im: rows.iter().map(|r| r[1].im).collect(),
        sz_h: rows.iter().map(|r| r[2].re).collect(),
        sz_c: rows.iter().map(|r| r[3].re).collect(),
        t_ms: times,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarginalRecord {
    pub quadrature_deg: f64,
    pub x: Vec<f64>,
    pub density: Vec<f64>,
    pub raw_norm: f64,
    pub negativity: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxisRecord {
    pub axis_deg: f64,
    pub beta: Vec<f64>,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
    pub pad_to: f64,
    pub marginal: MarginalRecord,
    pub wigner_marginal: Option<MarginalRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CharfunReport {
    pub nbar: f64,
    pub axes: Vec<AxisRecord>,
}

fn marginal_record(m: crate::phasespace::MarginalCurve) -> MarginalRecord {
    MarginalRecord {
        quadrature_deg: m.quadrature_angle.to_degrees(),
        x: m.x,
        density: m.density,
        raw_norm: m.raw_norm,
        negativity: m.negativity,
    }
}

/// Characteristic function of the steady motional state along each axis,
/// with its Fourier marginal.
pub fn run_charfun(spec: &SystemSpec, cfg: &CharfunConfig) -> Result<CharfunReport> {
    let st = run_steady(spec)?;
    let motion = st.rho.reduce_to_motion(&st.model.layout)?;
    let grid = symmetric_grid(cfg.beta_max, cfg.beta_step)?;
    let mgrid = MarginalGrid {
        x_max: cfg.x_max,
        points: cfg.x_points,
    };
    let mut axes = Vec::with_capacity(cfg.axes_deg.len());
    for &deg in &cfg.axes_deg {
        let phi = deg.to_radians();
        let s = char_fun(&motion, phi, &grid)?;
        s.check()?;
        let m = marginal_from_charfun(&s, cfg.pad_to, &mgrid)?;
        let w = if cfg.wigner_check {
            Some(marginal_record(wigner_marginal(&motion, phi - PI / 2.0, &mgrid, cfg.x_max, cfg.x_points)?))
        } else {
            None
        };
        axes.push(AxisRecord {
            axis_deg: deg,
            re: s.values.iter().map(|c| c.re).collect(),
            im: s.values.iter().map(|c| c.im).collect(),
            beta: s.grid,
            pad_to: cfg.pad_to,
            marginal: marginal_record(m),
            wigner_marginal: w,
        });
    }
    Ok(CharfunReport {
        nbar: st.report.nbar,
        axes,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiffusionReport {
    pub intensity: f64,
    pub t_ms: Vec<f64>,
    pub theta_sq: Vec<f64>,
    /// Fitted ⟨θ²⟩ slope, rad²/ms.
    pub rate: f64,
    pub saturated: bool,
    /// Heisenberg-Langevin estimate at the same intensity, rad²/ms.
    pub hl_rate: f64,
}

/// Phase diffusion from a coherent start with amplitude √I along the real
/// axis. The ions start in the reduced internal steady state.
pub fn run_diffusion(spec: &SystemSpec, cfg: &DiffusionConfig, opts: &EvolveOptions) -> Result<DiffusionReport> {
    if spec.tickle_active() {
        return Err(Error::param("system.tickle_khz", "phase diffusion is measured without the locking drive"));
    }
    let st = run_steady(spec)?;
    let internal = st.rho.reduce_to_internal(&st.model.layout)?;
    let n = st.model.layout.fock_cutoff;
    let motion = DensityMatrix::from_pure(&coherent_state(C64::new(cfg.intensity.sqrt(), 0.0), n)?)?;
    let rho0 = joint_state(&st.model, &motion, &internal)?;
    let times = linspace(cfg.t_max_ms, cfg.points);
    let amps: Vec<C64> = evolve_expectations(&rho0, &st.model.liouvillian()?, &times, &[st.model.destroy_op()?], opts)?
        .into_iter()
        .map(|r| r[0])
        .collect();
    let fit = phase_variance_trace(&times, &amps, cfg.intensity)?;
    let hl_rate = hl_total_diffusion(&MfParams::from_spec(spec), cfg.intensity)?;
    Ok(DiffusionReport {
        intensity: cfg.intensity,
        t_ms: fit.times,
        theta_sq: fit.theta_sq,
        rate: fit.rate,
        saturated: fit.saturated,
        hl_rate,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub repump_rates_per_ms: [f64; 2],
    pub params: RateParams,
    /// |0⟩ population reached with only repumper 1 (from |1⟩) and only
    /// repumper 2 (from |2⟩).
    pub saturation: [f64; 2],
    pub effective_gamma_h_per_ms: f64,
    pub effective_decay_time_us: f64,
    pub fit_rms: f64,
    pub t_us: Vec<f64>,
    pub bright_population: Vec<f64>,
}

/// Repumper strengths, single-repumper saturations and the effective decay
/// of the engineered heating ion.
pub fn run_calibrate_decay(spec: &SystemSpec) -> Result<CalibrationReport> {
    let fl = spec
        .four_level
        .ok_or_else(|| Error::param("system.repump_rates", "calibration needs the four-level parameters"))?;
    let params = fl.rate_params()?;
    let only = |b1_on: bool| {
        let mut p = params;
        if b1_on {
            p.b2 = 0.0;
        } else {
            p.b1 = 0.0;
        }
        p
    };
    let long = |p: &RateParams, start: [f64; 4]| -> Result<f64> {
        let t_end = 50.0 * p.tau1.max(p.tau2).clamp(1.0, 1e5);
        Ok(rate_equation_evolve(start, p, &[0.0, t_end])?[1][0])
    };
    let sat1 = long(&only(true), [0.0, 1.0, 0.0, 0.0])?;
    let sat2 = long(&only(false), [0.0, 0.0, 1.0, 0.0])?;
    let fit = effective_gamma_h(&params)?;
    let t_us = linspace(6.0 * 1e3 / fit.rate_per_ms, 121);
    let bright_population = four_level_bright_population(&params, &t_us)?;
    Ok(CalibrationReport {
        repump_rates_per_ms: [1e3 / params.tau1, 1e3 / params.tau2],
        params,
        saturation: [sat1, sat2],
        effective_gamma_h_per_ms: fit.rate_per_ms,
        effective_decay_time_us: 1e3 / fit.rate_per_ms,
        fit_rms: fit.rms_residual,
        t_us,
        bright_population,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CarrierReport {
    pub nbar: f64,
    pub t_us: Vec<f64>,
    pub excitation: Vec<f64>,
    /// Same signal for a vacuum motional state.
    pub vacuum_excitation: Vec<f64>,
}

/// Cooling-ion carrier flopping on the steady phonon distribution.
pub fn run_carrier(spec: &SystemSpec, cfg: &CarrierConfig) -> Result<CarrierReport> {
    let st = run_steady(spec)?;
    let t_us = linspace(cfg.t_max_us, cfg.points);
    let t_ms: Vec<f64> = t_us.iter().map(|t| t * 1e-3).collect();
    let omega0 = khz_to_rad_per_ms(cfg.rabi_khz);
    let pn: Vec<f64> = st.report.distribution.iter().map(|p| p.max(0.0)).collect();
    let total: f64 = pn.iter().sum();
    let pn: Vec<f64> = pn.iter().map(|p| p / total).collect();
    let vac: Vec<f64> = fock_state(0, pn.len())?.iter().map(|z| z.norm_sqr()).collect();
    Ok(CarrierReport {
        nbar: st.report.nbar,
        excitation: carrier_signal(&pn, omega0, spec.eta_c, &t_ms)?,
        vacuum_excitation: carrier_signal(&vac, omega0, spec.eta_c, &t_ms)?,
        t_us,
    })
}
