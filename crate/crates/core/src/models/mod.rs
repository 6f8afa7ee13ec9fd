//! Physical model of the two-ion system: parameters, Hamiltonian and jump
//! operators.
//!
//! Canonical units: couplings and frequencies in rad/ms, rates in 1/ms. The
//! 4-level block keeps atomic-physics units (rad/µs, 1/µs) and is converted
//! when matrices are assembled.

mod carrier;
mod lamb_dicke;
pub mod presets;
pub mod rates;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::{destroy, embed, embed_product, spin_op, Operator, Slot, SpaceLayout, SpinKind};
use crate::C64;

pub use carrier::carrier_signal;
pub use lamb_dicke::{lamb_dicke_matrix_elements, LdOrder};
pub use presets::Preset;
pub use rates::{effective_gamma_h, omega1_from_tau1, omega2_from_tau2, rate_equation_evolve, DecayFit, RateParams};

const US_PER_MS: f64 = 1e3;

/// g[rad/ms] = 2π × g[kHz].
pub fn khz_to_rad_per_ms(khz: f64) -> f64 {
    2.0 * std::f64::consts::PI * khz
}

pub fn rad_per_ms_to_khz(w: f64) -> f64 {
    w / (2.0 * std::f64::consts::PI)
}

/// Ratio γ_e/γ_h of the dephasing that stands in for the extra levels.
pub const DEPHASING_RATIO: f64 = 50.0 / 40.0;

/// Level index of the excited P state in the 4-level heating ion.
pub const EXCITED_LEVEL: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FourLevelParams {
    /// Repumper Rabi frequencies, rad/µs.
    pub omega1: f64,
    pub omega2: f64,
    /// Repumper-1 detuning, rad/µs.
    pub delta1: f64,
    /// Branching rates out of |e⟩, 1/µs.
    pub gamma0: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    /// Tune the blue sideband to the light-shifted |0⟩–|1⟩ line, i.e.
    /// cancel the repumper-1 shift of |1⟩.
    #[serde(default = "yes")]
    pub compensate_light_shift: bool,
}

fn yes() -> bool {
    true
}

impl FourLevelParams {
    /// Repumper strengths from calibrated repumping rates 1/τ₁, 1/τ₂ in 1/ms.
    pub fn from_repump_rates(
        gamma_h1_per_ms: f64,
        gamma_h2_per_ms: f64,
        delta1: f64,
        gamma0: f64,
        gamma1: f64,
        gamma2: f64,
    ) -> Result<Self> {
        let omega1 = omega1_from_tau1(US_PER_MS / gamma_h1_per_ms, delta1, gamma0, gamma1, gamma2)?;
        let omega2 = omega2_from_tau2(US_PER_MS / gamma_h2_per_ms, gamma0, gamma1, gamma2)?;
        Ok(FourLevelParams {
            omega1,
            omega2,
            delta1,
            gamma0,
            gamma1,
            gamma2,
            compensate_light_shift: true,
        })
    }

    /// Repumper-1 shift of |1⟩, rad/µs.
    pub fn light_shift(&self) -> f64 {
        rates::repumper1_light_shift(self.omega1, self.delta1, self.gamma0 + self.gamma1 + self.gamma2)
    }

    /// Calibrated repumping rates with the default branching and detuning.
    pub fn calibrated(gamma_h1_per_ms: f64, gamma_h2_per_ms: f64) -> Result<Self> {
        Self::from_repump_rates(
            gamma_h1_per_ms,
            gamma_h2_per_ms,
            rates::default_delta1(),
            rates::GAMMA0_PER_US,
            rates::GAMMA1_PER_US,
            rates::GAMMA2_PER_US,
        )
    }

    pub fn rate_params(&self) -> Result<RateParams> {
        RateParams::from_rabi(self.omega1, self.omega2, self.delta1, self.gamma0, self.gamma1, self.gamma2)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TickleParams {
    /// Drive strength, rad/ms.
    pub g_t: f64,
    /// Drive phase Φ_t, rad.
    pub phase: f64,
    pub enabled: bool,
}

/// Full parameter set of one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    /// Heating-ion blue-sideband coupling, rad/ms.
    pub g_h: f64,
    /// Cooling-ion red-sideband coupling, rad/ms.
    pub g_c: f64,
    /// Effective heating-ion decay, 1/ms. Enters the matrices only for the
    /// 2-level heating ion; kept as metadata for the 4-level ion.
    pub gamma_h: f64,
    pub gamma_c: f64,
    /// Extra dephasing √γ_e |1⟩⟨1| of the 2-level heating ion, 1/ms.
    pub gamma_e: f64,
    pub be_levels: usize,
    pub four_level: Option<FourLevelParams>,
    pub tickle: Option<TickleParams>,
    pub eta_h: f64,
    pub eta_c: f64,
    /// Use the full Lamb-Dicke sideband elements for the heating ion.
    pub nonlinear_ld: bool,
    pub fock_cutoff: usize,
    /// Trap frequency, rad/ms. Bookkeeping only.
    pub omega_m: f64,
}

impl Default for SystemSpec {
    fn default() -> Self {
        SystemSpec {
            g_h: 0.0,
            g_c: 0.0,
            gamma_h: 0.0,
            gamma_c: 0.0,
            gamma_e: 0.0,
            be_levels: 2,
            four_level: None,
            tickle: None,
            eta_h: 0.15,
            eta_c: 0.05,
            nonlinear_ld: false,
            fock_cutoff: 40,
            omega_m: khz_to_rad_per_ms(1800.0),
        }
    }
}

fn nonneg(field: &str, v: f64) -> Result<()> {
    if !v.is_finite() || v < 0.0 {
        return Err(Error::param(field, format!("must be finite and nonnegative, got {v}")));
    }
    Ok(())
}

impl SystemSpec {
    pub fn validate(&self) -> Result<()> {
        for (f, v) in [
            ("g_h", self.g_h),
            ("g_c", self.g_c),
            ("gamma_h", self.gamma_h),
            ("gamma_c", self.gamma_c),
            ("gamma_e", self.gamma_e),
            ("omega_m", self.omega_m),
        ] {
            nonneg(f, v)?;
        }
        for (f, v) in [("eta_h", self.eta_h), ("eta_c", self.eta_c)] {
            if !(0.0..1.0).contains(&v) {
                return Err(Error::param(f, format!("must be in [0, 1), got {v}")));
            }
        }
        SpaceLayout::new(self.fock_cutoff, self.be_levels)?;
        match (self.be_levels, &self.four_level) {
            (4, None) => {
                return Err(Error::Configuration("4-level heating ion requires four_level parameters".into()))
            }
            (4, Some(fl)) => {
                if self.gamma_e > 0.0 {
                    return Err(Error::Configuration(
                        "gamma_e must be zero for the 4-level heating ion; its dephasing is already modeled".into(),
                    ));
                }
                for (f, v) in [
                    ("four_level.omega1", fl.omega1),
                    ("four_level.omega2", fl.omega2),
                    ("four_level.gamma0", fl.gamma0),
                    ("four_level.gamma1", fl.gamma1),
                    ("four_level.gamma2", fl.gamma2),
                ] {
                    nonneg(f, v)?;
                }
                if !fl.delta1.is_finite() {
                    return Err(Error::param("four_level.delta1", "must be finite"));
                }
            }
            (2, Some(_)) => {
                return Err(Error::Configuration(
                    "four_level parameters given but be_levels = 2".into(),
                ))
            }
            _ => {}
        }
        if let Some(t) = &self.tickle {
            nonneg("tickle.g_t", t.g_t)?;
            if !t.phase.is_finite() {
                return Err(Error::param("tickle.phase", "must be finite"));
            }
        }
        Ok(())
    }

    pub fn layout(&self) -> Result<SpaceLayout> {
        SpaceLayout::new(self.fock_cutoff, self.be_levels)
    }

    pub fn with_fock_cutoff(&self, n: usize) -> Self {
        SystemSpec {
            fock_cutoff: n,
            ..self.clone()
        }
    }

    /// 2-level reduction of the heating ion with the given effective decay,
    /// optionally with the dephasing that mimics the extra levels.
    pub fn to_two_level(&self, with_dephasing: bool) -> Self {
        SystemSpec {
            be_levels: 2,
            four_level: None,
            gamma_e: if with_dephasing { DEPHASING_RATIO * self.gamma_h } else { 0.0 },
            ..self.clone()
        }
    }

    pub fn tickle_active(&self) -> bool {
        self.tickle.map(|t| t.enabled && t.g_t > 0.0).unwrap_or(false)
    }

    /// Gain coefficient g_h²/(γ_h + γ_e), 1/ms.
    pub fn kappa_h(&self) -> f64 {
        self.g_h * self.g_h / (self.gamma_h + self.gamma_e)
    }

    /// Loss coefficient g_c²/γ_c, 1/ms.
    pub fn kappa_c(&self) -> f64 {
        self.g_c * self.g_c / self.gamma_c
    }
}

fn heating_lowering(spec: &SystemSpec) -> Result<Operator> {
    let order = if spec.nonlinear_ld { LdOrder::Full } else { LdOrder::First };
    lamb_dicke_matrix_elements(spec.eta_h, spec.fock_cutoff, order)
}

/// System Hamiltonian in the interaction picture, rad/ms.
///
/// The off-diagonal part is accumulated in one operator X and symmetrized as
/// X + X†, so the result is Hermitian to the last bit.
pub fn build_hamiltonian(spec: &SystemSpec) -> Result<Operator> {
    spec.validate()?;
    let layout = spec.layout()?;
    let n = spec.fock_cutoff;
    let a = destroy(n)?;
    let adag = a.adjoint();
    let mut x = Operator::zeros(layout.dim());

    if spec.g_c > 0.0 {
        let sm_c = spin_op(SpinKind::Minus, 2, (0, 1))?;
        let term = embed_product(&[(&adag, Slot::Motion), (&sm_c, Slot::Cooling)], &layout)?;
        x = &x + &term.scale_real(spec.g_c);
    }
    if spec.g_h > 0.0 {
        let big_a = heating_lowering(spec)?;
        let sp_h = spin_op(SpinKind::Plus, spec.be_levels, (0, 1))?;
        let term = embed_product(&[(&big_a.adjoint(), Slot::Motion), (&sp_h, Slot::Heating)], &layout)?;
        x = &x + &term.scale_real(spec.g_h);
    }
    if spec.tickle_active() {
        let t = spec.tickle.unwrap();
        let term = embed(&adag, Slot::Motion, &layout)?;
        x = &x + &term.scale(C64::from_polar(t.g_t, -t.phase));
    }
    let mut diag = Operator::zeros(layout.dim());
    if let (4, Some(fl)) = (spec.be_levels, spec.four_level) {
        let e = EXCITED_LEVEL;
        let mut rep = Operator::zeros(4);
        rep.set(e, 1, C64::new(fl.omega1 * US_PER_MS / 2.0, 0.0));
        rep.set(e, 2, C64::new(fl.omega2 * US_PER_MS / 2.0, 0.0));
        x = &x + &embed(&rep, Slot::Heating, &layout)?;
        let mut det = Operator::zeros(4);
        // |2⟩ shares the shift of |e⟩: repumper 2 is resonant.
        det.set(e, e, C64::new(-fl.delta1 * US_PER_MS, 0.0));
        det.set(2, 2, C64::new(-fl.delta1 * US_PER_MS, 0.0));
        if fl.compensate_light_shift {
            det.set(1, 1, C64::new(-fl.light_shift() * US_PER_MS, 0.0));
        }
        diag = embed(&det, Slot::Heating, &layout)?;
    }
    Ok(&(&x + &x.adjoint()) + &diag)
}

/// Lindblad jump operators; channels with zero rate are omitted.
pub fn build_jump_ops(spec: &SystemSpec) -> Result<Vec<Operator>> {
    spec.validate()?;
    let layout = spec.layout()?;
    let mut ops = Vec::new();
    match spec.be_levels {
        2 => {
            if spec.gamma_h > 0.0 {
                let sm = spin_op(SpinKind::Minus, 2, (0, 1))?;
                ops.push(embed(&sm, Slot::Heating, &layout)?.scale_real(spec.gamma_h.sqrt()));
            }
            if spec.gamma_e > 0.0 {
                let p1 = spin_op(SpinKind::Proj, 2, (0, 1))?;
                ops.push(embed(&p1, Slot::Heating, &layout)?.scale_real(spec.gamma_e.sqrt()));
            }
        }
        _ => {
            let fl = spec.four_level.expect("validated");
            for (lvl, g) in [(0, fl.gamma0), (1, fl.gamma1), (2, fl.gamma2)] {
                if g > 0.0 {
                    let mut l = Operator::zeros(4);
                    l.set(lvl, EXCITED_LEVEL, C64::new((g * US_PER_MS).sqrt(), 0.0));
                    ops.push(embed(&l, Slot::Heating, &layout)?);
                }
            }
        }
    }
    if spec.gamma_c > 0.0 {
        let sm = spin_op(SpinKind::Minus, 2, (0, 1))?;
        ops.push(embed(&sm, Slot::Cooling, &layout)?.scale_real(spec.gamma_c.sqrt()));
    }
    Ok(ops)
}

/// Excitation charge Q = n + (cooling excited) − (heating ion out of |0⟩)
/// for each joint basis state.
///
/// The Hamiltonian without tickle conserves Q and every jump operator shifts
/// it by a fixed amount, which splits the Liouvillian into independent
/// coherence sectors.
pub fn excitation_charges(layout: &SpaceLayout) -> Vec<i64> {
    (0..layout.dim())
        .map(|idx| {
            let (n, h, c) = layout.decompose(idx);
            n as i64 + c as i64 - i64::from(h != 0)
        })
        .collect()
}

/// Assembled model with the common observables.
#[derive(Clone, Debug)]
pub struct PhysicalModel {
    pub spec: SystemSpec,
    pub layout: SpaceLayout,
    pub hamiltonian: Operator,
    pub jumps: Vec<Operator>,
    pub charges: Vec<i64>,
}

impl PhysicalModel {
    pub fn build(spec: &SystemSpec) -> Result<Self> {
        let layout = spec.layout()?;
        Ok(PhysicalModel {
            spec: spec.clone(),
            layout,
            hamiltonian: build_hamiltonian(spec)?,
            jumps: build_jump_ops(spec)?,
            charges: excitation_charges(&layout),
        })
    }

    /// Whether the excitation charge is conserved, i.e. no tickle drive.
    pub fn sector_symmetric(&self) -> bool {
        !self.spec.tickle_active()
    }

    pub fn destroy_op(&self) -> Result<Operator> {
        embed(&destroy(self.layout.fock_cutoff)?, Slot::Motion, &self.layout)
    }

    pub fn number_op(&self) -> Result<Operator> {
        embed(&crate::operator::number(self.layout.fock_cutoff)?, Slot::Motion, &self.layout)
    }

    /// σ_z = |1⟩⟨1| − |0⟩⟨0| of the heating ion.
    pub fn sz_heating(&self) -> Result<Operator> {
        embed(&spin_op(SpinKind::Z, self.layout.heating_levels, (0, 1))?, Slot::Heating, &self.layout)
    }

    pub fn sz_cooling(&self) -> Result<Operator> {
        embed(&spin_op(SpinKind::Z, 2, (0, 1))?, Slot::Cooling, &self.layout)
    }
}
