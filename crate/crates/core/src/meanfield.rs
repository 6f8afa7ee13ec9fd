//! First-order cumulant dynamics, the adiabatic amplitude equation, the
//! closed-form lasing occupation, phase classification and
//! Heisenberg-Langevin phase diffusion.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{SystemSpec, DEPHASING_RATIO};
use crate::ode::{dopri5, Flow, OdeOptions};
use crate::C64;

/// Relative tolerance for phase-boundary detection.
pub const BOUNDARY_RTOL: f64 = 1e-9;
/// |A|² at which a trajectory is declared runaway heating.
pub const BLOWUP_INTENSITY: f64 = 1e3;
const INVARIANT_SLACK: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MfParams {
    pub g_h: f64,
    pub g_c: f64,
    pub gamma_h: f64,
    pub gamma_c: f64,
    pub gamma_e: f64,
}

impl MfParams {
    /// Two-level reduction of a run spec. A 4-level heating ion is replaced
    /// by its effective decay plus the matching dephasing.
    pub fn from_spec(spec: &SystemSpec) -> Self {
        let gamma_e = if spec.be_levels == 4 {
            DEPHASING_RATIO * spec.gamma_h
        } else {
            spec.gamma_e
        };
        MfParams {
            g_h: spec.g_h,
            g_c: spec.g_c,
            gamma_h: spec.gamma_h,
            gamma_c: spec.gamma_c,
            gamma_e,
        }
    }

    pub fn without_dephasing(self) -> Self {
        MfParams { gamma_e: 0.0, ..self }
    }

    /// g_h²/(γ_h + γ_e).
    pub fn kappa_h(&self) -> f64 {
        self.g_h * self.g_h / (self.gamma_h + self.gamma_e)
    }

    /// g_c²/γ_c.
    pub fn kappa_c(&self) -> f64 {
        self.g_c * self.g_c / self.gamma_c
    }

    /// 8g_h²/(γ_h(γ_h + γ_e)).
    pub fn s_h(&self) -> f64 {
        8.0 * self.g_h * self.g_h / (self.gamma_h * (self.gamma_h + self.gamma_e))
    }

    /// 8g_c²/γ_c².
    pub fn s_c(&self) -> f64 {
        8.0 * self.g_c * self.g_c / (self.gamma_c * self.gamma_c)
    }

    fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("g_h", self.g_h),
            ("g_c", self.g_c),
            ("gamma_h", self.gamma_h),
            ("gamma_c", self.gamma_c),
            ("gamma_e", self.gamma_e),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::param(name, "must be finite and non-negative"));
            }
        }
        if self.gamma_h <= 0.0 || self.gamma_c <= 0.0 {
            return Err(Error::param("gamma", "decay rates must be positive"));
        }
        Ok(())
    }
}

/// A = ⟨a⟩, S = ⟨σ₊⟩, D = ⟨σ_z⟩ for both ions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanFieldState {
    pub a: C64,
    pub s_c: C64,
    pub s_h: C64,
    pub d_c: f64,
    pub d_h: f64,
}

impl MeanFieldState {
    /// Both ions in the ground state with amplitude A.
    pub fn ground(a: C64) -> Self {
        MeanFieldState {
            a,
            s_c: C64::new(0.0, 0.0),
            s_h: C64::new(0.0, 0.0),
            d_c: -1.0,
            d_h: -1.0,
        }
    }

    /// Spins at their adiabatic values for amplitude A.
    pub fn slaved(a: C64, p: &MfParams) -> Self {
        let i = C64::new(0.0, 1.0);
        let int = a.norm_sqr();
        let d_c = -1.0 / (1.0 + p.s_c() * int);
        let d_h = -1.0 / (1.0 + p.s_h() * int);
        MeanFieldState {
            a,
            s_c: -2.0 * i * p.g_c * a.conj() * d_c / p.gamma_c,
            s_h: -2.0 * i * p.g_h * a * d_h / (p.gamma_h + p.gamma_e),
            d_c,
            d_h,
        }
    }

    pub fn intensity(&self) -> f64 {
        self.a.norm_sqr()
    }

    fn check(&self) -> Result<()> {
        if self.d_c.abs() > 1.0 + INVARIANT_SLACK || self.d_h.abs() > 1.0 + INVARIANT_SLACK {
            return Err(Error::InvalidState(format!("inversion out of range: {self:?}")));
        }
        if self.s_c.norm() > 0.5 + INVARIANT_SLACK || self.s_h.norm() > 0.5 + INVARIANT_SLACK {
            return Err(Error::InvalidState(format!("spin coherence out of range: {self:?}")));
        }
        Ok(())
    }

    fn pack(&self) -> [C64; 5] {
        [self.a, self.s_c, self.s_h, C64::new(self.d_c, 0.0), C64::new(self.d_h, 0.0)]
    }

    fn unpack(y: &[C64]) -> Self {
        MeanFieldState {
            a: y[0],
            s_c: y[1],
            s_h: y[2],
            d_c: y[3].re,
            d_h: y[4].re,
        }
    }
}

/// Right-hand side of the five cumulant equations.
pub fn cumulant_rhs(st: &MeanFieldState, p: &MfParams) -> MeanFieldState {
    let i = C64::new(0.0, 1.0);
    let (a, sc, sh) = (st.a, st.s_c, st.s_h);
    MeanFieldState {
        a: -i * p.g_c * sc.conj() - i * p.g_h * sh,
        s_c: -0.5 * p.gamma_c * sc - i * p.g_c * a.conj() * st.d_c,
        s_h: -0.5 * (p.gamma_h + p.gamma_e) * sh - i * p.g_h * a * st.d_h,
        d_c: (2.0 * i * p.g_c * (a.conj() * sc.conj() - a * sc)).re - p.gamma_c * (st.d_c + 1.0),
        d_h: (2.0 * i * p.g_h * (a * sh.conj() - a.conj() * sh)).re - p.gamma_h * (st.d_h + 1.0),
    }
}

/// Ȧ after adiabatic elimination of both spins.
pub fn adiabatic_rhs_a(a: C64, p: &MfParams) -> C64 {
    let i = a.norm_sqr();
    a * (2.0 * p.kappa_h() / (1.0 + p.s_h() * i) - 2.0 * p.kappa_c() / (1.0 + p.s_c() * i))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Dark,
    Lasing,
    Heating,
    /// Nominally dark but destabilized by fluctuations (γ_h > γ_c, κ_h < κ_c).
    RunawayCorner,
    Boundary,
}

impl Phase {
    pub fn label(self) -> &'static str {
        match self {
            Phase::Dark => "dark",
            Phase::Lasing => "lasing",
            Phase::Heating => "heating",
            Phase::RunawayCorner => "runaway_corner",
            Phase::Boundary => "boundary",
        }
    }
}

fn near(a: f64, b: f64) -> bool {
    (a - b).abs() <= BOUNDARY_RTOL * a.abs().max(b.abs())
}

pub fn classify_phase(p: &MfParams) -> Phase {
    let (kh, kc) = (p.kappa_h(), p.kappa_c());
    if near(kh, kc) || near(p.gamma_h, p.gamma_c) {
        return Phase::Boundary;
    }
    match (kh > kc, p.gamma_h > p.gamma_c) {
        (false, false) => Phase::Dark,
        (true, false) => Phase::Lasing,
        (true, true) => Phase::Heating,
        (false, true) => Phase::RunawayCorner,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "phase", content = "n", rename_all = "snake_case")]
pub enum MfSteady {
    Dark,
    Lasing(f64),
    Heating,
    RunawayCorner,
}

impl MfSteady {
    /// Finite steady occupation, if there is one.
    pub fn mean_phonons(&self) -> Option<f64> {
        match self {
            MfSteady::Dark => Some(0.0),
            MfSteady::Lasing(n) => Some(*n),
            MfSteady::Heating | MfSteady::RunawayCorner => None,
        }
    }
}

/// ⟨n⟩ = γ_cγ_h(γ_c g_h² − (γ_h+γ_e)g_c²) / (8g_c²g_h²(γ_c − γ_h)).
pub fn lasing_occupation(p: &MfParams) -> Result<f64> {
    p.validate()?;
    if near(p.gamma_h, p.gamma_c) {
        return Err(Error::PhaseBoundary("gamma_h equals gamma_c".into()));
    }
    let (gh2, gc2) = (p.g_h * p.g_h, p.g_c * p.g_c);
    if gh2 == 0.0 || gc2 == 0.0 {
        return Err(Error::param("g", "occupation formula needs both couplings"));
    }
    Ok(p.gamma_c * p.gamma_h * (p.gamma_c * gh2 - (p.gamma_h + p.gamma_e) * gc2)
        / (8.0 * gc2 * gh2 * (p.gamma_c - p.gamma_h)))
}

/// Mean-field steady state. At the lasing threshold the occupation is 0.
pub fn steady_n(p: &MfParams) -> Result<MfSteady> {
    p.validate()?;
    if near(p.gamma_h, p.gamma_c) {
        return Err(Error::PhaseBoundary("gamma_h equals gamma_c".into()));
    }
    Ok(match classify_phase(p) {
        Phase::Dark => MfSteady::Dark,
        Phase::Lasing => MfSteady::Lasing(lasing_occupation(p)?),
        Phase::Boundary if p.gamma_h < p.gamma_c => MfSteady::Lasing(lasing_occupation(p)?.max(0.0)),
        Phase::Boundary | Phase::Heating => MfSteady::Heating,
        Phase::RunawayCorner => MfSteady::RunawayCorner,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MfTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<MeanFieldState>,
    /// Set when |A|² crossed the blow-up threshold; the trajectory ends there.
    pub heating: bool,
}

/// Integrate the cumulant equations on a time grid.
pub fn integrate_meanfield(state0: &MeanFieldState, p: &MfParams, t_grid: &[f64]) -> Result<MfTrajectory> {
    p.validate()?;
    state0.check()?;
    let opts = OdeOptions {
        rtol: 1e-10,
        atol: 1e-12,
        ..OdeOptions::default()
    };
    let mut traj = MfTrajectory {
        times: Vec::with_capacity(t_grid.len()),
        states: Vec::with_capacity(t_grid.len()),
        heating: false,
    };
    let mut violation = None;
    dopri5(
        |_t, y: &[C64], dy: &mut [C64]| {
            let d = cumulant_rhs(&MeanFieldState::unpack(y), p);
            dy.copy_from_slice(&d.pack());
        },
        &state0.pack(),
        t_grid,
        &opts,
        |_, t, y| {
            let st = MeanFieldState::unpack(y);
            if let Err(e) = st.check() {
                violation = Some(e);
                return Flow::Stop;
            }
            traj.times.push(t);
            traj.states.push(st);
            if st.intensity() > BLOWUP_INTENSITY {
                traj.heating = true;
                return Flow::Stop;
            }
            Flow::Continue
        },
    )?;
    match violation {
        Some(e) => Err(e),
        None => Ok(traj),
    }
}

/// Integrate the adiabatic amplitude equation; stops at the blow-up threshold.
pub fn integrate_adiabatic(a0: C64, p: &MfParams, t_grid: &[f64]) -> Result<Vec<C64>> {
    p.validate()?;
    let opts = OdeOptions {
        rtol: 1e-10,
        atol: 1e-12,
        ..OdeOptions::default()
    };
    let mut out = Vec::with_capacity(t_grid.len());
    dopri5(
        |_t, y: &[C64], dy: &mut [C64]| dy[0] = adiabatic_rhs_a(y[0], p),
        &[a0],
        t_grid,
        &opts,
        |_, _, y| {
            out.push(y[0]);
            if y[0].norm_sqr() > BLOWUP_INTENSITY {
                Flow::Stop
            } else {
                Flow::Continue
            }
        },
    )?;
    Ok(out)
}

/// Heisenberg-Langevin phase diffusion 2D_ΘΘ of one ion, rad²/ms:
///
/// (2g²/(γ+γ_e) + 8g⁴I/(γ(γ+γ_e)²)) / (I(1 + 8g²I/(γ(γ+γ_e))))
pub fn hl_phase_diffusion(g: f64, gamma: f64, gamma_e: f64, intensity: f64) -> Result<f64> {
    if !(intensity > 0.0 && intensity.is_finite()) {
        return Err(Error::param("intensity", "must be positive"));
    }
    if !(gamma > 0.0 && gamma_e >= 0.0) {
        return Err(Error::param("gamma", "decay must be positive and dephasing non-negative"));
    }
    let g2 = g * g;
    let ge = gamma + gamma_e;
    let num = 2.0 * g2 / ge + 8.0 * g2 * g2 * intensity / (gamma * ge * ge);
    let den = intensity * (1.0 + 8.0 * g2 * intensity / (gamma * ge));
    Ok(num / den)
}

/// Heating-ion contribution (with dephasing) plus cooling-ion contribution.
pub fn hl_total_diffusion(p: &MfParams, intensity: f64) -> Result<f64> {
    Ok(hl_phase_diffusion(p.g_h, p.gamma_h, p.gamma_e, intensity)?
        + hl_phase_diffusion(p.g_c, p.gamma_c, 0.0, intensity)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference() -> MfParams {
        let gh = crate::models::khz_to_rad_per_ms(4.59);
        let gc = crate::models::khz_to_rad_per_ms(4.24);
        let gamma_h = 1e3 / 15.5;
        MfParams {
            g_h: gh,
            g_c: gc,
            gamma_h,
            gamma_c: 435.0,
            gamma_e: DEPHASING_RATIO * gamma_h,
        }
    }

    #[test]
    fn dark_fixed_point() {
        let d = cumulant_rhs(&MeanFieldState::ground(C64::new(0.0, 0.0)), &reference());
        assert_eq!(d.a, C64::new(0.0, 0.0));
        assert_eq!(d.d_c, 0.0);
        assert_eq!(d.d_h, 0.0);
    }

    #[test]
    fn boundary_flags() {
        let mut p = reference();
        p.gamma_c = p.gamma_h;
        assert_eq!(classify_phase(&p), Phase::Boundary);
        assert!(matches!(steady_n(&p), Err(Error::PhaseBoundary(_))));
    }

    #[test]
    fn occupation_formula_values() {
        let p = reference();
        let n = lasing_occupation(&p).unwrap();
        let n0 = lasing_occupation(&p.without_dephasing()).unwrap();
        assert!((n - 4.15).abs() < 0.01, "{n}");
        assert!((n0 - 5.07).abs() < 0.01, "{n0}");
    }
}
