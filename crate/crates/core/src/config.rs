//! TOML run configuration.
//!
//! Couplings are written as g/2π in kHz and converted to rad/ms on
//! resolution; decay rates are in 1/ms; times carry their unit in the key.
//! Unknown keys are rejected.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lindblad::{EvolveOptions, Integrator};
use crate::models::presets::Preset;
use crate::models::{khz_to_rad_per_ms, FourLevelParams, SystemSpec, TickleParams};
use crate::models::presets::effective_gamma_h_per_ms;

pub const MAX_FOCK_CUTOFF: usize = 200;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Steady,
    Evolve,
    Sweep,
    Charfun,
    Diffusion,
    CalibrateDecay,
    Carrier,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Steady => "steady",
            Task::Evolve => "evolve",
            Task::Sweep => "sweep",
            Task::Charfun => "charfun",
            Task::Diffusion => "diffusion",
            Task::CalibrateDecay => "calibrate-decay",
            Task::Carrier => "carrier",
        }
    }
}

/// Heating-ion description.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    /// Engineered-decay ion with both repumpers.
    #[default]
    FourLevel,
    /// Two-level ion with the effective decay only.
    TwoLevel,
    /// Two-level ion plus the dephasing that mimics the extra levels.
    TwoLevelDephased,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub preset: Option<Preset>,
    #[serde(default)]
    pub model: ModelKind,
    pub fock_cutoff: Option<usize>,
    pub g_h_khz: Option<f64>,
    pub g_c_khz: Option<f64>,
    /// Cooling-ion decay, 1/ms.
    pub gamma_c: Option<f64>,
    /// Effective heating-ion decay, 1/ms.
    pub gamma_h: Option<f64>,
    /// Repumping rates [1/τ₁, 1/τ₂], 1/ms.
    pub repump_rates: Option<[f64; 2]>,
    pub tickle_khz: Option<f64>,
    /// Tickle phase, rad.
    pub tickle_phase: Option<f64>,
    pub compensate_light_shift: Option<bool>,
    pub nonlinear_ld: Option<bool>,
}

impl SystemConfig {
    pub fn from_preset(preset: Preset, model: ModelKind, fock_cutoff: usize) -> Self {
        SystemConfig {
            preset: Some(preset),
            model,
            fock_cutoff: Some(fock_cutoff),
            ..SystemConfig::default()
        }
    }

    /// Resolved spec in internal units.
    pub fn resolve(&self) -> Result<SystemSpec> {
        let n = self
            .fock_cutoff
            .ok_or_else(|| Error::param("system.fock_cutoff", "is required"))?;
        if !(2..=MAX_FOCK_CUTOFF).contains(&n) {
            return Err(Error::param("system.fock_cutoff", format!("must be in 2..={MAX_FOCK_CUTOFF}")));
        }
        let mut spec = match self.preset {
            Some(p) => p.spec(n)?,
            None => {
                let need = |v: Option<f64>, f: &str| v.ok_or_else(|| Error::param(f, "is required without a preset"));
                SystemSpec {
                    g_h: khz_to_rad_per_ms(need(self.g_h_khz, "system.g_h_khz")?),
                    g_c: khz_to_rad_per_ms(need(self.g_c_khz, "system.g_c_khz")?),
                    gamma_c: need(self.gamma_c, "system.gamma_c")?,
                    gamma_h: effective_gamma_h_per_ms(),
                    be_levels: 4,
                    four_level: None,
                    nonlinear_ld: true,
                    fock_cutoff: n,
                    ..SystemSpec::default()
                }
            }
        };
        if let Some(v) = self.g_h_khz {
            spec.g_h = khz_to_rad_per_ms(v);
        }
        if let Some(v) = self.g_c_khz {
            spec.g_c = khz_to_rad_per_ms(v);
        }
        if let Some(v) = self.gamma_c {
            spec.gamma_c = v;
        }
        if let Some(v) = self.gamma_h {
            spec.gamma_h = v;
        }
        if let Some([r1, r2]) = self.repump_rates {
            spec.four_level = Some(FourLevelParams::calibrated(r1, r2)?);
        }
        if let Some(v) = self.nonlinear_ld {
            spec.nonlinear_ld = v;
        }
        if let (Some(c), Some(fl)) = (self.compensate_light_shift, spec.four_level.as_mut()) {
            fl.compensate_light_shift = c;
        }
        if let Some(khz) = self.tickle_khz {
            spec.tickle = Some(TickleParams {
                g_t: khz_to_rad_per_ms(khz),
                phase: self.tickle_phase.unwrap_or(0.0),
                enabled: khz > 0.0,
            });
        } else if self.tickle_phase.is_some() {
            return Err(Error::param("system.tickle_phase", "given without tickle_khz"));
        }
        spec = match self.model {
            ModelKind::FourLevel => {
                if spec.four_level.is_none() {
                    return Err(Error::param("system.repump_rates", "the four-level model needs repump rates"));
                }
                spec
            }
            ModelKind::TwoLevel => spec.to_two_level(false),
            ModelKind::TwoLevelDephased => spec.to_two_level(true),
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default = "default_rtol")]
    pub rtol: f64,
    #[serde(default = "default_atol")]
    pub atol: f64,
    #[serde(default)]
    pub integrator: Integrator,
}

fn default_rtol() -> f64 {
    EvolveOptions::default().rtol
}

fn default_atol() -> f64 {
    EvolveOptions::default().atol
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            rtol: default_rtol(),
            atol: default_atol(),
            integrator: Integrator::default(),
        }
    }
}

impl SolverConfig {
    pub fn evolve_options(&self) -> EvolveOptions {
        EvolveOptions {
            rtol: self.rtol,
            atol: self.atol,
            integrator: self.integrator,
            ..EvolveOptions::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.rtol > 0.0 && self.rtol < 1.0) {
            return Err(Error::param("solver.rtol", "must be in (0, 1)"));
        }
        if !(self.atol > 0.0 && self.atol < 1.0) {
            return Err(Error::param("solver.atol", "must be in (0, 1)"));
        }
        Ok(())
    }
}

/// Sweep axis: explicit values or a log-spaced range.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Axis {
    Values(Vec<f64>),
    Log { min: f64, max: f64, points: usize },
}

impl Axis {
    pub fn values(&self, field: &str) -> Result<Vec<f64>> {
        let v = match self {
            Axis::Values(v) => v.clone(),
            Axis::Log { min, max, points } => {
                if !(*min > 0.0 && max > min && *points >= 1) {
                    return Err(Error::param(field, "log axis needs 0 < min < max and points >= 1"));
                }
                if *points == 1 {
                    vec![*min]
                } else {
                    let (a, b) = (min.ln(), max.ln());
                    (0..*points)
                        .map(|k| (a + (b - a) * k as f64 / (*points - 1) as f64).exp())
                        .collect()
                }
            }
        };
        if v.is_empty() {
            return Err(Error::param(field, "must not be empty"));
        }
        if v.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
            return Err(Error::param(field, "values must be positive"));
        }
        Ok(v)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// Rows: 1/κ_c in ms.
    pub inv_kappa_c_ms: Axis,
    /// Columns: 1/γ_c in µs.
    pub inv_gamma_c_us: Axis,
    /// Evolution window for points without a steady state, ms.
    #[serde(default = "default_growth_time")]
    pub growth_time_ms: f64,
}

fn default_growth_time() -> f64 {
    2.0
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            inv_kappa_c_ms: Axis::Log {
                min: 0.02,
                max: 0.6,
                points: 12,
            },
            inv_gamma_c_us: Axis::Log {
                min: 1.0,
                max: 30.0,
                points: 12,
            },
            growth_time_ms: default_growth_time(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolveConfig {
    #[serde(default = "default_evolve_time")]
    pub t_max_ms: f64,
    #[serde(default = "default_points")]
    pub points: usize,
    /// Coherent starting amplitude [re, im]; ground state if absent.
    pub initial_alpha: Option<[f64; 2]>,
}

fn default_evolve_time() -> f64 {
    2.0
}

fn default_points() -> usize {
    41
}

impl Default for EvolveConfig {
    fn default() -> Self {
        EvolveConfig {
            t_max_ms: default_evolve_time(),
            points: default_points(),
            initial_alpha: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CharfunConfig {
    /// β axis angles, degrees.
    #[serde(default = "default_axes")]
    pub axes_deg: Vec<f64>,
    #[serde(default = "default_beta_max")]
    pub beta_max: f64,
    #[serde(default = "default_beta_step")]
    pub beta_step: f64,
    #[serde(default = "default_pad")]
    pub pad_to: f64,
    #[serde(default = "default_x_max")]
    pub x_max: f64,
    #[serde(default = "default_x_points")]
    pub x_points: usize,
    /// Also compute marginals from the Wigner function.
    #[serde(default)]
    pub wigner_check: bool,
}

fn default_axes() -> Vec<f64> {
    vec![0.0, 90.0]
}
fn default_beta_max() -> f64 {
    0.7
}
fn default_beta_step() -> f64 {
    0.02
}
fn default_pad() -> f64 {
    1.0
}
fn default_x_max() -> f64 {
    12.0
}
fn default_x_points() -> usize {
    481
}

impl Default for CharfunConfig {
    fn default() -> Self {
        CharfunConfig {
            axes_deg: default_axes(),
            beta_max: default_beta_max(),
            beta_step: default_beta_step(),
            pad_to: default_pad(),
            x_max: default_x_max(),
            x_points: default_x_points(),
            wigner_check: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiffusionConfig {
    /// Phonon number of the coherent start.
    #[serde(default = "default_intensity")]
    pub intensity: f64,
    #[serde(default = "default_diffusion_time")]
    pub t_max_ms: f64,
    #[serde(default = "default_diffusion_points")]
    pub points: usize,
}

fn default_intensity() -> f64 {
    4.4
}
fn default_diffusion_time() -> f64 {
    1.5
}
fn default_diffusion_points() -> usize {
    16
}

impl Default for DiffusionConfig {
    fn default() -> Self {
        DiffusionConfig {
            intensity: default_intensity(),
            t_max_ms: default_diffusion_time(),
            points: default_diffusion_points(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CarrierConfig {
    /// Carrier Rabi frequency Ω₀/2π, kHz.
    #[serde(default = "default_carrier_khz")]
    pub rabi_khz: f64,
    #[serde(default = "default_carrier_time")]
    pub t_max_us: f64,
    #[serde(default = "default_carrier_points")]
    pub points: usize,
}

fn default_carrier_khz() -> f64 {
    50.0
}
fn default_carrier_time() -> f64 {
    100.0
}
fn default_carrier_points() -> usize {
    201
}

impl Default for CarrierConfig {
    fn default() -> Self {
        CarrierConfig {
            rabi_khz: default_carrier_khz(),
            t_max_us: default_carrier_time(),
            points: default_carrier_points(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub task: Task,
    pub workers: Option<usize>,
    pub system: SystemConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub evolve: EvolveConfig,
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub charfun: CharfunConfig,
    #[serde(default)]
    pub diffusion: DiffusionConfig,
    #[serde(default)]
    pub carrier: CarrierConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

impl RunConfig {
    pub fn new(task: Task, system: SystemConfig) -> Self {
        RunConfig {
            task,
            workers: None,
            system,
            solver: SolverConfig::default(),
            evolve: EvolveConfig::default(),
            sweep: None,
            charfun: CharfunConfig::default(),
            diffusion: DiffusionConfig::default(),
            carrier: CarrierConfig::default(),
            output: OutputConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.system.resolve()?;
        self.solver.validate()?;
        if self.workers == Some(0) {
            return Err(Error::param("workers", "must be at least 1"));
        }
        let pos = |f: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::param(f, "must be positive"))
            }
        };
        pos("evolve.t_max_ms", self.evolve.t_max_ms)?;
        if self.evolve.points < 2 {
            return Err(Error::param("evolve.points", "need at least 2"));
        }
        if self.task == Task::Sweep {
            let s = self.sweep.as_ref().ok_or_else(|| Error::param("sweep", "section is required for a sweep"))?;
            s.inv_kappa_c_ms.values("sweep.inv_kappa_c_ms")?;
            s.inv_gamma_c_us.values("sweep.inv_gamma_c_us")?;
            pos("sweep.growth_time_ms", s.growth_time_ms)?;
        }
        let c = &self.charfun;
        pos("charfun.beta_max", c.beta_max)?;
        pos("charfun.beta_step", c.beta_step)?;
        pos("charfun.x_max", c.x_max)?;
        if c.pad_to < c.beta_max {
            return Err(Error::param("charfun.pad_to", "must cover beta_max"));
        }
        if c.axes_deg.is_empty() || c.x_points < 3 {
            return Err(Error::param("charfun", "need at least one axis and three x points"));
        }
        pos("diffusion.intensity", self.diffusion.intensity)?;
        pos("diffusion.t_max_ms", self.diffusion.t_max_ms)?;
        if self.diffusion.points < 3 {
            return Err(Error::param("diffusion.points", "need at least 3"));
        }
        pos("carrier.rabi_khz", self.carrier.rabi_khz)?;
        pos("carrier.t_max_us", self.carrier.t_max_us)?;
        if self.carrier.points < 2 {
            return Err(Error::param("carrier.points", "need at least 2"));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Configuration(e.to_string()))
    }
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rsplit('\n').next().map(|s| s.chars().count()).unwrap_or(0) + 1;
    (line, col)
}

/// Parse and validate a configuration.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let cfg: RunConfig = toml::from_str(text).map_err(|e| {
        let (line, column) = e.span().map(|s| line_col(text, s.start)).unwrap_or((0, 0));
        Error::Parse {
            line,
            column,
            message: e.message().to_string(),
        }
    })?;
    cfg.validate()?;
    Ok(cfg)
}
