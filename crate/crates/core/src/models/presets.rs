use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::rates::EFFECTIVE_DECAY_TIME_US;
use crate::models::{khz_to_rad_per_ms, FourLevelParams, SystemSpec, TickleParams};

/// Calibrated experimental parameter sets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// Heating-ion settings of the phase-diagram sweep; cooling ion unset.
    Diagram,
    /// Strong cooling, dark state (1/γ_c ≈ 2.3 µs slice).
    Dark,
    /// Just above threshold on the same slice.
    NearThreshold,
    /// Lasing on the same slice.
    Lasing,
    /// Slow cooling-ion decay, heating region.
    Heating,
    /// Heating-ion settings of the κ_c scan; cooling ion unset.
    Scan,
    /// Lasing point used for phase locking and phase diffusion.
    Reference,
}

struct Row {
    g_h_khz: f64,
    g_c_khz: f64,
    gamma_h1: f64,
    gamma_h2: f64,
    gamma_c: f64,
}

/// Tickle strength used for phase locking, kHz.
pub const TICKLE_KHZ: f64 = 0.1;

impl Preset {
    pub const ALL: [Preset; 7] = [
        Preset::Diagram,
        Preset::Dark,
        Preset::NearThreshold,
        Preset::Lasing,
        Preset::Heating,
        Preset::Scan,
        Preset::Reference,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Diagram => "diagram",
            Preset::Dark => "dark",
            Preset::NearThreshold => "near-threshold",
            Preset::Lasing => "lasing",
            Preset::Heating => "heating",
            Preset::Scan => "scan",
            Preset::Reference => "reference",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == name)
            .ok_or_else(|| Error::param("preset", format!("unknown preset `{name}`")))
    }

    // 6.28 kHz is a measured coupling, not 2π.
    #[allow(clippy::approx_constant)]
    fn row(self) -> Row {
        let r = |g_h_khz, g_c_khz, gamma_h1, gamma_h2, gamma_c| Row {
            g_h_khz,
            g_c_khz,
            gamma_h1,
            gamma_h2,
            gamma_c,
        };
        match self {
            Preset::Diagram => r(4.55, 0.0, 91.0, 435.0, 0.0),
            Preset::Dark => r(4.65, 12.0, 96.0, 435.0, 426.0),
            Preset::NearThreshold => r(4.62, 6.28, 91.0, 385.0, 429.0),
            Preset::Lasing => r(4.65, 4.29, 96.0, 435.0, 426.0),
            Preset::Heating => r(4.57, 2.11, 93.0, 385.0, 50.0),
            Preset::Scan => r(4.63, 0.0, 93.0, 435.0, 0.0),
            Preset::Reference => r(4.59, 4.24, 91.0, 344.0, 435.0),
        }
    }

    /// Repumping rates 1/τ₁, 1/τ₂ in 1/ms.
    pub fn repump_rates(self) -> (f64, f64) {
        let r = self.row();
        (r.gamma_h1, r.gamma_h2)
    }

    /// 4-level model of this parameter set, heating ion with the full
    /// Lamb-Dicke sideband and cooling ion to first order.
    pub fn spec(self, fock_cutoff: usize) -> Result<SystemSpec> {
        let r = self.row();
        Ok(SystemSpec {
            g_h: khz_to_rad_per_ms(r.g_h_khz),
            g_c: khz_to_rad_per_ms(r.g_c_khz),
            gamma_h: effective_gamma_h_per_ms(),
            gamma_c: r.gamma_c,
            gamma_e: 0.0,
            be_levels: 4,
            four_level: Some(FourLevelParams::calibrated(r.gamma_h1, r.gamma_h2)?),
            tickle: None,
            nonlinear_ld: true,
            fock_cutoff,
            ..SystemSpec::default()
        })
    }

    /// Phase-locking drive at this parameter set.
    pub fn tickle(phase: f64) -> TickleParams {
        TickleParams {
            g_t: khz_to_rad_per_ms(TICKLE_KHZ),
            phase,
            enabled: true,
        }
    }
}

/// 1/15.5 µs expressed in 1/ms.
pub fn effective_gamma_h_per_ms() -> f64 {
    1e3 / EFFECTIVE_DECAY_TIME_US
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for p in Preset::ALL {
            assert_eq!(Preset::from_name(p.name()).unwrap(), p);
        }
        assert!(Preset::from_name("nope").is_err());
    }

    #[test]
    fn presets_validate() {
        for p in Preset::ALL {
            p.spec(10).unwrap().validate().unwrap();
        }
    }
}
