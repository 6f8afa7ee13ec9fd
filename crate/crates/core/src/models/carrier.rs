use crate::error::{Error, Result};
use crate::special::laguerre;

/// Carrier excitation probability of the cooling ion for a phonon
/// distribution `pn`, using the Debye-Waller reduced Rabi frequencies
/// Ω_n = Ω₀ e^{−η²/2} L_n(η²).
pub fn carrier_signal(pn: &[f64], omega0: f64, eta: f64, t_grid: &[f64]) -> Result<Vec<f64>> {
    let total: f64 = pn.iter().sum();
    if pn.iter().any(|p| !p.is_finite() || *p < -1e-12) || (total - 1.0).abs() > 1e-6 {
        return Err(Error::param("pn", format!("phonon distribution must be normalized, sum = {total}")));
    }
    if !(0.0..1.0).contains(&eta) {
        return Err(Error::param("eta", format!("Lamb-Dicke parameter must be in [0, 1), got {eta}")));
    }
    let x = eta * eta;
    let dw = (-x / 2.0).exp();
    let rabi: Vec<f64> = (0..pn.len()).map(|n| omega0 * dw * laguerre(n, 0.0, x)).collect();
    Ok(t_grid
        .iter()
        .map(|t| {
            pn.iter()
                .zip(&rabi)
                .map(|(p, w)| p * (w * t / 2.0).sin().powi(2))
                .sum()
        })
        .collect())
}
