use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::{destroy, Operator};
use crate::special::laguerre;
use crate::C64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LdOrder {
    First,
    Full,
}

/// Lowering operator for a red-sideband coupling including Lamb-Dicke
/// nonlinearity.
///
/// With `Full`, the element is the sideband matrix element of e^{iη(a+a†)}
/// divided by η, so that the coupling constant g = ηΩ is kept outside:
///
/// ⟨n|A|n+1⟩ = e^{-η²/2} L_n^1(η²) / √(n+1)
///
/// This equals √(n+1) at η = 0. `First` returns the plain annihilation
/// operator for any η.
pub fn lamb_dicke_matrix_elements(eta: f64, n: usize, order: LdOrder) -> Result<Operator> {
    if !(0.0..1.0).contains(&eta) {
        return Err(Error::param("eta", format!("Lamb-Dicke parameter must be in [0, 1), got {eta}")));
    }
    let mut a = destroy(n)?;
    if order == LdOrder::Full {
        let x = eta * eta;
        let dw = (-x / 2.0).exp();
        for k in 0..n - 1 {
            let v = dw * laguerre(k, 1.0, x) / ((k + 1) as f64).sqrt();
            a.set(k, k + 1, C64::new(v, 0.0));
        }
    }
    Ok(a)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_eta_full_is_plain_destroy() {
        let a = lamb_dicke_matrix_elements(0.0, 12, LdOrder::Full).unwrap();
        assert!(a.max_abs_diff(&destroy(12).unwrap()) < 1e-14);
    }

    #[test]
    fn first_order_ignores_eta() {
        let a = lamb_dicke_matrix_elements(0.3, 8, LdOrder::First).unwrap();
        let b = lamb_dicke_matrix_elements(0.05, 8, LdOrder::First).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn full_element_is_reduced_at_n10() {
        let eta: f64 = 0.15;
        let full = lamb_dicke_matrix_elements(eta, 20, LdOrder::Full).unwrap();
        let first = destroy(20).unwrap();
        // L_10^1(x) = Σ_k (-1)^k C(11, 10-k) x^k / k!
        let x = eta * eta;
        let choose = |n: u64, k: u64| (1..=k).fold(1.0, |acc, i| acc * (n - k + i) as f64 / i as f64);
        let l: f64 = (0..=10u64)
            .map(|k| {
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                let fact: f64 = (1..=k).map(|v| v as f64).product();
                sign * choose(11, 10 - k) * x.powi(k as i32) / fact
            })
            .sum();
        let expected = (-x / 2.0).exp() * l / 11f64.sqrt();
        assert!((full.get(10, 11).re - expected).abs() < 1e-12);
        assert!(full.get(10, 11).re / first.get(10, 11).re < 1.0);
    }

    #[test]
    fn eta_out_of_range_rejected() {
        assert!(lamb_dicke_matrix_elements(1.0, 5, LdOrder::Full).is_err());
        assert!(lamb_dicke_matrix_elements(-0.1, 5, LdOrder::Full).is_err());
    }
}
