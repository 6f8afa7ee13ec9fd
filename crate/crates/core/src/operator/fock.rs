use crate::error::{Error, Result};
use crate::operator::Operator;
use crate::special::{laguerre_sequence, ln_factorial_table};
use crate::C64;

fn check_cutoff(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::InvalidDimension(format!(
            "Fock cutoff must be at least 2, got {n}"
        )));
    }
    Ok(())
}

/// Truncated annihilation operator: ⟨n-1|a|n⟩ = √n.
pub fn destroy(n: usize) -> Result<Operator> {
    check_cutoff(n)?;
    let mut a = Operator::zeros(n);
    for k in 1..n {
        a.set(k - 1, k, C64::new((k as f64).sqrt(), 0.0));
    }
    Ok(a)
}

pub fn create(n: usize) -> Result<Operator> {
    Ok(destroy(n)?.adjoint())
}

/// diag(0, 1, ..., N-1).
pub fn number(n: usize) -> Result<Operator> {
    check_cutoff(n)?;
    Ok(Operator::diagonal(&(0..n).map(|k| k as f64).collect::<Vec<_>>()))
}

pub fn fock_state(k: usize, n: usize) -> Result<Vec<C64>> {
    check_cutoff(n)?;
    if k >= n {
        return Err(Error::IndexOutOfRange(format!("Fock level {k} >= cutoff {n}")));
    }
    let mut v = vec![C64::new(0.0, 0.0); n];
    v[k] = C64::new(1.0, 0.0);
    Ok(v)
}

/// Coherent state amplitudes on the truncated space, renormalized to unit norm.
pub fn coherent_state(alpha: C64, n: usize) -> Result<Vec<C64>> {
    check_cutoff(n)?;
    let mut v = Vec::with_capacity(n);
    let mut c = C64::new((-alpha.norm_sqr() / 2.0).exp(), 0.0);
    v.push(c);
    for k in 1..n {
        c = c * alpha / (k as f64).sqrt();
        v.push(c);
    }
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    for z in &mut v {
        *z /= norm;
    }
    Ok(v)
}

/// Displacement operator D(β) on the N-level truncation, built entry by entry
/// from the closed-form Fock matrix elements
///
/// ⟨m|D(β)|n⟩ = √(n!/m!) β^(m-n) e^(-|β|²/2) L_n^(m-n)(|β|²),   m ≥ n,
///
/// with the m < n half obtained from ⟨m|D(β)|n⟩ = ⟨n|D(-β)|m⟩*.
/// The entries are exact; only products of truncated matrices lose accuracy.
pub fn displacement(beta: C64, n: usize) -> Result<Operator> {
    check_cutoff(n)?;
    if !beta.re.is_finite() || !beta.im.is_finite() {
        return Err(Error::param("beta", "non-finite displacement"));
    }
    if beta.norm() == 0.0 {
        return Ok(Operator::identity(n));
    }
    let x = beta.norm_sqr();
    let ln_abs = beta.norm().ln();
    let theta = beta.arg();
    let lnf = ln_factorial_table(n);
    let mut d = Operator::zeros(n);
    for k in 0..n {
        let lag = laguerre_sequence(n - k, k as f64, x);
        let lower_phase = C64::from_polar(1.0, k as f64 * theta);
        // (-β*)^k / |β|^k
        let upper_phase = C64::from_polar(if k % 2 == 0 { 1.0 } else { -1.0 }, -(k as f64) * theta);
        for (j, l) in lag.iter().enumerate() {
            let m = j + k;
            let mag = (0.5 * (lnf[j] - lnf[m]) + k as f64 * ln_abs - 0.5 * x).exp() * l;
            d.set(m, j, lower_phase * mag);
            if k > 0 {
                d.set(j, m, upper_phase * mag);
            }
        }
    }
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn destroy_smallest_truncation() {
        let a = destroy(2).unwrap();
        assert_eq!(a.get(0, 1), C64::new(1.0, 0.0));
        assert_eq!(a.get(0, 0), C64::new(0.0, 0.0));
        assert_eq!(a.get(1, 0), C64::new(0.0, 0.0));
        assert_eq!(a.get(1, 1), C64::new(0.0, 0.0));
    }

    #[test]
    fn destroy_rejects_tiny_cutoff() {
        assert!(matches!(destroy(1), Err(Error::InvalidDimension(_))));
        assert!(displacement(C64::new(0.1, 0.0), 0).is_err());
    }

    #[test]
    fn number_operator_from_ladder() {
        let a = destroy(4).unwrap();
        let n = &a.adjoint() * &a;
        assert!(n.max_abs_diff(&Operator::diagonal(&[0.0, 1.0, 2.0, 3.0])) < 1e-15);
    }

    #[test]
    fn truncated_commutator_has_corner_defect() {
        let n = 7;
        let a = destroy(n).unwrap();
        let comm = a.commutator(&a.adjoint()).unwrap();
        let mut expected = Operator::identity(n);
        expected.set(n - 1, n - 1, C64::new(1.0 - n as f64, 0.0));
        assert!(comm.max_abs_diff(&expected) < 1e-13);
    }

    #[test]
    fn displacement_at_zero_is_identity() {
        let d = displacement(C64::new(0.0, 0.0), 5).unwrap();
        assert_eq!(d, Operator::identity(5));
    }

    #[test]
    fn vacuum_overlap() {
        let beta = C64::new(0.4, -0.7);
        let d = displacement(beta, 12).unwrap();
        let expected = (-beta.norm_sqr() / 2.0).exp();
        assert!((d.get(0, 0) - C64::new(expected, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn displacement_column_is_coherent_state() {
        let beta = C64::new(0.8, 0.3);
        let n = 40;
        let d = displacement(beta, n).unwrap();
        let coh = coherent_state(beta, n).unwrap();
        for k in 0..n {
            assert!((d.get(k, 0) - coh[k]).norm() < 1e-12);
        }
    }

    #[test]
    fn displacement_inverse_on_safe_block() {
        let n = 60;
        for beta in [C64::new(1.0, 0.0), C64::new(0.3, 0.6), C64::new(-0.5, -0.5)] {
            let d = displacement(beta, n).unwrap();
            let dm = displacement(-beta, n).unwrap();
            let prod = &d * &dm;
            let safe = n - (4.0 * beta.norm() * (n as f64).sqrt()).ceil() as usize;
            let block = prod.sub_block(0, safe);
            assert!(
                block.max_abs_diff(&Operator::identity(safe)) < 1e-8,
                "beta={beta}"
            );
            // D(β)† = D(-β) holds entrywise for the closed-form elements.
            assert!(d.adjoint().sub_block(0, safe).max_abs_diff(&dm.sub_block(0, safe)) < 1e-12);
        }
    }
}
