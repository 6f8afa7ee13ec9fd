//! Special functions used by the Fock-space matrix elements.

/// ln(n!) by direct summation; exact enough for the cutoffs used here (n ≲ 500).
pub fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

/// Table of ln(k!) for k = 0..len.
pub fn ln_factorial_table(len: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(len);
    let mut acc = 0.0;
    for k in 0..len {
        if k > 1 {
            acc += (k as f64).ln();
        }
        out.push(acc);
    }
    out
}

/// Generalized Laguerre polynomials L_j^{(alpha)}(x) for j = 0..count.
pub fn laguerre_sequence(count: usize, alpha: f64, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(count);
    if count == 0 {
        return out;
    }
    out.push(1.0);
    if count == 1 {
        return out;
    }
    out.push(1.0 + alpha - x);
    for j in 1..count - 1 {
        let jf = j as f64;
        let next = ((2.0 * jf + 1.0 + alpha - x) * out[j] - (jf + alpha) * out[j - 1]) / (jf + 1.0);
        out.push(next);
    }
    out
}

/// Single generalized Laguerre polynomial L_n^{(alpha)}(x).
pub fn laguerre(n: usize, alpha: f64, x: f64) -> f64 {
    *laguerre_sequence(n + 1, alpha, x).last().unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn binom(n: f64, k: usize) -> f64 {
        (0..k).fold(1.0, |acc, i| acc * (n - i as f64) / (i as f64 + 1.0))
    }

    // Explicit finite sum: L_n^a(x) = Σ_k (-1)^k C(n+a, n-k) x^k / k!
    fn laguerre_sum(n: usize, a: f64, x: f64) -> f64 {
        (0..=n)
            .map(|k| {
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                sign * binom(n as f64 + a, n - k) * x.powi(k as i32) / (1..=k).map(|v| v as f64).product::<f64>()
            })
            .sum()
    }

    #[test]
    fn recurrence_matches_explicit_sum() {
        for &(n, a, x) in &[(0, 0.0, 0.3), (3, 1.0, 0.0225), (10, 1.0, 0.0225), (7, 4.0, 2.5), (12, 0.0, 0.9)] {
            let r = laguerre(n, a, x);
            let s = laguerre_sum(n, a, x);
            assert!((r - s).abs() < 1e-10 * s.abs().max(1.0), "n={n} a={a} x={x}: {r} vs {s}");
        }
    }

    #[test]
    fn ln_factorial_small_values() {
        assert_eq!(ln_factorial(0), 0.0);
        assert_eq!(ln_factorial(1), 0.0);
        assert!((ln_factorial(5) - 120f64.ln()).abs() < 1e-13);
        let t = ln_factorial_table(8);
        assert!((t[7] - 5040f64.ln()).abs() < 1e-12);
    }
}
