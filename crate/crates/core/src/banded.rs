//! Banded LU factorization with partial pivoting for complex systems.
//!
//! Rows are stored in windows `[i - kl, i + kl + ku]` so that the fill created
//! by row interchanges stays inside the band. Multipliers are kept in place and
//! the interchanges are replayed during the forward solve.

use crate::error::{Error, Result};
use crate::C64;

#[derive(Clone, Debug)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<C64>,
    pivots: Vec<usize>,
    min_pivot: f64,
    max_entry: f64,
}

/// Lower and upper bandwidth of a set of entries.
pub fn bandwidth(entries: impl Iterator<Item = (usize, usize)>) -> (usize, usize) {
    let mut kl = 0;
    let mut ku = 0;
    for (r, c) in entries {
        if r > c {
            kl = kl.max(r - c);
        } else {
            ku = ku.max(c - r);
        }
    }
    (kl, ku)
}

impl BandedLu {
    /// Factor the `n × n` matrix given by `entries`. Duplicates are summed.
    /// Entries outside the declared band are an error.
    pub fn factor(
        n: usize,
        kl: usize,
        ku: usize,
        entries: impl IntoIterator<Item = (usize, usize, C64)>,
    ) -> Result<Self> {
        let width = 2 * kl + ku + 1;
        let mut data = vec![C64::new(0.0, 0.0); n * width];
        let mut max_entry: f64 = 0.0;
        for (r, c, v) in entries {
            if r >= n || c >= n || c + kl < r || c > r + ku {
                return Err(Error::InvalidDimension(format!(
                    "entry ({r}, {c}) outside band (kl={kl}, ku={ku}, n={n})"
                )));
            }
            data[r * width + (c + kl - r)] += v;
        }
        for v in &data {
            max_entry = max_entry.max(v.norm());
        }
        let mut lu = BandedLu {
            n,
            kl,
            ku,
            width,
            data,
            pivots: vec![0; n],
            min_pivot: f64::INFINITY,
            max_entry,
        };
        lu.eliminate()?;
        Ok(lu)
    }

    #[inline]
    fn at(&self, r: usize, c: usize) -> usize {
        r * self.width + (c + self.kl - r)
    }

    fn eliminate(&mut self) -> Result<()> {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        let tiny = self.max_entry * 1e-14;
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let last_col = (k + kl + ku).min(n - 1);
            let mut p = k;
            let mut best = self.data[self.at(k, k)].norm();
            for r in k + 1..=last_row {
                let v = self.data[self.at(r, k)].norm();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            self.min_pivot = self.min_pivot.min(best);
            if best <= tiny || best == 0.0 {
                return Err(Error::Singular(format!(
                    "zero pivot at row {k} of {n} (|pivot| = {best:.3e})"
                )));
            }
            self.pivots[k] = p;
            if p != k {
                for c in k..=last_col {
                    let (ik, ip) = (self.at(k, c), self.at(p, c));
                    self.data.swap(ik, ip);
                }
            }
            let pivot = self.data[self.at(k, k)];
            let span = last_col - k;
            let k_start = self.at(k, k + 1);
            for r in k + 1..=last_row {
                let irk = self.at(r, k);
                let m = self.data[irk] / pivot;
                self.data[irk] = m;
                if m.re == 0.0 && m.im == 0.0 {
                    continue;
                }
                let r_start = self.at(r, k + 1);
                // Rows r and k are disjoint windows, so split borrows are safe.
                let (head, tail) = self.data.split_at_mut(r_start);
                let pivot_row = &head[k_start..k_start + span];
                for (dst, src) in tail[..span].iter_mut().zip(pivot_row) {
                    *dst -= m * src;
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Smallest pivot modulus relative to the largest input entry.
    pub fn pivot_ratio(&self) -> f64 {
        if self.max_entry == 0.0 {
            0.0
        } else {
            self.min_pivot / self.max_entry
        }
    }

    pub fn solve_in_place(&self, b: &mut [C64]) {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        assert_eq!(b.len(), n, "right-hand side length");
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                b.swap(k, p);
            }
            let bk = b[k];
            if bk.re == 0.0 && bk.im == 0.0 {
                continue;
            }
            for r in k + 1..=(k + kl).min(n - 1) {
                b[r] -= self.data[self.at(r, k)] * bk;
            }
        }
        for k in (0..n).rev() {
            let last = (k + kl + ku).min(n - 1);
            let start = self.at(k, k);
            let row = &self.data[start..start + (last - k) + 1];
            let mut s = b[k];
            for (j, u) in row.iter().enumerate().skip(1) {
                s -= u * b[k + j];
            }
            b[k] = s / row[0];
        }
    }

    pub fn solve(&self, b: &[C64]) -> Vec<C64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn pseudo(seed: &mut u64) -> f64 {
        *seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((*seed >> 11) as f64) / ((1u64 << 53) as f64) - 0.5
    }

    #[test]
    fn matches_dense_solve_with_pivoting() {
        let n: usize = 40;
        let (kl, ku) = (3, 5);
        let mut seed = 7u64;
        let mut entries = Vec::new();
        for r in 0..n {
            for cc in r.saturating_sub(kl)..=(r + ku).min(n - 1) {
                // Weak diagonal forces row interchanges.
                let scale = if r == cc { 0.01 } else { 1.0 };
                entries.push((r, cc, c(scale * pseudo(&mut seed), scale * pseudo(&mut seed))));
            }
        }
        let lu = BandedLu::factor(n, kl, ku, entries.clone()).unwrap();
        let b: Vec<C64> = (0..n).map(|k| c(k as f64, 1.0 - k as f64 * 0.1)).collect();
        let x = lu.solve(&b);

        let mut dense = DMatrix::<C64>::zeros(n, n);
        for (r, cc, v) in entries {
            dense[(r, cc)] += v;
        }
        let xd = dense.clone().lu().solve(&DVector::from_vec(b.clone())).unwrap();
        for k in 0..n {
            assert!((x[k] - xd[k]).norm() < 1e-9 * xd.norm(), "k={k}");
        }
    }

    #[test]
    fn singular_matrix_is_reported() {
        let entries = vec![(0, 0, c(1.0, 0.0)), (0, 1, c(2.0, 0.0)), (1, 0, c(2.0, 0.0)), (1, 1, c(4.0, 0.0))];
        assert!(matches!(BandedLu::factor(2, 1, 1, entries), Err(Error::Singular(_))));
    }

    #[test]
    fn out_of_band_entry_rejected() {
        let entries = vec![(0, 3, c(1.0, 0.0))];
        assert!(BandedLu::factor(4, 1, 1, entries).is_err());
    }

    #[test]
    fn bandwidth_of_entries() {
        assert_eq!(bandwidth([(0, 0), (3, 1), (1, 5)].into_iter()), (2, 4));
    }
}
