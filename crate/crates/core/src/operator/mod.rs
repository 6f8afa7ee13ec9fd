//! Dense and sparse operators on truncated Fock and spin spaces.
//!
//! Dense operators are stored row-major. Every module in the crate relies on
//! that layout when it indexes raw buffers.

mod fock;
mod layout;
mod sparse;
mod spin;

use std::ops::{Add, Mul, Sub};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::C64;

pub use fock::{coherent_state, create, destroy, displacement, fock_state, number};
pub use layout::{embed, embed_product, Slot, SpaceLayout};
pub use sparse::{SparseOperator, TripletBuilder};
pub use spin::{spin_op, SpinKind};

/// Square complex matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Operator {
    dim: usize,
    data: Vec<C64>,
}

impl Operator {
    pub fn zeros(dim: usize) -> Self {
        Operator {
            dim,
            data: vec![C64::new(0.0, 0.0); dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut op = Self::zeros(dim);
        for i in 0..dim {
            op.data[i * dim + i] = C64::new(1.0, 0.0);
        }
        op
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(dim * dim);
        for r in 0..dim {
            for c in 0..dim {
                data.push(f(r, c));
            }
        }
        Operator { dim, data }
    }

    pub fn from_row_major(dim: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                found: data.len(),
            });
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidParameter {
                field: "entries".into(),
                reason: "non-finite matrix entry".into(),
            });
        }
        Ok(Operator { dim, data })
    }

    /// Diagonal operator with the given real entries.
    pub fn diagonal(values: &[f64]) -> Self {
        let mut op = Self::zeros(values.len());
        for (i, v) in values.iter().enumerate() {
            op.data[i * values.len() + i] = C64::new(*v, 0.0);
        }
        op
    }

    /// Outer product |ket⟩⟨bra|.
    pub fn outer(ket: &[C64], bra: &[C64]) -> Result<Self> {
        if ket.len() != bra.len() {
            return Err(Error::DimensionMismatch {
                expected: ket.len(),
                found: bra.len(),
            });
        }
        Ok(Self::from_fn(ket.len(), |r, c| ket[r] * bra[c].conj()))
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.data[row * self.dim + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: C64) {
        self.data[row * self.dim + col] = value;
    }

    #[inline]
    pub fn add_at(&mut self, row: usize, col: usize, value: C64) {
        self.data[row * self.dim + col] += value;
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<C64> {
        self.data
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.dim, |r, c| self.get(c, r).conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.dim, |r, c| self.get(c, r))
    }

    pub fn scale(&self, s: C64) -> Self {
        Operator {
            dim: self.dim,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn scale_real(&self, s: f64) -> Self {
        self.scale(C64::new(s, 0.0))
    }

    fn check_same_dim(&self, other: &Operator) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: other.dim,
            });
        }
        Ok(())
    }

    pub fn try_add(&self, other: &Operator) -> Result<Self> {
        self.check_same_dim(other)?;
        Ok(Operator {
            dim: self.dim,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn try_sub(&self, other: &Operator) -> Result<Self> {
        self.check_same_dim(other)?;
        Ok(Operator {
            dim: self.dim,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        })
    }

    /// Matrix product; zero entries of `self` are skipped, so products with
    /// sparse structure stay cheap.
    pub fn try_matmul(&self, other: &Operator) -> Result<Self> {
        self.check_same_dim(other)?;
        let d = self.dim;
        let mut out = vec![C64::new(0.0, 0.0); d * d];
        for r in 0..d {
            let out_row = &mut out[r * d..(r + 1) * d];
            for k in 0..d {
                let a = self.data[r * d + k];
                if a.re == 0.0 && a.im == 0.0 {
                    continue;
                }
                let b_row = &other.data[k * d..(k + 1) * d];
                for (o, b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        Ok(Operator { dim: d, data: out })
    }

    pub fn commutator(&self, other: &Operator) -> Result<Self> {
        self.try_matmul(other)?.try_sub(&other.try_matmul(self)?)
    }

    pub fn anticommutator(&self, other: &Operator) -> Result<Self> {
        self.try_matmul(other)?.try_add(&other.try_matmul(self)?)
    }

    /// Kronecker product `self ⊗ other`; `self` indexes the slow (outer) digit.
    pub fn kron(&self, other: &Operator) -> Self {
        let (da, db) = (self.dim, other.dim);
        let d = da * db;
        let mut out = Operator::zeros(d);
        for ra in 0..da {
            for ca in 0..da {
                let a = self.get(ra, ca);
                if a.re == 0.0 && a.im == 0.0 {
                    continue;
                }
                for rb in 0..db {
                    for cb in 0..db {
                        out.data[(ra * db + rb) * d + ca * db + cb] = a * other.get(rb, cb);
                    }
                }
            }
        }
        out
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    pub fn apply(&self, v: &[C64]) -> Result<Vec<C64>> {
        if v.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: v.len(),
            });
        }
        Ok((0..self.dim)
            .map(|r| {
                self.data[r * self.dim..(r + 1) * self.dim]
                    .iter()
                    .zip(v)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect())
    }

    /// Largest elementwise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &Operator) -> f64 {
        assert_eq!(self.dim, other.dim, "operator dimensions differ");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        let d = self.dim;
        (0..d).all(|r| (r..d).all(|c| (self.get(r, c) - self.get(c, r).conj()).norm() <= tol))
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|z| z.re == 0.0 && z.im == 0.0)
    }

    /// Block of rows and columns `start..start+len`.
    pub fn sub_block(&self, start: usize, len: usize) -> Operator {
        Operator::from_fn(len, |r, c| self.get(start + r, start + c))
    }

    pub fn to_sparse(&self) -> SparseOperator {
        SparseOperator::from_dense(self)
    }

    pub fn to_nalgebra(&self) -> DMatrix<C64> {
        DMatrix::from_fn(self.dim, self.dim, |r, c| self.get(r, c))
    }

    pub fn from_nalgebra(m: &DMatrix<C64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::InvalidDimension(format!(
                "{}x{} matrix is not square",
                m.nrows(),
                m.ncols()
            )));
        }
        Ok(Self::from_fn(m.nrows(), |r, c| m[(r, c)]))
    }

    pub fn spectral_norm(&self) -> f64 {
        let s = self.to_nalgebra().singular_values();
        s.iter().cloned().fold(0.0, f64::max)
    }
}

impl Add for &Operator {
    type Output = Operator;
    fn add(self, rhs: &Operator) -> Operator {
        self.try_add(rhs).expect("operator dimensions differ")
    }
}

impl Sub for &Operator {
    type Output = Operator;
    fn sub(self, rhs: &Operator) -> Operator {
        self.try_sub(rhs).expect("operator dimensions differ")
    }
}

impl Mul for &Operator {
    type Output = Operator;
    fn mul(self, rhs: &Operator) -> Operator {
        self.try_matmul(rhs).expect("operator dimensions differ")
    }
}

impl Mul<C64> for &Operator {
    type Output = Operator;
    fn mul(self, rhs: C64) -> Operator {
        self.scale(rhs)
    }
}

impl Mul<f64> for &Operator {
    type Output = Operator;
    fn mul(self, rhs: f64) -> Operator {
        self.scale_real(rhs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn kron_orders_outer_factor_slowest() {
        let a = Operator::diagonal(&[1.0, 2.0]);
        let b = Operator::from_fn(2, |r, c_| if r == 0 && c_ == 1 { c(1.0, 0.0) } else { c(0.0, 0.0) });
        let k = a.kron(&b);
        assert_eq!(k.get(0, 1), c(1.0, 0.0));
        assert_eq!(k.get(2, 3), c(2.0, 0.0));
        assert_eq!(k.get(0, 3), c(0.0, 0.0));
    }

    #[test]
    fn matmul_rejects_mismatched_dims() {
        let a = Operator::identity(2);
        let b = Operator::identity(3);
        assert!(matches!(a.try_matmul(&b), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn from_row_major_rejects_nan() {
        let data = vec![c(f64::NAN, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)];
        assert!(Operator::from_row_major(2, data).is_err());
    }

    #[test]
    fn adjoint_of_product_reverses_order() {
        let a = Operator::from_fn(3, |r, cc| c(r as f64 + 0.5, cc as f64 - 1.0));
        let b = Operator::from_fn(3, |r, cc| c((r * cc) as f64, 0.25 * r as f64));
        let lhs = (&a * &b).adjoint();
        let rhs = &b.adjoint() * &a.adjoint();
        assert!(lhs.max_abs_diff(&rhs) < 1e-14);
    }
}
