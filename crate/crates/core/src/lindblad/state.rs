use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::{Operator, SpaceLayout};
use crate::C64;

pub const HERMITIAN_TOL: f64 = 1e-10;
pub const TRACE_TOL: f64 = 1e-10;
/// Eigenvalues below this are an error; between it and zero they are floored.
pub const NEGATIVITY_TOL: f64 = 1e-8;
pub const TAIL_WARN: f64 = 1e-3;

/// Hermitian, unit-trace, positive semidefinite state.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    op: Operator,
}

impl DensityMatrix {
    /// Checked constructor.
    pub fn new(op: Operator) -> Result<Self> {
        if !op.is_hermitian(HERMITIAN_TOL) {
            return Err(Error::InvalidState("not Hermitian".into()));
        }
        let tr = op.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::InvalidState(format!("trace {tr} differs from 1")));
        }
        let min = min_eigenvalue(&op);
        if min < -NEGATIVITY_TOL {
            return Err(Error::NotPositive { min_eigenvalue: min });
        }
        Ok(DensityMatrix { op })
    }

    /// Hermitize, normalize and floor slightly negative eigenvalues.
    pub fn repair(op: Operator) -> Result<Self> {
        let mut h = &op + &op.adjoint();
        h = h.scale_real(0.5);
        let tr = h.trace().re;
        if !(tr.is_finite() && tr > 0.0) {
            return Err(Error::InvalidState(format!("trace {tr} is not positive")));
        }
        h = h.scale_real(1.0 / tr);
        let blocks = hermitian_blocks(&h);
        let mut min_eig = f64::INFINITY;
        let mut floored = false;
        let mut out = h.clone();
        for block in &blocks {
            let m = DMatrix::from_fn(block.len(), block.len(), |r, c| h.get(block[r], block[c]));
            let eig = m.symmetric_eigen();
            let bmin = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
            min_eig = min_eig.min(bmin);
            if bmin < 0.0 {
                floored = true;
                let mut vals = eig.eigenvalues.clone();
                for v in vals.iter_mut() {
                    if *v < 0.0 {
                        *v = 0.0;
                    }
                }
                let diag = DMatrix::from_diagonal(&vals.map(|v| C64::new(v, 0.0)));
                let rebuilt = &eig.eigenvectors * diag * eig.eigenvectors.adjoint();
                for r in 0..block.len() {
                    for c in 0..block.len() {
                        out.set(block[r], block[c], rebuilt[(r, c)]);
                    }
                }
            }
        }
        if min_eig < -NEGATIVITY_TOL {
            return Err(Error::NotPositive { min_eigenvalue: min_eig });
        }
        if floored {
            let sym = &out + &out.adjoint();
            out = sym.scale_real(0.5);
            let tr = out.trace().re;
            out = out.scale_real(1.0 / tr);
        }
        Ok(DensityMatrix { op: out })
    }

    /// Wraps an operator that is Hermitian by construction, such as a
    /// Hermitized integrator snapshot. Trace and positivity are not enforced.
    pub(crate) fn hermitized(op: Operator) -> Self {
        DensityMatrix { op }
    }

    pub fn from_pure(ket: &[C64]) -> Result<Self> {
        let norm: f64 = ket.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::InvalidState("zero or non-finite state vector".into()));
        }
        let v: Vec<C64> = ket.iter().map(|z| z / norm).collect();
        Ok(DensityMatrix {
            op: Operator::outer(&v, &v)?,
        })
    }

    /// Product state ρ_motion ⊗ ρ_heating ⊗ ρ_cooling in the fixed ordering.
    pub fn product(motion: &DensityMatrix, heating: &DensityMatrix, cooling: &DensityMatrix) -> Self {
        DensityMatrix {
            op: motion.op.kron(&heating.op).kron(&cooling.op),
        }
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    pub fn as_operator(&self) -> &Operator {
        &self.op
    }

    pub fn into_operator(self) -> Operator {
        self.op
    }

    pub fn min_eigenvalue(&self) -> f64 {
        min_eigenvalue(&self.op)
    }

    /// ½‖ρ − σ‖₁.
    pub fn trace_distance(&self, other: &DensityMatrix) -> Result<f64> {
        let diff = self.op.try_sub(&other.op)?;
        Ok(0.5 * hermitian_eigenvalues(&diff).iter().map(|v| v.abs()).sum::<f64>())
    }

    /// Partial trace over both ions.
    pub fn reduce_to_motion(&self, layout: &SpaceLayout) -> Result<DensityMatrix> {
        if layout.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: layout.dim(),
                found: self.dim(),
            });
        }
        let n = layout.fock_cutoff;
        let m = layout.internal_dim();
        let op = Operator::from_fn(n, |a, b| (0..m).map(|s| self.op.get(a * m + s, b * m + s)).sum());
        Ok(DensityMatrix { op })
    }

    /// Partial trace over the motion and the other ion.
    pub fn reduce_to_internal(&self, layout: &SpaceLayout) -> Result<Operator> {
        if layout.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: layout.dim(),
                found: self.dim(),
            });
        }
        let m = layout.internal_dim();
        Ok(Operator::from_fn(m, |a, b| {
            (0..layout.fock_cutoff).map(|n| self.op.get(n * m + a, n * m + b)).sum()
        }))
    }
}

/// Tr(ρO).
pub fn expectation(rho: &DensityMatrix, o: &Operator) -> Result<C64> {
    let d = rho.dim();
    if o.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: o.dim(),
        });
    }
    let r = rho.op.data();
    let od = o.data();
    let mut s = C64::new(0.0, 0.0);
    for i in 0..d {
        for j in 0..d {
            let ov = od[j * d + i];
            if ov.re != 0.0 || ov.im != 0.0 {
                s += r[i * d + j] * ov;
            }
        }
    }
    Ok(s)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhononDistribution {
    pub p: Vec<f64>,
    /// Population of the highest retained Fock level.
    pub tail_mass: f64,
}

impl PhononDistribution {
    pub fn mean(&self) -> f64 {
        self.p.iter().enumerate().map(|(n, p)| n as f64 * p).sum()
    }

    /// Total-variation distance to Poisson with the same mean.
    pub fn tv_distance_to_poisson(&self) -> f64 {
        let mean = self.mean();
        let mut q = (-mean).exp();
        let mut tv = 0.0;
        let mut covered = 0.0;
        for (n, p) in self.p.iter().enumerate() {
            if n > 0 {
                q *= mean / n as f64;
            }
            covered += q;
            tv += (p - q).abs();
        }
        0.5 * (tv + (1.0 - covered).max(0.0))
    }
}

/// Fock-state populations of the motion.
pub fn phonon_distribution(rho: &DensityMatrix, layout: &SpaceLayout) -> Result<PhononDistribution> {
    let motion = rho.reduce_to_motion(layout)?;
    let p: Vec<f64> = (0..layout.fock_cutoff).map(|n| motion.op.get(n, n).re).collect();
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > 1e-8 {
        return Err(Error::InvalidState(format!("populations sum to {total}")));
    }
    let tail_mass = *p.last().unwrap();
    if tail_mass > TAIL_WARN {
        log::warn!(
            "Fock truncation at N = {} holds {:.2e} of the population in the top level",
            layout.fock_cutoff,
            tail_mass
        );
    }
    Ok(PhononDistribution { p, tail_mass })
}

/// Groups of indices connected by nonzero entries. Hermitian matrices with
/// this structure are block diagonal after permutation.
fn hermitian_blocks(op: &Operator) -> Vec<Vec<usize>> {
    let d = op.dim();
    let mut parent: Vec<usize> = (0..d).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for i in 0..d {
        for j in i + 1..d {
            if op.get(i, j).norm() > 0.0 || op.get(j, i).norm() > 0.0 {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a] = b;
                }
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for i in 0..d {
        let r = find(&mut parent, i);
        groups.entry(r).or_default().push(i);
    }
    groups.into_values().collect()
}

fn hermitian_eigenvalues(op: &Operator) -> Vec<f64> {
    let h = &(op + &op.adjoint()) * 0.5;
    let mut out = Vec::with_capacity(op.dim());
    for block in hermitian_blocks(&h) {
        let m = DMatrix::from_fn(block.len(), block.len(), |r, c| h.get(block[r], block[c]));
        out.extend(m.symmetric_eigenvalues().iter());
    }
    out
}

fn min_eigenvalue(op: &Operator) -> f64 {
    hermitian_eigenvalues(op).into_iter().fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{coherent_state, fock_state, number};

    #[test]
    fn identity_expectation_is_one() {
        let rho = DensityMatrix::from_pure(&coherent_state(C64::new(0.3, 0.1), 6).unwrap()).unwrap();
        let e = expectation(&rho, &Operator::identity(6)).unwrap();
        assert!((e - C64::new(1.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn fock_three_number() {
        let rho = DensityMatrix::from_pure(&fock_state(3, 8).unwrap()).unwrap();
        assert!((expectation(&rho, &number(8).unwrap()).unwrap().re - 3.0).abs() < 1e-14);
    }

    #[test]
    fn coherent_state_is_poissonian() {
        let n = 40;
        let rho = DensityMatrix::from_pure(&coherent_state(C64::new(2.0, 0.0), n).unwrap()).unwrap();
        let layout_like = SpaceLayout::new(n, 2).unwrap();
        let full = DensityMatrix::product(
            &rho,
            &DensityMatrix::from_pure(&fock_state(0, 2).unwrap()).unwrap(),
            &DensityMatrix::from_pure(&fock_state(0, 2).unwrap()).unwrap(),
        );
        let pd = phonon_distribution(&full, &layout_like).unwrap();
        let mut q = (-4.0f64).exp();
        for (k, p) in pd.p.iter().enumerate().take(20) {
            if k > 0 {
                q *= 4.0 / k as f64;
            }
            assert!((p - q).abs() < 1e-12);
        }
        assert!(pd.tv_distance_to_poisson() < 1e-10);
    }

    #[test]
    fn invalid_states_rejected() {
        let mut op = Operator::identity(2);
        assert!(DensityMatrix::new(op.clone()).is_err());
        op = op.scale_real(0.5);
        assert!(DensityMatrix::new(op.clone()).is_ok());
        op.set(0, 1, C64::new(0.1, 0.0));
        assert!(DensityMatrix::new(op).is_err());
        let neg = Operator::diagonal(&[1.5, -0.5]);
        assert!(matches!(DensityMatrix::new(neg), Err(Error::NotPositive { .. })));
    }

    #[test]
    fn repair_floors_tiny_negative_eigenvalues() {
        let op = Operator::diagonal(&[1.0 + 1e-10, -1e-10, 0.0]);
        let rho = DensityMatrix::repair(op).unwrap();
        assert!(rho.min_eigenvalue() >= 0.0);
        assert!((rho.as_operator().trace().re - 1.0).abs() < 1e-15);
        assert!(DensityMatrix::repair(Operator::diagonal(&[1.1, -0.1])).is_err());
    }

    #[test]
    fn trace_distance_of_orthogonal_states() {
        let a = DensityMatrix::from_pure(&fock_state(0, 3).unwrap()).unwrap();
        let b = DensityMatrix::from_pure(&fock_state(2, 3).unwrap()).unwrap();
        assert!((a.trace_distance(&b).unwrap() - 1.0).abs() < 1e-14);
    }
}
