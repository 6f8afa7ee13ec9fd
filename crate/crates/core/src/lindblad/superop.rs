use rayon::prelude::*;

use crate::banded::bandwidth;
use crate::error::{Error, Result};
use crate::operator::{Operator, SparseOperator, TripletBuilder};
use crate::C64;

/// Conserved-charge labelling of basis states.
///
/// With `sector_symmetric`, the Hamiltonian conserves the charge and every
/// jump operator shifts it uniformly, so ρ_ij only couples to entries with
/// the same Q_i − Q_j. Without it, the Hamiltonian may change the charge by
/// at most one.
#[derive(Clone, Debug, PartialEq)]
pub struct Grading {
    pub charges: Vec<i64>,
    pub sector_symmetric: bool,
}

/// Lindblad generator in column-stacked vectorization, vec(ρ)[j·d + i] = ρ_ij:
///
/// 𝓛 = −i(I⊗H − Hᵀ⊗I) + Σ_k [L̄_k⊗L_k − ½(I⊗L_k†L_k + (L_k†L_k)ᵀ⊗I)]
///
/// Stored through the effective operator K = −iH − ½ΣL†L and the jump
/// operators; matrix rows are generated on demand.
#[derive(Clone, Debug)]
pub struct Superoperator {
    dim: usize,
    k: SparseOperator,
    jumps: Vec<SparseOperator>,
    grading: Option<Grading>,
}

pub fn liouvillian(h: &Operator, jumps: &[Operator]) -> Result<Superoperator> {
    Superoperator::new(h, jumps, None)
}

/// Liouvillian with a charge grading, checked against the operators.
pub fn liouvillian_graded(h: &Operator, jumps: &[Operator], grading: Grading) -> Result<Superoperator> {
    Superoperator::new(h, jumps, Some(grading))
}

impl Superoperator {
    fn new(h: &Operator, jumps: &[Operator], grading: Option<Grading>) -> Result<Self> {
        let d = h.dim();
        if d == 0 {
            return Err(Error::InvalidDimension("empty Hamiltonian".into()));
        }
        for l in jumps {
            if l.dim() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: l.dim(),
                });
            }
        }
        let mut k = h.scale(C64::new(0.0, -1.0));
        for l in jumps {
            let ldl = l.adjoint().try_matmul(l)?;
            k = k.try_sub(&ldl.scale_real(0.5))?;
        }
        let s = Superoperator {
            dim: d,
            k: k.to_sparse(),
            jumps: jumps.iter().map(|l| l.to_sparse()).collect(),
            grading: None,
        };
        match grading {
            None => Ok(s),
            Some(g) => {
                check_grading(h, &s.jumps, &g)?;
                Ok(Superoperator {
                    grading: Some(g),
                    ..s
                })
            }
        }
    }

    /// Hilbert-space dimension d; the superoperator acts on d² entries.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn grading(&self) -> Option<&Grading> {
        self.grading.as_ref()
    }

    pub fn is_zero(&self) -> bool {
        self.k.nnz() == 0 && self.jumps.iter().all(|l| l.nnz() == 0)
    }

    /// 𝓛(ρ) = Kρ + ρK† + Σ LρL†, evaluated directly on a dense ρ.
    pub fn apply(&self, rho: &Operator) -> Result<Operator> {
        let d = self.dim;
        if rho.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: rho.dim(),
            });
        }
        let r = rho.data();
        let mut out = vec![C64::new(0.0, 0.0); d * d];
        // Kρ and ρK†, row-major buffers.
        for (i, k_idx, kv) in self.k.iter() {
            let src = &r[k_idx * d..(k_idx + 1) * d];
            let dst = &mut out[i * d..(i + 1) * d];
            for (o, x) in dst.iter_mut().zip(src) {
                *o += kv * x;
            }
        }
        for (j, k_idx, kv) in self.k.iter() {
            let c = kv.conj();
            for i in 0..d {
                out[i * d + j] += r[i * d + k_idx] * c;
            }
        }
        for l in &self.jumps {
            // T = ρL†, then L·T.
            let mut t = vec![C64::new(0.0, 0.0); d * d];
            for (j, l_idx, lv) in l.iter() {
                let c = lv.conj();
                for i in 0..d {
                    t[i * d + j] += r[i * d + l_idx] * c;
                }
            }
            for (i, k_idx, lv) in l.iter() {
                let src = &t[k_idx * d..(k_idx + 1) * d];
                let dst = &mut out[i * d..(i + 1) * d];
                for (o, x) in dst.iter_mut().zip(src) {
                    *o += lv * x;
                }
            }
        }
        Operator::from_row_major(d, out)
    }

    /// Nonzero entries of the matrix row for unknown ρ_ij, as
    /// (column vec index, value), unsorted and possibly with duplicates.
    pub(crate) fn row_entries(&self, i: usize, j: usize, out: &mut Vec<(usize, C64)>) {
        let d = self.dim;
        out.clear();
        let (cols, vals) = self.k.row(i);
        for (&k, &v) in cols.iter().zip(vals) {
            out.push((j * d + k, v));
        }
        let (cols, vals) = self.k.row(j);
        for (&k, &v) in cols.iter().zip(vals) {
            out.push((k * d + i, v.conj()));
        }
        for l in &self.jumps {
            let (ci, vi) = l.row(i);
            if ci.is_empty() {
                continue;
            }
            let (cj, vj) = l.row(j);
            for (&k, &a) in ci.iter().zip(vi) {
                for (&m, &b) in cj.iter().zip(vj) {
                    out.push((m * d + k, a * b.conj()));
                }
            }
        }
    }

    /// Full d² × d² matrix. Intended for small systems and tests.
    pub fn matrix(&self) -> SparseOperator {
        let d = self.dim;
        let mut b = TripletBuilder::new(d * d, d * d);
        let mut row = Vec::new();
        for j in 0..d {
            for i in 0..d {
                self.row_entries(i, j, &mut row);
                for &(c, v) in &row {
                    b.push(j * d + i, c, v);
                }
            }
        }
        b.build()
    }

    /// Ordered set of unknowns covering the coherence sectors in `sectors`
    /// (all unknowns when `None` or when the grading is not symmetric).
    pub(crate) fn block(&self, sectors: Option<&[i64]>) -> Result<Block> {
        let d = self.dim;
        // Sorted by (sector, Q_i, j, i). Within a sector this is banded; a
        // charge-changing Hamiltonian couples neighbouring sectors only.
        let mut keys: Vec<(i64, i64, usize, usize)> = Vec::new();
        match &self.grading {
            Some(g) => {
                let select = if g.sector_symmetric { sectors } else { None };
                for j in 0..d {
                    for i in 0..d {
                        let k = g.charges[i] - g.charges[j];
                        if select.is_none_or(|s| s.contains(&k)) {
                            keys.push((k, g.charges[i], j, i));
                        }
                    }
                }
            }
            None => {
                for j in 0..d {
                    for i in 0..d {
                        keys.push((0, 0, j, i));
                    }
                }
            }
        }
        keys.sort_unstable();
        let mut sector_ranges: Vec<(i64, std::ops::Range<usize>)> = Vec::new();
        for (p, key) in keys.iter().enumerate() {
            match sector_ranges.last_mut() {
                Some((k, r)) if *k == key.0 => r.end = p + 1,
                _ => sector_ranges.push((key.0, p..p + 1)),
            }
        }
        let unknowns: Vec<usize> = keys.iter().map(|&(_, _, j, i)| j * d + i).collect();
        let mut pos = vec![u32::MAX; d * d];
        for (p, &u) in unknowns.iter().enumerate() {
            pos[u] = p as u32;
        }
        let rows: Vec<Vec<(usize, C64)>> = unknowns
            .par_iter()
            .map_init(Vec::new, |scratch, &u| {
                let (i, j) = (u % d, u / d);
                self.row_entries(i, j, scratch);
                scratch
                    .iter()
                    .map(|&(c, v)| (pos[c], v))
                    .filter(|&(p, _)| p != u32::MAX)
                    .map(|(p, v)| (p as usize, v))
                    .collect()
            })
            .collect();
        let n = unknowns.len();
        let mut b = TripletBuilder::with_capacity(n, n, rows.iter().map(|r| r.len()).sum());
        for (r, entries) in rows.into_iter().enumerate() {
            for (c, v) in entries {
                b.push(r, c, v);
            }
        }
        let matrix = b.build();
        let (kl, ku) = bandwidth(matrix.iter().map(|(r, c, _)| (r, c)));
        Ok(Block {
            dim: d,
            unknowns,
            pos,
            sector_ranges,
            matrix,
            kl,
            ku,
        })
    }
}

fn check_grading(h: &Operator, jumps: &[SparseOperator], g: &Grading) -> Result<()> {
    let d = h.dim();
    if g.charges.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: g.charges.len(),
        });
    }
    for i in 0..d {
        for j in 0..d {
            if h.get(i, j).norm() == 0.0 {
                continue;
            }
            let dq = (g.charges[i] - g.charges[j]).abs();
            if (g.sector_symmetric && dq != 0) || dq > 1 {
                return Err(Error::InvalidParameter {
                    field: "grading".into(),
                    reason: format!("Hamiltonian entry ({i}, {j}) changes the charge by {dq}"),
                });
            }
        }
    }
    for (n, l) in jumps.iter().enumerate() {
        let mut shift = None;
        for (i, j, _) in l.iter() {
            let s = g.charges[i] - g.charges[j];
            if *shift.get_or_insert(s) != s || s.abs() > 1 {
                return Err(Error::InvalidParameter {
                    field: "grading".into(),
                    reason: format!("jump operator {n} does not shift the charge uniformly"),
                });
            }
        }
    }
    Ok(())
}

/// Restriction of the Liouvillian to an ordered subset of unknowns, banded
/// by construction of the ordering.
#[derive(Clone, Debug)]
pub(crate) struct Block {
    pub dim: usize,
    pub unknowns: Vec<usize>,
    pub pos: Vec<u32>,
    /// Contiguous ranges of unknowns sharing one coherence sector.
    pub sector_ranges: Vec<(i64, std::ops::Range<usize>)>,
    pub matrix: SparseOperator,
    pub kl: usize,
    pub ku: usize,
}

impl Block {
    pub fn len(&self) -> usize {
        self.unknowns.len()
    }

    pub fn gather(&self, rho: &Operator) -> Vec<C64> {
        let d = self.dim;
        self.unknowns.iter().map(|&u| rho.get(u % d, u / d)).collect()
    }

    pub fn scatter(&self, x: &[C64]) -> Operator {
        let d = self.dim;
        let mut out = Operator::zeros(d);
        for (&u, &v) in self.unknowns.iter().zip(x) {
            out.set(u % d, u / d, v);
        }
        out
    }

    pub fn position(&self, i: usize, j: usize) -> Option<usize> {
        let p = self.pos[j * self.dim + i];
        (p != u32::MAX).then_some(p as usize)
    }
}
