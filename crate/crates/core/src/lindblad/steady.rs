use serde::{Deserialize, Serialize};

use crate::banded::BandedLu;
use crate::error::{Error, Result};
use crate::lindblad::krylov;
use crate::lindblad::state::DensityMatrix;
use crate::lindblad::superop::{Block, Superoperator};
use crate::operator::{Operator, TripletBuilder};
use crate::C64;

pub const RESIDUAL_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SteadyMethod {
    /// Direct banded solve with a pinned ground-state population.
    PinnedDirect,
    /// Shifted inverse iteration towards the zero eigenvalue.
    InverseIteration,
    /// GMRES on the pinned system, preconditioned by per-sector LU.
    PreconditionedGmres,
}

/// Estimated banded-LU work above which coupled sectors are solved
/// iteratively.
pub(crate) const DIRECT_WORK_LIMIT: f64 = 2e9;

#[derive(Clone, Debug)]
pub struct SteadyState {
    pub rho: DensityMatrix,
    /// ‖𝓛 vec ρ‖ / ‖vec ρ‖.
    pub residual: f64,
    pub method: SteadyMethod,
}

/// Relative residual ‖𝓛ρ‖_F / ‖ρ‖_F.
pub fn residual(l: &Superoperator, rho: &Operator) -> Result<f64> {
    let r = l.apply(rho)?;
    let num: f64 = r.data().iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let den: f64 = rho.data().iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    Ok(num / den)
}

/// Null vector of the Liouvillian as a density matrix.
///
/// The system is restricted to the zero-coherence sector when the grading
/// allows it. The row of the ground-state population ρ₀₀ is replaced by the
/// constraint x₀₀ = 1; trace preservation makes the dropped row redundant.
/// The result is then trace-normalized. If that system is singular, shifted
/// inverse iteration from two different starts is used and disagreement is
/// reported as a degenerate null space.
pub fn steady_state(l: &Superoperator) -> Result<SteadyState> {
    let block = l.block(Some(&[0]))?;
    let pin = block
        .position(0, 0)
        .ok_or_else(|| Error::Singular("ground-state population is not an unknown".into()))?;
    let n = block.len();
    let work = n as f64 * block.kl as f64 * (block.kl + block.ku) as f64;
    if block.sector_ranges.len() > 1 && work > DIRECT_WORK_LIMIT {
        let x = preconditioned_solve(&block, pin)?;
        let ss = assemble(l, &block, &x, SteadyMethod::PreconditionedGmres)?;
        if ss.residual >= RESIDUAL_TOL {
            return Err(Error::ResidualTooLarge {
                residual: ss.residual,
                tolerance: RESIDUAL_TOL,
            });
        }
        return Ok(ss);
    }
    let entries = block
        .matrix
        .iter()
        .filter(|&(r, _, _)| r != pin)
        .chain(std::iter::once((pin, pin, C64::new(1.0, 0.0))));
    let direct = BandedLu::factor(n, block.kl, block.ku, entries);
    let (x, method) = match direct {
        Ok(lu) => {
            let mut rhs = vec![C64::new(0.0, 0.0); n];
            rhs[pin] = C64::new(1.0, 0.0);
            lu.solve_in_place(&mut rhs);
            (rhs, SteadyMethod::PinnedDirect)
        }
        Err(Error::Singular(msg)) => {
            log::debug!("pinned steady-state system singular ({msg}); using inverse iteration");
            (inverse_iteration_checked(&block)?, SteadyMethod::InverseIteration)
        }
        Err(e) => return Err(e),
    };
    let mut ss = assemble(l, &block, &x, method)?;
    if ss.residual >= RESIDUAL_TOL && method == SteadyMethod::PinnedDirect {
        log::debug!("direct residual {:.2e}; refining by inverse iteration", ss.residual);
        let x = inverse_iteration_checked(&block)?;
        ss = assemble(l, &block, &x, SteadyMethod::InverseIteration)?;
    }
    if ss.residual >= RESIDUAL_TOL {
        return Err(Error::ResidualTooLarge {
            residual: ss.residual,
            tolerance: RESIDUAL_TOL,
        });
    }
    Ok(ss)
}

/// Pinned system solved by GMRES with a symmetric block Gauss-Seidel
/// preconditioner over coherence sectors. Diagonal blocks hold everything
/// except a charge-changing drive, which only couples neighbouring sectors.
fn preconditioned_solve(block: &Block, pin: usize) -> Result<Vec<C64>> {
    let n = block.len();
    let ranges: Vec<std::ops::Range<usize>> = block.sector_ranges.iter().map(|(_, r)| r.clone()).collect();
    let mut sector_of = vec![0usize; n];
    for (s, r) in ranges.iter().enumerate() {
        sector_of[r.clone()].iter_mut().for_each(|v| *v = s);
    }
    let mut lower = TripletBuilder::new(n, n);
    let mut upper = TripletBuilder::new(n, n);
    let mut diag: Vec<Vec<(usize, usize, C64)>> = vec![Vec::new(); ranges.len()];
    for row in 0..n {
        let s = sector_of[row];
        let start = ranges[s].start;
        if row == pin {
            diag[s].push((row - start, row - start, C64::new(1.0, 0.0)));
            continue;
        }
        let (cols, vals) = block.matrix.row(row);
        for (&c, &v) in cols.iter().zip(vals) {
            match sector_of[c].cmp(&s) {
                std::cmp::Ordering::Equal => diag[s].push((row - start, c - start, v)),
                std::cmp::Ordering::Less => lower.push(row, c, v),
                std::cmp::Ordering::Greater => upper.push(row, c, v),
            }
        }
    }
    let (lower, upper) = (lower.build(), upper.build());
    let factors = ranges
        .iter()
        .zip(diag)
        .map(|(r, entries)| {
            let (kl, ku) = crate::banded::bandwidth(entries.iter().map(|&(a, b, _)| (a, b)));
            BandedLu::factor(r.len(), kl, ku, entries)
        })
        .collect::<Result<Vec<_>>>()?;
    let off_block = |m: &crate::operator::SparseOperator, x: &[C64], r: &std::ops::Range<usize>, out: &mut [C64]| {
        for (o, row) in out.iter_mut().zip(r.clone()) {
            let (cols, vals) = m.row(row);
            *o = cols.iter().zip(vals).map(|(&c, &v)| v * x[c]).sum();
        }
    };
    let precond = |x: &mut [C64]| {
        let mut tmp = Vec::new();
        // Forward sweep: (D + L) y = r.
        for (r, lu) in ranges.iter().zip(&factors) {
            tmp.resize(r.len(), C64::new(0.0, 0.0));
            off_block(&lower, x, r, &mut tmp);
            for (xi, t) in x[r.clone()].iter_mut().zip(&tmp) {
                *xi -= t;
            }
            lu.solve_in_place(&mut x[r.clone()]);
        }
        // Backward sweep: x = y − D⁻¹ U x.
        for (r, lu) in ranges.iter().zip(&factors).rev() {
            tmp.resize(r.len(), C64::new(0.0, 0.0));
            off_block(&upper, x, r, &mut tmp);
            lu.solve_in_place(&mut tmp);
            for (xi, t) in x[r.clone()].iter_mut().zip(&tmp) {
                *xi -= t;
            }
        }
    };
    let apply = |x: &[C64], y: &mut [C64]| {
        block.matrix.matvec(x, y);
        y[pin] = x[pin];
    };
    let mut b = vec![C64::new(0.0, 0.0); n];
    b[pin] = C64::new(1.0, 0.0);
    let mut x = b.clone();
    precond(&mut x);
    let out = krylov::gmres(apply, precond, &b, &mut x, 80, 4000, 1e-11);
    log::debug!(
        "GMRES steady state: {} iterations, relative residual {:.2e}",
        out.iterations,
        out.relative_residual
    );
    if out.relative_residual > 1e-10 {
        return Err(Error::ResidualTooLarge {
            residual: out.relative_residual,
            tolerance: 1e-10,
        });
    }
    Ok(x)
}

fn assemble(l: &Superoperator, block: &Block, x: &[C64], method: SteadyMethod) -> Result<SteadyState> {
    let op = block.scatter(x);
    let rho = DensityMatrix::repair(op)?;
    let res = residual(l, rho.as_operator())?;
    Ok(SteadyState {
        rho,
        residual: res,
        method,
    })
}

fn inverse_iteration_checked(block: &Block) -> Result<Vec<C64>> {
    let d = block.dim;
    let scale = block.matrix.iter().map(|(_, _, v)| v.norm()).fold(0.0, f64::max).max(1.0);
    let sigma = 1e-9 * scale;
    let entries = block
        .matrix
        .iter()
        .chain((0..block.len()).map(|i| (i, i, C64::new(-sigma, 0.0))));
    let lu = BandedLu::factor(block.len(), block.kl, block.ku, entries)?;

    let mut start_mixed = vec![C64::new(0.0, 0.0); block.len()];
    for i in 0..d {
        if let Some(p) = block.position(i, i) {
            start_mixed[p] = C64::new(1.0 / d as f64, 0.0);
        }
    }
    let mut start_ground = vec![C64::new(0.0, 0.0); block.len()];
    if let Some(p) = block.position(0, 0) {
        start_ground[p] = C64::new(1.0, 0.0);
    }
    let a = fix_phase(block, iterate(&lu, start_mixed));
    let b = fix_phase(block, iterate(&lu, start_ground));
    let ra = DensityMatrix::repair(block.scatter(&a));
    let rb = DensityMatrix::repair(block.scatter(&b));
    match (ra, rb) {
        (Ok(ra), Ok(rb)) => {
            let dist = ra.trace_distance(&rb)?;
            if dist > 1e-6 {
                return Err(Error::DegenerateNullspace { distance: dist });
            }
            Ok(a)
        }
        (Err(_), _) | (_, Err(_)) => Err(Error::DegenerateNullspace { distance: f64::NAN }),
    }
}

/// Rotate the eigenvector so that its trace is real and positive.
fn fix_phase(block: &Block, mut x: Vec<C64>) -> Vec<C64> {
    let tr: C64 = (0..block.dim).filter_map(|i| block.position(i, i)).map(|p| x[p]).sum();
    if tr.norm() > 0.0 {
        let ph = tr.conj() / tr.norm();
        for z in &mut x {
            *z *= ph;
        }
    }
    x
}

fn iterate(lu: &BandedLu, mut x: Vec<C64>) -> Vec<C64> {
    for _ in 0..6 {
        lu.solve_in_place(&mut x);
        let norm: f64 = x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm > 0.0 && norm.is_finite() {
            for z in &mut x {
                *z /= norm;
            }
        }
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::presets::Preset;
    use crate::models::PhysicalModel;

    #[test]
    fn preconditioned_solve_matches_direct() {
        let mut spec = Preset::Reference.spec(8).unwrap().to_two_level(true);
        spec.tickle = Some(Preset::tickle(0.3));
        let model = PhysicalModel::build(&spec).unwrap();
        let l = model.liouvillian().unwrap();
        let direct = steady_state(&l).unwrap();
        assert_eq!(direct.method, SteadyMethod::PinnedDirect);
        let block = l.block(None).unwrap();
        let pin = block.position(0, 0).unwrap();
        let x = preconditioned_solve(&block, pin).unwrap();
        let ss = assemble(&l, &block, &x, SteadyMethod::PreconditionedGmres).unwrap();
        assert!(ss.residual < RESIDUAL_TOL);
        assert!(ss.rho.trace_distance(&direct.rho).unwrap() < 1e-9);
    }
}
