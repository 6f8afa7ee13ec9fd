use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lindblad::state::DensityMatrix;
use crate::lindblad::steady::DIRECT_WORK_LIMIT;
use crate::lindblad::superop::{Block, Superoperator};
use crate::ode::{dopri5, sdirk3_linear, Flow, OdeOptions, OdeStats};
use crate::operator::Operator;
use crate::C64;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    /// Explicit unless the estimated explicit step count is too large.
    #[default]
    Auto,
    Explicit,
    Implicit,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvolveOptions {
    pub rtol: f64,
    pub atol: f64,
    pub integrator: Integrator,
    /// Estimated explicit step count above which `Auto` goes implicit.
    pub stiff_steps: f64,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        EvolveOptions {
            rtol: 1e-8,
            atol: 1e-11,
            integrator: Integrator::Auto,
            stiff_steps: 2e4,
        }
    }
}

fn present_sectors(l: &Superoperator, rho: &Operator) -> Option<Vec<i64>> {
    let g = l.grading()?;
    if !g.sector_symmetric {
        return None;
    }
    let d = rho.dim();
    let mut set = BTreeSet::new();
    for i in 0..d {
        for j in 0..d {
            if rho.get(i, j).norm() > 0.0 {
                set.insert(g.charges[i] - g.charges[j]);
            }
        }
    }
    Some(set.into_iter().collect())
}

fn check_state(l: &Superoperator, rho0: &DensityMatrix) -> Result<()> {
    if rho0.dim() != l.dim() {
        return Err(Error::DimensionMismatch {
            expected: l.dim(),
            found: rho0.dim(),
        });
    }
    Ok(())
}

fn integrate<O>(block: &Block, x0: &[C64], t_grid: &[f64], opts: &EvolveOptions, mut observer: O) -> Result<OdeStats>
where
    O: FnMut(usize, f64, &[C64]) -> Flow,
{
    let ode = OdeOptions {
        rtol: opts.rtol,
        atol: opts.atol,
        ..OdeOptions::default()
    };
    let span = match (t_grid.first(), t_grid.last()) {
        (Some(a), Some(b)) => b - a,
        _ => 0.0,
    };
    let implicit = match opts.integrator {
        Integrator::Explicit => false,
        Integrator::Implicit => true,
        Integrator::Auto => {
            let stiff = block.matrix.max_row_sum() * span / 3.3 > opts.stiff_steps;
            let work = block.len() as f64 * block.kl as f64 * (block.kl + block.ku) as f64;
            stiff && work <= DIRECT_WORK_LIMIT
        }
    };
    if implicit {
        log::debug!("implicit integration of {} unknowns (bandwidth {}/{})", block.len(), block.kl, block.ku);
        sdirk3_linear(&block.matrix, (block.kl, block.ku), x0, t_grid, &ode, &mut observer)
    } else {
        let m = &block.matrix;
        dopri5(|_t, y: &[C64], dy: &mut [C64]| m.matvec(y, dy), x0, t_grid, &ode, &mut observer)
    }
}

/// Integrate vec ρ̇ = 𝓛 vec ρ and hand each grid snapshot (Hermitized) to
/// the observer. Only coherence sectors present in ρ₀ are integrated.
pub fn evolve_with<O>(
    rho0: &DensityMatrix,
    l: &Superoperator,
    t_grid: &[f64],
    opts: &EvolveOptions,
    mut observer: O,
) -> Result<OdeStats>
where
    O: FnMut(usize, f64, &DensityMatrix) -> Flow,
{
    check_state(l, rho0)?;
    let sectors = present_sectors(l, rho0.as_operator());
    let block = l.block(sectors.as_deref())?;
    let x0 = block.gather(rho0.as_operator());
    integrate(&block, &x0, t_grid, opts, |i, t, y| {
        let op = block.scatter(y);
        let herm = (&op + &op.adjoint()).scale_real(0.5);
        observer(i, t, &DensityMatrix::hermitized(herm))
    })
}

/// Snapshots of ρ(t) at every grid time.
pub fn evolve(rho0: &DensityMatrix, l: &Superoperator, t_grid: &[f64], opts: &EvolveOptions) -> Result<Vec<DensityMatrix>> {
    let mut out = Vec::with_capacity(t_grid.len());
    evolve_with(rho0, l, t_grid, opts, |_, _, rho| {
        out.push(rho.clone());
        Flow::Continue
    })?;
    Ok(out)
}

/// Tr(ρ(t) O_k) for every grid time and operator, integrating only the
/// coherence sectors the operators can see.
pub fn evolve_expectations(
    rho0: &DensityMatrix,
    l: &Superoperator,
    t_grid: &[f64],
    ops: &[Operator],
    opts: &EvolveOptions,
) -> Result<Vec<Vec<C64>>> {
    check_state(l, rho0)?;
    let d = l.dim();
    for o in ops {
        if o.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: o.dim(),
            });
        }
    }
    let sectors = present_sectors(l, rho0.as_operator()).map(|present| {
        let g = l.grading().expect("graded");
        let mut needed = BTreeSet::new();
        for o in ops {
            for (r, c, _) in o.to_sparse().iter() {
                // Tr(ρO) pairs ρ_cr with O_rc.
                needed.insert(g.charges[c] - g.charges[r]);
            }
        }
        present.into_iter().filter(|k| needed.contains(k)).collect::<Vec<_>>()
    });
    let block = l.block(sectors.as_deref())?;
    // Tr(ρO) = Σ_p x_p O_{j i} for unknown p = ρ_ij.
    let weights: Vec<Vec<(usize, C64)>> = ops
        .iter()
        .map(|o| {
            block
                .unknowns
                .iter()
                .enumerate()
                .filter_map(|(p, &u)| {
                    let (i, j) = (u % d, u / d);
                    let w = o.get(j, i);
                    (w.norm() > 0.0).then_some((p, w))
                })
                .collect()
        })
        .collect();
    let x0 = block.gather(rho0.as_operator());
    let mut out = Vec::with_capacity(t_grid.len());
    if block.len() == 0 {
        return Ok(vec![vec![C64::new(0.0, 0.0); ops.len()]; t_grid.len()]);
    }
    integrate(&block, &x0, t_grid, opts, |_, _, y| {
        out.push(weights.iter().map(|w| w.iter().map(|&(p, c)| y[p] * c).sum()).collect());
        Flow::Continue
    })?;
    Ok(out)
}
