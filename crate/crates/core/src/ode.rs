//! Time integrators.
//!
//! [`dopri5`] is an adaptive explicit Dormand–Prince 5(4) pair for general
//! right-hand sides. [`sdirk3_linear`] integrates stiff linear systems
//! `y' = M y` with an L-stable three-stage diagonally implicit method and
//! banded LU solves.

use std::collections::HashMap;
use std::ops::{Add, AddAssign, Mul, Sub};

use crate::banded::BandedLu;
use crate::error::{Error, Result};
use crate::operator::SparseOperator;
use crate::C64;

pub trait OdeScalar:
    Copy + Default + Add<Output = Self> + Sub<Output = Self> + AddAssign + Mul<f64, Output = Self> + Send + Sync
{
    fn modulus(self) -> f64;
}

impl OdeScalar for f64 {
    fn modulus(self) -> f64 {
        self.abs()
    }
}

impl OdeScalar for C64 {
    fn modulus(self) -> f64 {
        self.norm()
    }
}

#[derive(Clone, Copy, Debug)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Initial step; chosen from the grid spacing when absent.
    pub h0: Option<f64>,
    pub h_max: Option<f64>,
    pub h_min: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions {
            rtol: 1e-8,
            atol: 1e-10,
            h0: None,
            h_max: None,
            h_min: 1e-14,
            max_steps: 10_000_000,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Flow {
    Continue,
    Stop,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct OdeStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
    pub factorizations: usize,
    /// True when the observer asked to stop before the end of the grid.
    pub stopped_early: bool,
}

fn check_grid(t_grid: &[f64]) -> Result<()> {
    if t_grid.is_empty() {
        return Err(Error::param("t_grid", "empty time grid"));
    }
    if t_grid.iter().any(|t| !t.is_finite()) {
        return Err(Error::param("t_grid", "non-finite time"));
    }
    if t_grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::param("t_grid", "times must be nondecreasing"));
    }
    Ok(())
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Integrate `y' = f(t, y)` and report the state at every grid time.
///
/// Steps are shortened so that each grid time is hit exactly; the observer
/// receives `(grid index, t, y)` and may stop the integration.
pub fn dopri5<T, F, O>(
    mut f: F,
    y0: &[T],
    t_grid: &[f64],
    opts: &OdeOptions,
    mut observer: O,
) -> Result<OdeStats>
where
    T: OdeScalar,
    F: FnMut(f64, &[T], &mut [T]),
    O: FnMut(usize, f64, &[T]) -> Flow,
{
    check_grid(t_grid)?;
    let n = y0.len();
    let mut stats = OdeStats::default();
    let mut y = y0.to_vec();
    let mut t = t_grid[0];
    if observer(0, t, &y) == Flow::Stop {
        stats.stopped_early = true;
        return Ok(stats);
    }
    let zero = T::default();
    let mut k: Vec<Vec<T>> = (0..7).map(|_| vec![zero; n]).collect();
    let mut tmp = vec![zero; n];
    let mut y_new = vec![zero; n];

    let span = t_grid[t_grid.len() - 1] - t_grid[0];
    let h_max = opts.h_max.unwrap_or(f64::INFINITY);
    let mut h = opts.h0.unwrap_or_else(|| {
        let first = t_grid.windows(2).map(|w| w[1] - w[0]).find(|d| *d > 0.0).unwrap_or(span);
        (first * 1e-2).max(1e-12)
    });
    f(t, &y, &mut k[0]);
    stats.rhs_evals += 1;

    for (gi, &target) in t_grid.iter().enumerate().skip(1) {
        while t < target {
            if stats.accepted + stats.rejected >= opts.max_steps {
                return Err(Error::StepSizeUnderflow { t });
            }
            h = h.min(h_max);
            let remaining = target - t;
            let landing = h >= remaining * (1.0 - 1e-12);
            let step = if landing { remaining } else { h };
            if step < opts.h_min * t.abs().max(1.0) {
                return Err(Error::StepSizeUnderflow { t });
            }

            macro_rules! stage {
                ($dst:expr, $tc:expr, [$(($a:expr, $ki:expr)),*]) => {{
                    for i in 0..n {
                        tmp[i] = y[i] $(+ k[$ki][i] * (step * $a))*;
                    }
                    f(t + $tc * step, &tmp, &mut k[$dst]);
                }};
            }
            stage!(1, C2, [(A21, 0)]);
            stage!(2, C3, [(A31, 0), (A32, 1)]);
            stage!(3, C4, [(A41, 0), (A42, 1), (A43, 2)]);
            stage!(4, C5, [(A51, 0), (A52, 1), (A53, 2), (A54, 3)]);
            stage!(5, 1.0, [(A61, 0), (A62, 1), (A63, 2), (A64, 3), (A65, 4)]);
            for i in 0..n {
                y_new[i] = y[i]
                    + k[0][i] * (step * B1)
                    + k[2][i] * (step * B3)
                    + k[3][i] * (step * B4)
                    + k[4][i] * (step * B5)
                    + k[5][i] * (step * B6);
            }
            f(t + step, &y_new, &mut k[6]);
            stats.rhs_evals += 6;

            let mut err_sq = 0.0;
            for i in 0..n {
                let e = k[0][i] * E1 + k[2][i] * E3 + k[3][i] * E4 + k[4][i] * E5 + k[5][i] * E6 + k[6][i] * E7;
                let sc = opts.atol + opts.rtol * y[i].modulus().max(y_new[i].modulus());
                let r = e.modulus() * step / sc;
                err_sq += r * r;
            }
            let err = if n == 0 { 0.0 } else { (err_sq / n as f64).sqrt() };
            if !err.is_finite() {
                stats.rejected += 1;
                h = step * 0.2;
                continue;
            }
            let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            if err <= 1.0 {
                stats.accepted += 1;
                t = if landing { target } else { t + step };
                std::mem::swap(&mut y, &mut y_new);
                k.swap(0, 6);
                // Keep the proposed step rather than the shortened landing step.
                h = if landing { h.max(step * factor) } else { step * factor };
            } else {
                stats.rejected += 1;
                h = step * factor;
            }
        }
        if observer(gi, t, &y) == Flow::Stop {
            stats.stopped_early = true;
            return Ok(stats);
        }
    }
    Ok(stats)
}

/// Diagonal coefficient of the L-stable three-stage SDIRK method.
pub const SDIRK_GAMMA: f64 = 0.435_866_521_508_459;

struct SdirkTableau {
    a21: f64,
    b1: f64,
    b2: f64,
}

fn sdirk_tableau() -> SdirkTableau {
    let g = SDIRK_GAMMA;
    SdirkTableau {
        a21: (1.0 - g) / 2.0,
        b1: -1.5 * g * g + 4.0 * g - 0.25,
        b2: 1.5 * g * g - 5.0 * g + 1.25,
    }
}

/// Implicit integration of the linear system `y' = M y` with a banded `M`
/// of lower/upper bandwidth `(kl, ku)`.
///
/// Each grid interval is covered by `m` equal substeps; the local error is
/// estimated by comparing `m` and `2m` substeps (Richardson, order 3) and `m`
/// is doubled until the estimate meets the tolerance. Factorizations of
/// `I − hγM` are cached by step size.
pub fn sdirk3_linear<O>(
    m: &SparseOperator,
    band: (usize, usize),
    y0: &[C64],
    t_grid: &[f64],
    opts: &OdeOptions,
    mut observer: O,
) -> Result<OdeStats>
where
    O: FnMut(usize, f64, &[C64]) -> Flow,
{
    check_grid(t_grid)?;
    let n = y0.len();
    if m.nrows() != n || m.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: m.nrows(),
        });
    }
    let mut stats = OdeStats::default();
    let mut y = y0.to_vec();
    if observer(0, t_grid[0], &y) == Flow::Stop {
        stats.stopped_early = true;
        return Ok(stats);
    }
    let mut cache: HashMap<u64, BandedLu> = HashMap::new();
    let mut substeps: usize = 1;
    let tab = sdirk_tableau();

    for gi in 1..t_grid.len() {
        let dt = t_grid[gi] - t_grid[gi - 1];
        if dt > 0.0 {
            if let Some(hm) = opts.h_max {
                substeps = substeps.max((dt / hm).ceil() as usize);
            }
            loop {
                let h_coarse = dt / substeps as f64;
                if h_coarse < opts.h_min * t_grid[gi].abs().max(1.0) {
                    return Err(Error::StepSizeUnderflow { t: t_grid[gi - 1] });
                }
                let coarse = sdirk_run(m, band, &y, h_coarse, substeps, &tab, &mut cache, &mut stats)?;
                let fine = sdirk_run(m, band, &y, h_coarse / 2.0, 2 * substeps, &tab, &mut cache, &mut stats)?;
                let mut err_sq = 0.0;
                for i in 0..n {
                    let e = (fine[i] - coarse[i]).norm() / 7.0;
                    let sc = opts.atol + opts.rtol * fine[i].norm().max(y[i].norm());
                    err_sq += (e / sc) * (e / sc);
                }
                let err = if n == 0 { 0.0 } else { (err_sq / n as f64).sqrt() };
                if err.is_finite() && err <= 1.0 {
                    stats.accepted += 1;
                    y = fine;
                    // Per-step error of a third-order method scales as h⁴.
                    if err < 0.05 && substeps > 1 {
                        substeps = (substeps / 2).max(1);
                    }
                    break;
                }
                stats.rejected += 1;
                if substeps > opts.max_steps {
                    return Err(Error::StepSizeUnderflow { t: t_grid[gi - 1] });
                }
                substeps *= 2;
            }
        }
        if observer(gi, t_grid[gi], &y) == Flow::Stop {
            stats.stopped_early = true;
            return Ok(stats);
        }
    }
    Ok(stats)
}

#[allow(clippy::too_many_arguments)]
fn sdirk_run(
    m: &SparseOperator,
    band: (usize, usize),
    y0: &[C64],
    h: f64,
    steps: usize,
    tab: &SdirkTableau,
    cache: &mut HashMap<u64, BandedLu>,
    stats: &mut OdeStats,
) -> Result<Vec<C64>> {
    let n = y0.len();
    let key = h.to_bits();
    if !cache.contains_key(&key) {
        if cache.len() > 8 {
            cache.clear();
        }
        let hg = h * SDIRK_GAMMA;
        let entries = m
            .iter()
            .map(|(r, c, v)| (r, c, -v * hg))
            .chain((0..n).map(|i| (i, i, C64::new(1.0, 0.0))));
        let lu = BandedLu::factor(n, band.0, band.1, entries)?;
        stats.factorizations += 1;
        cache.insert(key, lu);
    }
    let lu = &cache[&key];
    let mut y = y0.to_vec();
    let mut k1 = vec![C64::default(); n];
    let mut k2 = vec![C64::default(); n];
    let mut k3 = vec![C64::default(); n];
    let mut tmp = vec![C64::default(); n];
    for _ in 0..steps {
        m.matvec(&y, &mut k1);
        lu.solve_in_place(&mut k1);
        for i in 0..n {
            tmp[i] = y[i] + k1[i] * (h * tab.a21);
        }
        m.matvec(&tmp, &mut k2);
        lu.solve_in_place(&mut k2);
        for i in 0..n {
            tmp[i] = y[i] + k1[i] * (h * tab.b1) + k2[i] * (h * tab.b2);
        }
        m.matvec(&tmp, &mut k3);
        lu.solve_in_place(&mut k3);
        for i in 0..n {
            y[i] = tmp[i] + k3[i] * (h * SDIRK_GAMMA);
        }
        stats.rhs_evals += 3;
    }
    Ok(y)
}
