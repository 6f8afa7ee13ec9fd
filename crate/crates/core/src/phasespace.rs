//! Characteristic function, Fourier marginals, Wigner function and phase
//! diffusion extracted from amplitude decay.
//!
//! Quadrature convention: X_φ = (a e^{-iφ} + a† e^{iφ})/√2, so the vacuum
//! variance is ½. Sampling the Weyl characteristic function along the β axis
//! at angle θ gives ⟨e^{iλX_φ}⟩ with φ = θ − π/2 and λ = √2 |β|.

use std::f64::consts::{FRAC_PI_2, PI, SQRT_2};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lindblad::DensityMatrix;
use crate::operator::displacement;
use crate::C64;

const SYMMETRY_TOL: f64 = 1e-10;
/// Allowed deviation of the raw marginal norm from 1.
pub const NORM_TOL: f64 = 0.02;
/// Ringing budget |min P|·(x range).
pub const NEGATIVITY_BUDGET: f64 = 0.02;
/// Boundary mass above which a Wigner grid is reported as too small.
pub const BOUNDARY_MASS_WARN: f64 = 1e-3;

/// Samples of C(β) = Tr(ρ D(β e^{iθ})) along one axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CharFunSamples {
    /// β axis angle θ, rad.
    pub axis_angle: f64,
    /// Signed magnitudes, symmetric about 0.
    pub grid: Vec<f64>,
    pub values: Vec<C64>,
}

impl CharFunSamples {
    /// Quadrature angle whose marginal these samples determine.
    pub fn quadrature_angle(&self) -> f64 {
        self.axis_angle - FRAC_PI_2
    }

    pub fn max_abs_imag(&self) -> f64 {
        self.values.iter().map(|c| c.im.abs()).fold(0.0, f64::max)
    }

    /// Mirror index for each grid point, or an error if the grid is not
    /// symmetric about zero.
    fn mirror(&self) -> Result<Vec<usize>> {
        let n = self.grid.len();
        if n == 0 || self.values.len() != n {
            return Err(Error::InvalidDimension("empty or mismatched characteristic-function samples".into()));
        }
        if self.grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::param("grid", "must be strictly increasing"));
        }
        let scale = self.grid[n - 1].abs().max(1.0);
        for k in 0..n {
            if (self.grid[k] + self.grid[n - 1 - k]).abs() > 1e-9 * scale {
                return Err(Error::param("grid", "must be symmetric about zero"));
            }
        }
        Ok((0..n).rev().collect())
    }

    /// C(0) = 1 and C(−β) = conj C(β).
    pub fn check(&self) -> Result<()> {
        let mirror = self.mirror()?;
        for (k, &m) in mirror.iter().enumerate() {
            if (self.values[k] - self.values[m].conj()).norm() > SYMMETRY_TOL {
                return Err(Error::InvalidState(format!("C(-b) != conj C(b) at b = {}", self.grid[k])));
            }
            if self.grid[k] == 0.0 && (self.values[k] - C64::new(1.0, 0.0)).norm() > SYMMETRY_TOL {
                return Err(Error::InvalidState(format!("C(0) = {}", self.values[k])));
            }
        }
        Ok(())
    }
}

/// Symmetric uniform grid on [−max, max].
pub fn symmetric_grid(max: f64, step: f64) -> Result<Vec<f64>> {
    if !(max > 0.0 && step > 0.0 && step <= max) {
        return Err(Error::param("grid", "need 0 < step <= max"));
    }
    let half = (max / step).round() as i64;
    Ok((-half..=half).map(|k| k as f64 * step).collect())
}

/// Measured range ±0.7 in steps of 0.02.
pub fn measured_beta_grid() -> Vec<f64> {
    (-35..=35).map(|k| k as f64 * 0.02).collect()
}

/// Padding edge used with the measured range.
pub const MEASURED_PAD: f64 = 1.0;

fn check_motion(rho: &DensityMatrix) -> Result<usize> {
    let n = rho.dim();
    if n < 2 {
        return Err(Error::InvalidDimension("motional state needs at least two levels".into()));
    }
    Ok(n)
}

/// Tr(ρ M) for dense M.
fn trace_product(rho: &DensityMatrix, m: &crate::operator::Operator) -> C64 {
    let r = rho.as_operator();
    let n = r.dim();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            acc += r.get(i, j) * m.get(j, i);
        }
    }
    acc
}

/// C(β) along the axis at angle `phi` for a motional density matrix. The
/// displacement entries are exact, so the samples are exact for the
/// truncated state at any |β|.
pub fn char_fun(rho: &DensityMatrix, phi: f64, grid: &[f64]) -> Result<CharFunSamples> {
    let n = check_motion(rho)?;
    let unit = C64::from_polar(1.0, phi);
    let values = grid
        .par_iter()
        .map(|&b| Ok(trace_product(rho, &displacement(unit * b, n)?)))
        .collect::<Result<Vec<_>>>()?;
    let s = CharFunSamples {
        axis_angle: phi,
        grid: grid.to_vec(),
        values,
    };
    Ok(s)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarginalCurve {
    /// Quadrature angle φ, rad.
    pub quadrature_angle: f64,
    pub x: Vec<f64>,
    /// Floored and renormalized density.
    pub density: Vec<f64>,
    /// ∫P dx before flooring.
    pub raw_norm: f64,
    /// |min P|·(x range) before flooring.
    pub negativity: f64,
}

impl MarginalCurve {
    pub fn within_budget(&self) -> bool {
        (self.raw_norm - 1.0).abs() <= NORM_TOL && self.negativity < NEGATIVITY_BUDGET
    }

    pub fn mean(&self) -> f64 {
        trapezoid(&self.x, &self.x.iter().zip(&self.density).map(|(x, p)| x * p).collect::<Vec<_>>())
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        trapezoid(
            &self.x,
            &self.x.iter().zip(&self.density).map(|(x, p)| (x - m).powi(2) * p).collect::<Vec<_>>(),
        )
    }

    /// L¹ distance to another curve on the same x grid.
    pub fn l1_distance(&self, other: &MarginalCurve) -> Result<f64> {
        if self.x.len() != other.x.len() || self.x.iter().zip(&other.x).any(|(a, b)| (a - b).abs() > 1e-12) {
            return Err(Error::param("x", "marginals live on different grids"));
        }
        let diff: Vec<f64> = self.density.iter().zip(&other.density).map(|(a, b)| (a - b).abs()).collect();
        Ok(trapezoid(&self.x, &diff))
    }

    /// L¹ distance to an analytic density.
    pub fn l1_to(&self, f: impl Fn(f64) -> f64) -> f64 {
        let diff: Vec<f64> = self.x.iter().zip(&self.density).map(|(&x, p)| (p - f(x)).abs()).collect();
        trapezoid(&self.x, &diff)
    }
}

pub fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2).zip(y.windows(2)).map(|(xw, yw)| 0.5 * (xw[1] - xw[0]) * (yw[0] + yw[1])).sum()
}

/// Quadrature grid of a marginal.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarginalGrid {
    pub x_max: f64,
    pub points: usize,
}

impl Default for MarginalGrid {
    fn default() -> Self {
        MarginalGrid { x_max: 12.0, points: 481 }
    }
}

impl MarginalGrid {
    pub fn xs(&self) -> Vec<f64> {
        let n = self.points.max(2);
        (0..n).map(|k| -self.x_max + 2.0 * self.x_max * k as f64 / (n - 1) as f64).collect()
    }
}

fn finish(quadrature_angle: f64, x: Vec<f64>, raw: Vec<f64>) -> Result<MarginalCurve> {
    let raw_norm = trapezoid(&x, &raw);
    let range = x[x.len() - 1] - x[0];
    let min = raw.iter().cloned().fold(f64::INFINITY, f64::min);
    let negativity = (-min).max(0.0) * range;
    let mut density: Vec<f64> = raw.into_iter().map(|p| p.max(0.0)).collect();
    let norm = trapezoid(&x, &density);
    if !(norm > 0.0) {
        return Err(Error::InvalidState("marginal has no positive mass".into()));
    }
    density.iter_mut().for_each(|p| *p /= norm);
    Ok(MarginalCurve {
        quadrature_angle,
        x,
        density,
        raw_norm,
        negativity,
    })
}

/// Fourier transform of zero-padded samples.
///
/// The samples are extended with zeros out to ±`pad_to` and transformed as
/// P(x) = (1/2π) Σ_k w_k C(λ_k) e^{-iλ_k x}, λ = √2 β, with cell widths w_k.
/// On a uniform grid this is the discrete transform of the padded record,
/// evaluated on `grid` instead of the coarse conjugate grid. The norm and
/// negativity checks are taken before flooring at zero.
pub fn marginal_from_charfun(samples: &CharFunSamples, pad_to: f64, grid: &MarginalGrid) -> Result<MarginalCurve> {
    let mirror = samples.mirror()?;
    let max = samples.grid.iter().fold(0.0f64, |m, b| m.max(b.abs()));
    if !(pad_to >= max) {
        return Err(Error::param("pad_to", format!("{pad_to} is inside the sampled range ±{max}")));
    }
    for (k, &m) in mirror.iter().enumerate() {
        if (samples.values[k] - samples.values[m].conj()).norm() > 1e-6 {
            return Err(Error::InvalidState("samples are not Hermitian-symmetric".into()));
        }
    }
    let n = samples.grid.len();
    let lam: Vec<f64> = samples.grid.iter().map(|b| SQRT_2 * b).collect();
    let weights: Vec<f64> = (0..n)
        .map(|k| match (k, n) {
            (_, 1) => 0.0,
            (0, _) => lam[1] - lam[0],
            (k, n) if k == n - 1 => lam[k] - lam[k - 1],
            (k, _) => 0.5 * (lam[k + 1] - lam[k - 1]),
        })
        .collect();
    let x = grid.xs();
    let raw: Vec<f64> = x
        .par_iter()
        .map(|&xv| {
            let s: f64 = (0..n)
                .map(|k| {
                    let c = samples.values[k];
                    let (sn, cs) = (lam[k] * xv).sin_cos();
                    weights[k] * (c.re * cs + c.im * sn)
                })
                .sum();
            s / (2.0 * PI)
        })
        .collect();
    finish(samples.quadrature_angle(), x, raw)
}

/// W(α) = (2/π) Tr[ρ D(2α) Π] at each point, i.e. the parity expectation of
/// the state displaced by −α.
pub fn wigner(rho: &DensityMatrix, points: &[C64]) -> Result<Vec<f64>> {
    let n = check_motion(rho)?;
    let r = rho.as_operator();
    points
        .par_iter()
        .map(|&alpha| {
            let d = displacement(2.0 * alpha, n)?;
            let mut acc = C64::new(0.0, 0.0);
            for col in 0..n {
                let sign = if col % 2 == 0 { 1.0 } else { -1.0 };
                for row in 0..n {
                    acc += r.get(col, row) * d.get(row, col) * sign;
                }
            }
            Ok(2.0 / PI * acc.re)
        })
        .collect()
}

/// Wigner function on a rectangular grid, row-major in the imaginary part.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WignerGrid {
    pub re: Vec<f64>,
    pub im: Vec<f64>,
    pub values: Vec<f64>,
    pub integral: f64,
    /// ∫|W| over the outermost ring of cells.
    pub boundary_mass: f64,
}

pub fn wigner_grid(rho: &DensityMatrix, re: &[f64], im: &[f64]) -> Result<WignerGrid> {
    if re.len() < 2 || im.len() < 2 {
        return Err(Error::param("grid", "need at least two points per axis"));
    }
    let points: Vec<C64> = im.iter().flat_map(|&y| re.iter().map(move |&x| C64::new(x, y))).collect();
    let values = wigner(rho, &points)?;
    let (nx, ny) = (re.len(), im.len());
    let rows: Vec<f64> = (0..ny).map(|j| trapezoid(re, &values[j * nx..(j + 1) * nx])).collect();
    let integral = trapezoid(im, &rows);
    let dx = (re[nx - 1] - re[0]) / (nx - 1) as f64;
    let dy = (im[ny - 1] - im[0]) / (ny - 1) as f64;
    let boundary_mass: f64 = (0..ny)
        .flat_map(|j| (0..nx).map(move |i| (i, j)))
        .filter(|&(i, j)| i == 0 || j == 0 || i == nx - 1 || j == ny - 1)
        .map(|(i, j)| values[j * nx + i].abs() * dx * dy)
        .sum();
    if boundary_mass > BOUNDARY_MASS_WARN {
        log::warn!("Wigner grid too small: boundary mass {boundary_mass:.2e}");
    }
    Ok(WignerGrid {
        re: re.to_vec(),
        im: im.to_vec(),
        values,
        integral,
        boundary_mass,
    })
}

/// Marginal of W along quadrature X_φ: P(x) = ½∫ W dp with
/// α = (x + ip) e^{iφ}/√2.
pub fn wigner_marginal(rho: &DensityMatrix, quadrature_angle: f64, grid: &MarginalGrid, p_max: f64, p_points: usize) -> Result<MarginalCurve> {
    if !(p_max > 0.0) || p_points < 3 {
        return Err(Error::param("p_max", "need a positive range and at least three points"));
    }
    let x = grid.xs();
    let p: Vec<f64> = (0..p_points)
        .map(|k| -p_max + 2.0 * p_max * k as f64 / (p_points - 1) as f64)
        .collect();
    let rot = C64::from_polar(1.0 / SQRT_2, quadrature_angle);
    let points: Vec<C64> = x.iter().flat_map(|&xv| p.iter().map(move |&pv| C64::new(xv, pv) * rot)).collect();
    let w = wigner(rho, &points)?;
    let raw: Vec<f64> = w.chunks(p_points).map(|row| 0.5 * trapezoid(&p, row)).collect();
    finish(quadrature_angle, x, raw)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseDiffusionFit {
    pub times: Vec<f64>,
    pub theta_sq: Vec<f64>,
    /// Slope of ⟨θ²⟩ through the origin, rad² per time unit.
    pub rate: f64,
    /// |⟨a⟩| fell below 1e-6 √I; later points are excluded from the fit.
    pub saturated: bool,
}

/// ⟨θ²⟩(t) = −2 ln(|⟨a⟩(t)|/√I) and its weighted slope through the origin,
/// with weights |⟨a⟩|²/I.
pub fn phase_variance_trace(times: &[f64], amplitudes: &[C64], intensity: f64) -> Result<PhaseDiffusionFit> {
    if times.len() != amplitudes.len() || times.is_empty() {
        return Err(Error::DimensionMismatch {
            expected: times.len(),
            found: amplitudes.len(),
        });
    }
    if !(intensity > 0.0 && intensity.is_finite()) {
        return Err(Error::param("intensity", "must be positive"));
    }
    let t0 = times[0];
    let floor = 1e-6 * intensity.sqrt();
    let mut out = PhaseDiffusionFit {
        times: Vec::with_capacity(times.len()),
        theta_sq: Vec::with_capacity(times.len()),
        rate: 0.0,
        saturated: false,
    };
    let (mut num, mut den) = (0.0, 0.0);
    for (&t, a) in times.iter().zip(amplitudes) {
        let m = a.norm();
        if m < floor {
            out.saturated = true;
            break;
        }
        let th = -2.0 * (m / intensity.sqrt()).ln();
        let w = m * m / intensity;
        let dt = t - t0;
        num += w * dt * th;
        den += w * dt * dt;
        out.times.push(t);
        out.theta_sq.push(th);
    }
    out.rate = if den > 0.0 { num / den } else { 0.0 };
    Ok(out)
}
