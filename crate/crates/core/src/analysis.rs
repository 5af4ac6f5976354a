//! Frequency-domain performance evaluation of error operators: squared
//! Frobenius norm (average-case), squared operator norm (worst-case) and the
//! regret norm against the clairvoyant estimator, plus CSV export of the
//! response curves.
//!
//! All quadratures run on uniform midpoint grids `omega_k = (k + 1/2) 2pi/N`.
//! Midpoint sampling matters: plants with unit-circle poles (the tracking
//! example) are evaluated only strictly between the poles, and the rectangle
//! rule on a periodic integrand keeps its geometric accuracy. Sums are
//! reduced pairwise so results do not depend on evaluation order.

use crate::error::{Error, Result};
use crate::state_space::{
    error_row, eval_plant_channels, eval_transfer, CMatrix, LtiFilter, StateSpaceModel,
};
use crate::synthesis::noncausal_from_channels;

/// Relative change under grid doubling that counts as converged.
const REFINE_TOL: f64 = 1e-6;
/// Hard cap on quadrature refinement.
const REFINE_CAP: usize = 1 << 20;
/// Golden-section window shrinks to this width in omega.
const GOLDEN_TOL: f64 = 1e-10;

/// A uniform midpoint frequency grid on `[0, 2pi)`.
///
/// `count` must be a power of two (at least 64) so the causality checks can
/// run an FFT directly on the samples.
#[derive(Debug, Clone)]
pub struct FrequencyGrid {
    count: usize,
}

impl FrequencyGrid {
    pub fn new(count: usize) -> Result<Self> {
        if count < 64 || !count.is_power_of_two() {
            return Err(Error::DimensionMismatch(format!(
                "grid count must be a power of two >= 64, got {count}"
            )));
        }
        Ok(Self { count })
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn omega(&self, k: usize) -> f64 {
        (k as f64 + 0.5) * 2.0 * std::f64::consts::PI / self.count as f64
    }

    pub fn omegas(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.count).map(move |k| self.omega(k))
    }
}

/// Norm summary of one filter against one model.
#[derive(Debug, Clone)]
pub struct NormReport {
    pub frobenius_sq: f64,
    pub operator_sq: f64,
    pub regret: f64,
    pub argmax_omega: f64,
    /// `(omega, ||T_K(e^{j omega})||^2)` per grid point.
    pub curve: Vec<(f64, f64)>,
}

/// Either a realized filter or the frequency-matched clairvoyant estimator.
#[derive(Clone, Copy)]
pub enum Response<'a> {
    Filter(&'a LtiFilter),
    Clairvoyant,
}

impl Response<'_> {
    /// The error-operator sample `[L - K H, -K]` at `e^{j omega}`.
    fn error_sample(&self, model: &StateSpaceModel, omega: f64) -> Result<CMatrix> {
        let (_, q, m, p) = model.dims();
        let (hw, lw) = eval_plant_channels(model, omega)?;
        let kw = match self {
            Response::Filter(f) => eval_transfer(f, omega)?,
            Response::Clairvoyant => noncausal_from_channels(&hw, &lw)?,
        };
        Ok(error_row(&lw, &hw, &kw, q, m, p))
    }
}

/// Largest singular value of a complex matrix.
pub fn sigma_max_complex(m: &CMatrix) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    m.clone().svd(false, false).singular_values.max()
}

/// Operator norm of a Hermitian matrix: its largest absolute eigenvalue,
/// which equals its largest singular value.
pub fn hermitian_abs_max(m: &CMatrix) -> f64 {
    sigma_max_complex(m)
}

/// Order-independent pairwise summation.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        2 => values[0] + values[1],
        n => pairwise_sum(&values[..n / 2]) + pairwise_sum(&values[n / 2..]),
    }
}

fn trace_gram(t: &CMatrix) -> f64 {
    t.iter().map(|z| z.norm_sqr()).sum()
}

/// Squared Frobenius norm `1/(2pi) * integral of trace(T* T)` by the
/// rectangle rule, refined by grid doubling until stable to 1e-6 relative.
pub fn frobenius_norm_sq(
    model: &StateSpaceModel,
    filt: &LtiFilter,
    grid: &FrequencyGrid,
) -> Result<f64> {
    frobenius_of(model, Response::Filter(filt), grid)
}

pub fn frobenius_of(model: &StateSpaceModel, resp: Response, grid: &FrequencyGrid) -> Result<f64> {
    let mut n = grid.count();
    let mut last = frobenius_at(model, resp, n)?;
    loop {
        if n >= REFINE_CAP {
            return Err(Error::NonConvergedQuadrature);
        }
        n *= 2;
        let next = frobenius_at(model, resp, n)?;
        let change = (next - last).abs() / next.abs().max(1e-300);
        let done = change < REFINE_TOL;
        last = next;
        if done {
            return Ok(last);
        }
    }
}

fn frobenius_at(model: &StateSpaceModel, resp: Response, n: usize) -> Result<f64> {
    let grid = FrequencyGrid { count: n };
    let mut vals = Vec::with_capacity(n);
    for omega in grid.omegas() {
        vals.push(trace_gram(&resp.error_sample(model, omega)?));
    }
    Ok(pairwise_sum(&vals) / n as f64)
}

/// Squared operator norm `max_omega sigma_max(T* T)`: stable grid max, then
/// golden-section refinement around the best grid point.
pub fn operator_norm_sq(
    model: &StateSpaceModel,
    filt: &LtiFilter,
    grid: &FrequencyGrid,
) -> Result<(f64, f64)> {
    operator_of(model, Response::Filter(filt), grid)
}

pub fn operator_of(
    model: &StateSpaceModel,
    resp: Response,
    grid: &FrequencyGrid,
) -> Result<(f64, f64)> {
    let f = |omega: f64| -> Result<f64> {
        Ok(sigma_max_complex(&resp.error_sample(model, omega)?).powi(2))
    };
    refined_max(grid, &f)
}

/// Regret norm `max_omega || T_K* T_K - T_K0* T_K0 ||` together with the
/// regret curve on the requested grid.
pub fn regret_norm(
    model: &StateSpaceModel,
    filt: &LtiFilter,
    grid: &FrequencyGrid,
) -> Result<(f64, Vec<(f64, f64)>)> {
    regret_of(model, Response::Filter(filt), grid)
}

pub fn regret_of(
    model: &StateSpaceModel,
    resp: Response,
    grid: &FrequencyGrid,
) -> Result<(f64, Vec<(f64, f64)>)> {
    let f = |omega: f64| -> Result<f64> {
        let t = resp.error_sample(model, omega)?;
        let t0 = Response::Clairvoyant.error_sample(model, omega)?;
        let diff = t.adjoint() * &t - t0.adjoint() * &t0;
        Ok(hermitian_abs_max(&diff))
    };
    let (value, _argmax) = refined_max(grid, &f)?;
    let mut curve = Vec::with_capacity(grid.count());
    for omega in grid.omegas() {
        curve.push((omega, f(omega)?));
    }
    Ok((value, curve))
}

/// Grid max with doubling until stable, then golden-section refinement.
fn refined_max(grid: &FrequencyGrid, f: &dyn Fn(f64) -> Result<f64>) -> Result<(f64, f64)> {
    let mut n = grid.count();
    let mut best = grid_max(f, n)?.0;
    let (arg, step) = loop {
        if n >= REFINE_CAP {
            return Err(Error::NonConvergedQuadrature);
        }
        n *= 2;
        let (next, next_arg, next_step) = grid_max(f, n)?;
        let change = (next - best).abs() / next.abs().max(1e-300);
        best = next;
        if change < REFINE_TOL {
            break (next_arg, next_step);
        }
    };
    // golden-section around the best grid point
    let inv_phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut a = arg - step;
    let mut b = arg + step;
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    while b - a > GOLDEN_TOL {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = f(x2)?;
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = f(x1)?;
        }
    }
    let mid = 0.5 * (a + b);
    let fm = f(mid)?;
    if fm > best {
        Ok((fm, mid))
    } else {
        Ok((best, arg))
    }
}

fn grid_max(f: &dyn Fn(f64) -> Result<f64>, n: usize) -> Result<(f64, f64, f64)> {
    let grid = FrequencyGrid { count: n };
    let mut best = f64::NEG_INFINITY;
    let mut arg = grid.omega(0);
    for omega in grid.omegas() {
        let v = f(omega)?;
        if v > best {
            best = v;
            arg = omega;
        }
    }
    Ok((best, arg, 2.0 * std::f64::consts::PI / n as f64))
}

/// Full report for one response: the three norms, the peak location and the
/// `||T_K||^2` curve on the requested grid.
pub fn norm_report(model: &StateSpaceModel, resp: Response, grid: &FrequencyGrid) -> Result<NormReport> {
    let frobenius_sq = frobenius_of(model, resp, grid)?;
    let (operator_sq, argmax_omega) = operator_of(model, resp, grid)?;
    let (regret, _) = regret_of(model, resp, grid)?;
    let mut curve = Vec::with_capacity(grid.count());
    for omega in grid.omegas() {
        let v = sigma_max_complex(&resp.error_sample(model, omega)?).powi(2);
        curve.push((omega, v));
    }
    Ok(NormReport { frobenius_sq, operator_sq, regret, argmax_omega, curve })
}

/// Formats a float with 17 significant digits, enough to round-trip f64.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes named curves sharing one omega axis as CSV: header
/// `omega,<name>,...`, 17 significant digits, LF line endings, UTF-8.
pub fn export_curves<W: std::io::Write>(
    out: &mut W,
    names: &[&str],
    curves: &[&[(f64, f64)]],
) -> Result<()> {
    if names.len() != curves.len() {
        return Err(Error::DimensionMismatch("one name per curve".into()));
    }
    let mut header = String::from("omega");
    for name in names {
        header.push(',');
        header.push_str(name);
    }
    header.push('\n');
    out.write_all(header.as_bytes())?;
    let rows = curves.first().map(|c| c.len()).unwrap_or(0);
    for c in curves {
        if c.len() != rows {
            return Err(Error::DimensionMismatch("curves must share the grid".into()));
        }
    }
    for i in 0..rows {
        let mut line = fmt_f64(curves[0][i].0);
        for c in curves {
            line.push(',');
            line.push_str(&fmt_f64(c[i].1));
        }
        line.push('\n');
        out.write_all(line.as_bytes())?;
    }
    Ok(())
}
