//! Time-domain integration of full and reduced systems, plus the output
//! error metrics used to judge reduced models.
//!
//! Integration uses classical fixed-step RK4 from the zero initial state;
//! the input function is evaluated exactly at the RK4 substeps. Bilinear
//! systems can blow up for large inputs or too-coarse steps, so the
//! integrator fails fast once the state norm passes an overflow guard.

use alloc::vec::Vec;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::model::BqoSystem;

/// State-norm guard; beyond this the integration is considered diverged.
pub const STATE_NORM_LIMIT: f64 = 1e12;

/// Sampled solution of a system: time grid, states, and outputs
/// (linear plus quadratic part).
#[derive(Debug, Clone)]
pub struct Trajectory {
    /// Strictly increasing, equidistant time grid including `t = 0`.
    pub times: Vec<f64>,
    /// State vector at every grid point.
    pub states: Vec<DVector<f64>>,
    /// Output vector at every grid point.
    pub outputs: Vec<DVector<f64>>,
}

impl Trajectory {
    /// Keeps every `stride`-th sample (plus the final one when it falls
    /// on the stride), producing the coarser grid a finer integration was
    /// run for.
    pub fn decimate(&self, stride: usize) -> Trajectory {
        let stride = stride.max(1);
        let pick = |i: usize| i.is_multiple_of(stride);
        Trajectory {
            times: self
                .times
                .iter()
                .enumerate()
                .filter(|(i, _)| pick(*i))
                .map(|(_, &t)| t)
                .collect(),
            states: self
                .states
                .iter()
                .enumerate()
                .filter(|(i, _)| pick(*i))
                .map(|(_, s)| s.clone())
                .collect(),
            outputs: self
                .outputs
                .iter()
                .enumerate()
                .filter(|(i, _)| pick(*i))
                .map(|(_, y)| y.clone())
                .collect(),
        }
    }
}

/// Relative output errors between a full and a reduced trajectory.
#[derive(Debug, Clone)]
pub struct ErrorReport {
    /// `||y(t_i) - y_r(t_i)|| / max_i ||y(t_i)||` per grid point.
    pub pointwise_rel: Vec<f64>,
    /// `||Y - Y_r||_F / ||Y||_F` over the stacked output samples.
    pub frobenius_rel: f64,
}

/// Input used by [`unobservability_probe`].
pub enum ProbeInput<'a> {
    /// `u = 0`: the state follows `x' = A x` from `x_0`.
    Zero,
    /// Bounded input driving the homogeneous dynamics
    /// `x' = A x + sum_k N_k x u_k` (no `B u` term).
    Bounded(&'a dyn Fn(f64) -> DVector<f64>),
}

fn rk4<F>(
    sys: &BqoSystem,
    x0: DVector<f64>,
    u: F,
    t_end: f64,
    steps: usize,
    with_b: bool,
) -> Result<Trajectory>
where
    F: Fn(f64) -> DVector<f64>,
{
    let n = sys.n();
    let h = t_end / steps as f64;
    let deriv = |t: f64, x: &DVector<f64>| -> DVector<f64> {
        let uv = u(t);
        let mut dx = sys.a() * x;
        for (k, nk) in sys.ns().iter().enumerate() {
            dx += nk * x * uv[k];
        }
        if with_b {
            dx += sys.b() * uv;
        }
        dx
    };

    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    let mut outputs = Vec::with_capacity(steps + 1);
    let mut x = x0;
    debug_assert_eq!(x.len(), n);
    for i in 0..=steps {
        let t = i as f64 * h;
        if !x.iter().all(|v| v.is_finite()) || x.norm() > STATE_NORM_LIMIT {
            return Err(Error::NonFiniteState { time: t });
        }
        times.push(t);
        outputs.push(sys.output(&x));
        states.push(x.clone());
        if i == steps {
            break;
        }
        let k1 = deriv(t, &x);
        let k2 = deriv(t + 0.5 * h, &(&x + &k1 * (0.5 * h)));
        let k3 = deriv(t + 0.5 * h, &(&x + &k2 * (0.5 * h)));
        let k4 = deriv(t + h, &(&x + &k3 * h));
        x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
    }
    Ok(Trajectory {
        times,
        states,
        outputs,
    })
}

/// Integrates the system from the zero initial state on an equidistant
/// grid of `steps` RK4 steps over `[0, t_end]`.
pub fn simulate<F>(sys: &BqoSystem, u: F, t_end: f64, steps: usize) -> Result<Trajectory>
where
    F: Fn(f64) -> DVector<f64>,
{
    if steps == 0 || t_end <= 0.0 || t_end.is_nan() {
        return Err(Error::InvalidOptions {
            what: alloc::format!("need steps >= 1 and t_end > 0, got {steps} and {t_end}"),
        });
    }
    rk4(sys, DVector::zeros(sys.n()), u, t_end, steps, true)
}

/// Simulates from `x0` with the `B u` term removed and records the
/// supremum of the output norm over the grid.
///
/// With `x0` in the kernel of the standard observability Gramian the
/// output stays numerically zero for any bounded input; for the
/// alternative Gramian the same holds only for zero input, because the
/// bilinear coupling can push kernel states into observable directions.
pub fn unobservability_probe(
    sys: &BqoSystem,
    x0: &DVector<f64>,
    input: ProbeInput<'_>,
    t_end: f64,
    steps: usize,
) -> Result<f64> {
    if x0.len() != sys.n() {
        return Err(Error::ShapeMismatch {
            what: alloc::format!("x0 must have length {}, got {}", sys.n(), x0.len()),
        });
    }
    let m = sys.m();
    let traj = match input {
        ProbeInput::Zero => rk4(sys, x0.clone(), |_| DVector::zeros(m), t_end, steps, false)?,
        ProbeInput::Bounded(u) => rk4(sys, x0.clone(), u, t_end, steps, false)?,
    };
    Ok(traj.outputs.iter().map(|y| y.norm()).fold(0.0, f64::max))
}

/// Richardson-style step-refinement ratio for the RK4 integrator.
///
/// Simulates with `steps`, `2 * steps`, and `4 * steps` and returns
/// `||y_h - y_{h/2}|| / ||y_{h/2} - y_{h/4}||` over the shared coarse
/// grid. For a smooth input in the asymptotic regime the ratio
/// approaches `2^4 = 16`, confirming fourth-order convergence; ratios
/// near 1 signal that the step is too coarse for the dynamics.
pub fn step_refinement_ratio<F>(sys: &BqoSystem, u: F, t_end: f64, steps: usize) -> Result<f64>
where
    F: Fn(f64) -> DVector<f64> + Copy,
{
    let coarse = simulate(sys, u, t_end, steps)?;
    let mid = simulate(sys, u, t_end, steps * 2)?.decimate(2);
    let fine = simulate(sys, u, t_end, steps * 4)?.decimate(4);
    let dist = |a: &Trajectory, b: &Trajectory| -> f64 {
        a.outputs
            .iter()
            .zip(&b.outputs)
            .map(|(y, z)| (y - z).norm_squared())
            .sum::<f64>()
    };
    let upper = nalgebra::ComplexField::sqrt(dist(&coarse, &mid));
    let lower = nalgebra::ComplexField::sqrt(dist(&mid, &fine));
    if lower == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(upper / lower)
}

/// Pointwise and Frobenius output errors of `reduced` against `full`.
/// The trajectories must share the exact same time grid.
pub fn error_metrics(full: &Trajectory, reduced: &Trajectory) -> Result<ErrorReport> {
    if full.times.len() != reduced.times.len()
        || full.times.iter().zip(&reduced.times).any(|(a, b)| a != b)
    {
        return Err(Error::GridMismatch);
    }
    let max_norm = full.outputs.iter().map(|y| y.norm()).fold(0.0, f64::max);
    let denom = if max_norm > 0.0 { max_norm } else { 1.0 };
    let pointwise_rel: Vec<f64> = full
        .outputs
        .iter()
        .zip(&reduced.outputs)
        .map(|(y, yr)| (y - yr).norm() / denom)
        .collect();
    let mut diff_sq = 0.0;
    let mut full_sq = 0.0;
    for (y, yr) in full.outputs.iter().zip(&reduced.outputs) {
        diff_sq += (y - yr).norm_squared();
        full_sq += y.norm_squared();
    }
    let frobenius_rel = if full_sq > 0.0 {
        nalgebra::ComplexField::sqrt(diff_sq / full_sq)
    } else if diff_sq > 0.0 {
        f64::INFINITY
    } else {
        0.0
    };
    Ok(ErrorReport {
        pointwise_rel,
        frobenius_rel,
    })
}
