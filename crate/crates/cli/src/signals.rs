//! Built-in input signals and table-driven custom inputs.

use std::path::Path;

use anyhow::{bail, Context, Result};
use nalgebra::DVector;

/// Which input drives a simulation.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, serde::Serialize, serde::Deserialize,
)]
#[serde(rename_all = "kebab-case")]
pub enum InputKind {
    /// `u_k(t) = e^{-t}` on every channel.
    Exp,
    /// `u_j(t) = cos(j pi t)` per channel.
    Cos,
    /// Values from a CSV table `t, u_1, ..., u_m`, linearly interpolated.
    Table,
}

/// Piecewise-linear interpolant over tabulated samples, clamped at the
/// ends of the table.
#[derive(Debug, Clone)]
pub struct InputTable {
    times: Vec<f64>,
    values: Vec<Vec<f64>>,
}

impl InputTable {
    pub fn load(path: &Path, m: usize) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut times = Vec::new();
        let mut values = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let nums: Vec<f64> = line
                .split(',')
                .map(|tok| {
                    tok.trim().parse::<f64>().with_context(|| {
                        format!("{}:{}: bad number {tok:?}", path.display(), lineno + 1)
                    })
                })
                .collect::<Result<_>>()?;
            if nums.len() != m + 1 {
                bail!(
                    "{}:{}: expected t plus {m} input values, got {} columns",
                    path.display(),
                    lineno + 1,
                    nums.len()
                );
            }
            times.push(nums[0]);
            values.push(nums[1..].to_vec());
        }
        if times.len() < 2 {
            bail!("{}: input table needs at least two samples", path.display());
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            bail!(
                "{}: table times must be strictly increasing",
                path.display()
            );
        }
        Ok(Self { times, values })
    }

    pub fn eval(&self, t: f64) -> DVector<f64> {
        let m = self.values[0].len();
        if t <= self.times[0] {
            return DVector::from_column_slice(&self.values[0]);
        }
        if t >= *self.times.last().unwrap() {
            return DVector::from_column_slice(self.values.last().unwrap());
        }
        let hi = self.times.partition_point(|&s| s < t).max(1);
        let lo = hi - 1;
        let w = (t - self.times[lo]) / (self.times[hi] - self.times[lo]);
        DVector::from_fn(m, |j, _| {
            (1.0 - w) * self.values[lo][j] + w * self.values[hi][j]
        })
    }
}

/// Builds the input function for `m` channels.
pub fn build_input(
    kind: InputKind,
    m: usize,
    table: Option<InputTable>,
) -> Result<Box<dyn Fn(f64) -> DVector<f64> + Send + Sync>> {
    Ok(match kind {
        InputKind::Exp => Box::new(move |t: f64| DVector::from_element(m, (-t).exp())),
        InputKind::Cos => Box::new(move |t: f64| {
            DVector::from_fn(m, |j, _| ((j + 1) as f64 * core::f64::consts::PI * t).cos())
        }),
        InputKind::Table => {
            let table = table.context("--input table requires --table FILE")?;
            Box::new(move |t: f64| table.eval(t))
        }
    })
}
