//! Control paths `k ∈ L²([0,T])` and Brownian noise paths.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::NormalStream;
use crate::trajectory::fmt17;

/// Piecewise-constant control: `values[j]` on `[grid[j], grid[j+1])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Control {
    grid: Vec<f64>,
    values: Vec<f64>,
}

impl Control {
    pub fn new(grid: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if grid.len() < 2 || values.len() + 1 != grid.len() {
            return Err(Error::config(format!(
                "control needs len(values) + 1 == len(grid) >= 2, got {} values on {} points",
                values.len(),
                grid.len()
            )));
        }
        if grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::config("control grid must be strictly increasing"));
        }
        if values.iter().chain(&grid).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("Control::new"));
        }
        Ok(Self { grid, values })
    }

    /// `value` on `pieces` equal subintervals of `[0, horizon]`.
    pub fn constant(horizon: f64, pieces: usize, value: f64) -> Result<Self> {
        let grid = uniform_grid(horizon, pieces.max(1));
        let n = grid.len() - 1;
        Self::new(grid, vec![value; n])
    }

    pub fn zero(horizon: f64, pieces: usize) -> Result<Self> {
        Self::constant(horizon, pieces, 0.0)
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn horizon(&self) -> f64 {
        *self.grid.last().unwrap()
    }

    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::new(self.grid.clone(), values)
    }

    /// Value at time `t` (right-continuous; the last piece extends to `T`).
    pub fn value_at(&self, t: f64) -> f64 {
        let j = self.grid.partition_point(|&s| s <= t).saturating_sub(1);
        self.values[j.min(self.values.len() - 1)]
    }

    /// Exact `∫_a^b k(s) ds` for `[a, b]` inside the control grid.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        self.values
            .iter()
            .zip(self.grid.windows(2))
            .map(|(k, w)| k * (w[1].min(b) - w[0].max(a)).max(0.0))
            .sum()
    }

    /// Cell averages on `target`; finer controls are averaged per cell.
    pub fn resample(&self, target: &[f64]) -> Result<Vec<f64>> {
        let (lo, hi) = (self.grid[0], self.horizon());
        let tol = 1e-9 * hi.abs().max(1.0);
        if target.len() < 2 || target[0] < lo - tol || *target.last().unwrap() > hi + tol {
            return Err(Error::GridMismatch(format!(
                "control on [{lo}, {hi}] does not cover the solver grid"
            )));
        }
        Ok(target
            .windows(2)
            .map(|w| self.integral(w[0], w[1]) / (w[1] - w[0]))
            .collect())
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = writer;
        writeln!(w, "t,k")?;
        for (t, k) in self.grid.iter().zip(self.values.iter().chain(self.values.last())) {
            writeln!(w, "{},{}", fmt17(*t), fmt17(*k))?;
        }
        Ok(())
    }

    /// Reads the `t,k` format; the value on the final row is ignored.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let mut grid = Vec::new();
        let mut values = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(|e| Error::Parse {
                line: e.position().map_or(0, |p| p.line()),
                message: e.to_string(),
            })?;
            let line = rec.position().map_or(0, |p| p.line());
            let parse = |i: usize| -> Result<f64> {
                rec.get(i)
                    .ok_or_else(|| Error::Parse { line, message: "missing field".into() })?
                    .trim()
                    .parse()
                    .map_err(|e| Error::Parse { line, message: format!("{e}") })
            };
            grid.push(parse(0)?);
            values.push(parse(1)?);
        }
        values.pop();
        Self::new(grid, values)
    }
}

/// `∫_0^T k(s)^2 ds`, exact for piecewise constants. Callers halve it for the
/// rate functional.
pub fn control_energy(k: &Control) -> f64 {
    k.values
        .iter()
        .zip(k.grid.windows(2))
        .map(|(v, w)| v * v * (w[1] - w[0]))
        .sum()
}

/// Membership in `S_N = {k : ∫ k² ≤ N}`.
pub fn in_sn(k: &Control, n: f64) -> bool {
    control_energy(k) <= n
}

/// `k^ε(t) = base(t) + amplitude · sin(t/ε)`, cell-averaged on the base grid.
///
/// The cell averages use the exact antiderivative, so `∫ k^ε φ` against any
/// piecewise-constant `φ` on the same grid is reproduced without quadrature
/// error. As `ε → 0` the family converges weakly, not strongly, to `base`.
pub fn oscillatory_family(base: &Control, amplitude: f64, eps: f64) -> Result<Control> {
    if !(eps > 0.0) {
        return Err(Error::config("oscillation period eps must be positive"));
    }
    let values = base
        .values
        .iter()
        .zip(base.grid.windows(2))
        .map(|(k, w)| {
            let avg_sin = eps * ((w[0] / eps).cos() - (w[1] / eps).cos()) / (w[1] - w[0]);
            k + amplitude * avg_sin
        })
        .collect();
    Control::new(base.grid.clone(), values)
}

/// Brownian increments on a solver grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoisePath {
    pub grid: Vec<f64>,
    pub increments: Vec<f64>,
    pub seed: u64,
}

impl NoisePath {
    /// `W(t_j)` for every grid point.
    pub fn path(&self) -> Vec<f64> {
        let mut w = Vec::with_capacity(self.grid.len());
        let mut acc = 0.0;
        w.push(acc);
        for dw in &self.increments {
            acc += dw;
            w.push(acc);
        }
        w
    }

    pub fn terminal(&self) -> f64 {
        self.increments.iter().sum()
    }
}

/// Independent `Normal(0, Δt_j)` increments; increment `j` depends only on
/// `(seed, j)`.
pub fn sample_noise(grid: &[f64], seed: u64) -> Result<NoisePath> {
    if grid.len() < 2 || grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::config("noise grid must be strictly increasing with at least two points"));
    }
    let mut stream = NormalStream::new(seed);
    let increments = grid
        .windows(2)
        .map(|w| (w[1] - w[0]).sqrt() * stream.next_normal())
        .collect();
    Ok(NoisePath { grid: grid.to_vec(), increments, seed })
}

/// `M + 1` equally spaced points on `[0, horizon]`.
pub fn uniform_grid(horizon: f64, steps: usize) -> Vec<f64> {
    (0..=steps).map(|j| horizon * j as f64 / steps as f64).collect()
}
