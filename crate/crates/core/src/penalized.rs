//! Time stepping for the penalized equation
//!
//! ```text
//! du + Au dt = f(u) dt + B(u,u) dt + σ(u) k dt + √ε σ(u) dW - n (u - π(u)) dt
//! ```
//!
//! One step is a Lie splitting: a linearly implicit (or explicit) step for
//! the `A` term with all other coefficients frozen at the pre-step state,
//! followed by an exact backward-Euler solve of the radial penalty field.
//! For an intermediate state `v` with `|v| > 1` the penalty substep is
//!
//! ```text
//! r_next = (|v| + dt·n) / (1 + dt·n),    u_next = r_next · v / |v|
//! ```
//!
//! and the local-time increment is the displacement `ΔL = u_next - v`,
//! attached to the post-step time.

use serde::{Deserialize, Serialize};

use crate::controls::{uniform_grid, Control, NoisePath};
use crate::dynamics::{eval_f, eval_sigma, ModelSpec};
use crate::error::{Error, Result};
use crate::report::{ExperimentReport, Relation};
use crate::space::{ball_defect_norm, v_norm_sq, SpaceConfig, SpectralVector};
use crate::trajectory::Trajectory;

/// States larger than this are treated as blow-up.
const BLOW_UP_NORM: f64 = 1e8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// `(I + dt A)^{-1}` applied to the explicit right-hand side.
    #[default]
    SemiImplicitA,
    /// Forward Euler in `A`; requires `dt · λ_max < 2`.
    Explicit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepperConfig {
    pub dt: f64,
    pub horizon: f64,
    pub penalty_n: f64,
    #[serde(default)]
    pub scheme: Scheme,
}

impl StepperConfig {
    pub fn new(dt: f64, horizon: f64, penalty_n: f64, scheme: Scheme) -> Self {
        Self { dt, horizon, penalty_n, scheme }
    }

    pub fn with_penalty(&self, n: f64) -> Self {
        Self { penalty_n: n, ..self.clone() }
    }

    pub fn with_dt(&self, dt: f64) -> Self {
        Self { dt, ..self.clone() }
    }

    pub fn validate(&self, space: &SpaceConfig) -> Result<()> {
        for (name, v) in [("dt", self.dt), ("horizon", self.horizon), ("penalty_n", self.penalty_n)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(format!("{name} must be a positive finite real, got {v}")));
            }
        }
        let steps = (self.horizon / self.dt).round();
        if steps < 1.0 || (steps * self.dt - self.horizon).abs() > 1e-9 * self.horizon {
            return Err(Error::config(format!(
                "horizon {} is not an integer multiple of dt {}",
                self.horizon, self.dt
            )));
        }
        if self.scheme == Scheme::Explicit && self.dt * space.lambda_max() >= 2.0 {
            return Err(Error::config(format!(
                "explicit scheme unstable: dt·λ_max = {} ≥ 2",
                self.dt * space.lambda_max()
            )));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }

    pub fn grid(&self) -> Vec<f64> {
        uniform_grid(self.horizon, self.steps())
    }

    /// Stability bookkeeping: `dt · λ_max`.
    pub fn stiffness(&self, space: &SpaceConfig) -> f64 {
        self.dt * space.lambda_max()
    }

    /// Allowed overshoot of penalized output beyond the unit ball:
    /// `2/n + 2·dt·drift_bound`.
    pub fn tol_reflect(&self, drift_bound: f64) -> f64 {
        2.0 / self.penalty_n + 2.0 * self.dt * drift_bound
    }
}

/// One step; returns `(u_next, ΔL)`.
pub fn step_penalized(
    u: &SpectralVector,
    k_val: f64,
    dw: Option<f64>,
    eps: f64,
    cfg: &StepperConfig,
    m: &ModelSpec,
) -> Result<(SpectralVector, SpectralVector)> {
    m.space.check_dim(u)?;
    let dt = cfg.dt;
    let mut rhs = u.clone();
    rhs.axpy(dt, &eval_f(&m.drift, u)?);
    if !m.form.is_zero() {
        rhs.axpy(dt, &m.form.apply(u, u)?);
    }
    let noise = dw.map_or(0.0, |w| eps.sqrt() * w);
    if (k_val != 0.0 || noise != 0.0) && !m.diffusion.is_zero() {
        let s = eval_sigma(&m.diffusion, u)?;
        rhs.axpy(dt * k_val + noise, &s);
    }
    let lambdas = m.space.eigenvalues();
    let v = SpectralVector::from_vec_unchecked(match cfg.scheme {
        Scheme::SemiImplicitA => rhs
            .coeffs()
            .iter()
            .zip(lambdas)
            .map(|(r, l)| r / (1.0 + dt * l))
            .collect(),
        Scheme::Explicit => rhs
            .coeffs()
            .iter()
            .zip(u.coeffs().iter().zip(lambdas))
            .map(|(r, (x, l))| r - dt * l * x)
            .collect(),
    });
    if !v.is_finite() {
        return Err(Error::NonFinite("penalized step"));
    }

    let r = v.norm();
    if r <= 1.0 {
        let zero = SpectralVector::zeros(v.dim());
        return Ok((v, zero));
    }
    let dtn = dt * cfg.penalty_n;
    let r_next = (r + dtn) / (1.0 + dtn);
    let u_next = v.scaled(r_next / r);
    let increment = &u_next - &v;
    Ok((u_next, increment))
}

/// Full penalized trajectory. Noise is used only when `eps > 0`.
pub fn solve_penalized(
    m: &ModelSpec,
    cfg: &StepperConfig,
    control: &Control,
    noise: Option<&NoisePath>,
    eps: f64,
) -> Result<Trajectory> {
    cfg.validate(&m.space)?;
    if !(eps >= 0.0 && eps.is_finite()) {
        return Err(Error::config(format!("noise level must be nonnegative, got {eps}")));
    }
    let grid = cfg.grid();
    let k_vals = control.resample(&grid)?;
    let increments = match (eps > 0.0, noise) {
        (false, _) => None,
        (true, Some(w)) => {
            if w.grid.len() != grid.len() || w.grid.iter().zip(&grid).any(|(a, b)| (a - b).abs() > 1e-12) {
                return Err(Error::GridMismatch("noise path grid differs from solver grid".into()));
            }
            Some(&w.increments)
        }
        (true, None) => return Err(Error::config("eps > 0 requires a noise path")),
    };

    let steps = grid.len() - 1;
    let mut states = Vec::with_capacity(steps + 1);
    let mut dls = Vec::with_capacity(steps);
    states.push(m.u0.clone());
    for j in 0..steps {
        let u = &states[j];
        let dw = increments.map(|inc| inc[j]);
        let blow_up = |u: &SpectralVector| Error::BlowUp {
            step: j,
            time: grid[j],
            h_norm: u.norm(),
            v_norm: v_norm_sq(u, &m.space).map_or(f64::NAN, f64::sqrt),
        };
        let (next, dl) = match step_penalized(u, k_vals[j], dw, eps, cfg, m) {
            Ok(x) => x,
            Err(Error::NonFinite(_)) => return Err(blow_up(u)),
            Err(e) => return Err(e),
        };
        if next.norm() > BLOW_UP_NORM {
            return Err(blow_up(&next));
        }
        states.push(next);
        dls.push(dl);
    }
    Ok(Trajectory {
        grid,
        states,
        local_time_increments: Some(dls),
        control_values: Some(k_vals),
    })
}

/// Penalty-side estimates of a penalized run: `sup |u|⁴`, `n∫|u-π(u)|`,
/// `sup |u-π(u)|`, `n∫|u-π(u)|²` and the total variation of `L`.
pub fn penalty_diagnostics(traj: &Trajectory, cfg: &StepperConfig) -> ExperimentReport {
    let mut report = ExperimentReport::new("penalty-diagnostics");
    report.context("penalty_n", cfg.penalty_n);
    let n = cfg.penalty_n;
    let defects: Vec<f64> = traj.states.iter().map(ball_defect_norm).collect();
    let defects_sq: Vec<f64> = defects.iter().map(|d| d * d).collect();
    let sup_u4 = traj.states.iter().map(|u| u.norm_sq().powi(2)).fold(0.0, f64::max);
    let sup_defect = defects.iter().copied().fold(0.0, f64::max);
    let work = n * crate::space::trapezoid(&traj.grid, &defects);
    let work_sq = n * crate::space::trapezoid(&traj.grid, &defects_sq);
    let variation = traj.local_time_variation();
    report.metric("sup_u4", sup_u4);
    report.metric("penalty_work", work);
    report.metric("sup_defect", sup_defect);
    report.metric("penalty_work_sq", work_sq);
    report.metric("local_time_variation", variation);
    report.check_bool(
        "diagnostics_finite",
        [sup_u4, work, sup_defect, work_sq, variation].iter().all(|x| x.is_finite()),
    );
    report
}

/// `max_t |u(t)| - 1` checked against the reflection tolerance.
pub fn check_reflect_tolerance(report: &mut ExperimentReport, traj: &Trajectory, tol: f64) {
    let overshoot = traj.states.iter().map(|u| u.norm() - 1.0).fold(f64::NEG_INFINITY, f64::max);
    report.check("max_overshoot", overshoot, Relation::AtMost, tol);
}
