//! Rate function of target events by control optimization, rare-event Monte
//! Carlo, and the two sufficient conditions for the small-noise limit.
//!
//! The rate of an event `F` is `inf {½∫k² : u^k ∈ F}`. It is computed with an
//! exterior penalty `½Σk_j²Δt_j + ρ|r(k)|²`, where `r` is the residual vector
//! of the event, minimized by Gauss–Newton steps with a central
//! finite-difference Jacobian and continued over an increasing `ρ` schedule.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::controls::{control_energy, in_sn, sample_noise, uniform_grid, Control};
use crate::dynamics::ModelSpec;
use crate::error::{Error, Result};
use crate::penalized::StepperConfig;
use crate::reflected::{reflected_path, sample_small_noise};
use crate::report::{ExperimentReport, Relation};
use crate::rng::{derive_seed, NormalStream};
use crate::skeleton::{gamma0, weak_continuity_probe, ProbeSettings};
use crate::space::{h_inner, xt_distance, SpectralVector};
use crate::trajectory::Trajectory;

/// Largest control discretization accepted by [`evaluate_rate`].
pub const MAX_CONTROL_PIECES: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum EventKind {
    /// `|u(T) - center| ≤ radius`.
    TerminalBall { center: SpectralVector, radius: f64 },
    /// `(u(T), normal) ≥ level`.
    TerminalHalfspace { normal: SpectralVector, level: f64 },
    /// `max_t (u(t), direction) ≥ level`.
    SupExceedance { direction: SpectralVector, level: f64 },
}

/// A set of trajectories, `{u : |r(u)| ≤ tolerance}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetEvent {
    #[serde(flatten)]
    pub kind: EventKind,
    pub tolerance: f64,
}

impl TargetEvent {
    pub fn terminal_ball(center: SpectralVector, radius: f64, tolerance: f64) -> Self {
        Self { kind: EventKind::TerminalBall { center, radius }, tolerance }
    }

    pub fn terminal_halfspace(normal: SpectralVector, level: f64, tolerance: f64) -> Self {
        Self { kind: EventKind::TerminalHalfspace { normal, level }, tolerance }
    }

    pub fn sup_exceedance(direction: SpectralVector, level: f64, tolerance: f64) -> Self {
        Self { kind: EventKind::SupExceedance { direction, level }, tolerance }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        let (v, x) = match &self.kind {
            EventKind::TerminalBall { center, radius } => (center, *radius),
            EventKind::TerminalHalfspace { normal, level } => (normal, *level),
            EventKind::SupExceedance { direction, level } => (direction, *level),
        };
        if v.dim() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: v.dim() });
        }
        if !x.is_finite() || !(self.tolerance >= 0.0) {
            return Err(Error::config("event parameters must be finite with a nonnegative tolerance"));
        }
        if let EventKind::TerminalBall { radius, .. } = &self.kind {
            if *radius < 0.0 {
                return Err(Error::config("terminal ball radius must be nonnegative"));
            }
        }
        Ok(())
    }

    /// Deficit of the defining functional; zero inside the event.
    pub fn residual(&self, traj: &Trajectory) -> Result<Vec<f64>> {
        match &self.kind {
            EventKind::TerminalBall { center, radius } => {
                let diff = traj.terminal() - center;
                let dist = diff.norm();
                if dist <= *radius {
                    Ok(vec![0.0; diff.dim()])
                } else {
                    Ok(diff.scaled(1.0 - radius / dist).into_inner())
                }
            }
            EventKind::TerminalHalfspace { normal, level } => {
                Ok(vec![(level - h_inner(traj.terminal(), normal)?).max(0.0)])
            }
            EventKind::SupExceedance { direction, level } => {
                let mut best = f64::NEG_INFINITY;
                for u in &traj.states {
                    best = best.max(h_inner(u, direction)?);
                }
                Ok(vec![(level - best).max(0.0)])
            }
        }
    }

    pub fn distance(&self, traj: &Trajectory) -> Result<f64> {
        Ok(self.residual(traj)?.iter().map(|r| r * r).sum::<f64>().sqrt())
    }

    pub fn contains(&self, traj: &Trajectory) -> Result<bool> {
        Ok(self.distance(traj)? <= self.tolerance)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerSettings {
    pub rho_schedule: Vec<f64>,
    pub starts: usize,
    /// Gauss–Newton iterations per `ρ`.
    pub max_iterations: usize,
    /// Relative central-difference step.
    pub fd_step: f64,
    /// Control pieces; `None` uses the solver grid.
    pub control_pieces: Option<usize>,
    /// Standard deviation of the random starts.
    pub start_scale: f64,
    pub seed: u64,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        Self {
            rho_schedule: vec![1e1, 1e2, 1e3, 1e4],
            starts: 8,
            max_iterations: 40,
            fd_step: 1e-4,
            control_pieces: None,
            start_scale: 1.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateResult {
    pub optimal_control: Control,
    /// `½∫k²` of `optimal_control`; infinite when no start is feasible.
    pub rate_value: f64,
    pub constraint_residual: f64,
    pub iterations: usize,
    pub feasible: bool,
    pub best_start: usize,
    /// Penalized objective reached by every start, in start order.
    pub start_rates: Vec<f64>,
    pub seed: u64,
}

impl RateResult {
    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(self)
    }
}

struct Problem<'a> {
    m: &'a ModelSpec,
    cfg: &'a StepperConfig,
    event: &'a TargetEvent,
    grid: Vec<f64>,
    widths: Vec<f64>,
}

impl Problem<'_> {
    fn control(&self, k: &DVector<f64>) -> Result<Control> {
        Control::new(self.grid.clone(), k.iter().copied().collect())
    }

    fn residual(&self, k: &DVector<f64>) -> Result<DVector<f64>> {
        let traj = gamma0(self.m, self.cfg, &self.control(k)?)?;
        Ok(DVector::from_vec(self.event.residual(&traj)?))
    }

    fn energy(&self, k: &DVector<f64>) -> f64 {
        0.5 * k.iter().zip(&self.widths).map(|(x, w)| x * x * w).sum::<f64>()
    }

    fn objective(&self, k: &DVector<f64>, rho: f64) -> Result<(f64, DVector<f64>)> {
        let r = self.residual(k)?;
        Ok((self.energy(k) + rho * r.norm_squared(), r))
    }

    fn jacobian(&self, k: &DVector<f64>, rows: usize, step: f64) -> Result<DMatrix<f64>> {
        let cols = (0..k.len())
            .into_par_iter()
            .map(|j| -> Result<DVector<f64>> {
                let h = step * k[j].abs().max(1.0);
                let mut plus = k.clone();
                plus[j] += h;
                let mut minus = k.clone();
                minus[j] -= h;
                Ok((self.residual(&plus)? - self.residual(&minus)?) / (2.0 * h))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut jac = DMatrix::zeros(rows, k.len());
        for (j, c) in cols.iter().enumerate() {
            jac.set_column(j, c);
        }
        Ok(jac)
    }

    /// Penalty continuation from one start; returns the final control and
    /// the iteration count.
    fn minimize(&self, mut k: DVector<f64>, opt: &OptimizerSettings) -> Result<(DVector<f64>, usize)> {
        let d = DVector::from_vec(self.widths.clone());
        let mut iterations = 0;
        for &rho in &opt.rho_schedule {
            let (mut phi, mut r) = self.objective(&k, rho)?;
            for _ in 0..opt.max_iterations {
                iterations += 1;
                let jac = self.jacobian(&k, r.len(), opt.fd_step)?;
                let grad = d.component_mul(&k) + jac.transpose() * &r * (2.0 * rho);
                let mut hess = jac.transpose() * &jac * (2.0 * rho);
                for (i, w) in self.widths.iter().enumerate() {
                    hess[(i, i)] += w;
                }
                let Some(chol) = hess.cholesky() else { break };
                let delta = -chol.solve(&grad);
                let slope = grad.dot(&delta);
                if !(slope < 0.0) {
                    break;
                }
                let mut alpha = 1.0;
                let mut accepted = None;
                for _ in 0..30 {
                    let trial = &k + &delta * alpha;
                    let (phi_t, r_t) = self.objective(&trial, rho)?;
                    if phi_t <= phi + 1e-4 * alpha * slope {
                        accepted = Some((trial, phi_t, r_t));
                        break;
                    }
                    alpha *= 0.5;
                }
                let Some((trial, phi_t, r_t)) = accepted else { break };
                let step = (alpha * delta.amax()) / k.amax().max(1.0);
                let gain = phi - phi_t;
                k = trial;
                phi = phi_t;
                r = r_t;
                if step < 1e-10 || gain <= 1e-14 * (1.0 + phi) {
                    break;
                }
            }
        }
        Ok((k, iterations))
    }
}

/// Approximate rate of `event` for the deterministic controlled dynamics.
///
/// Start 0 is `k ≡ 0`; the others are seeded Gaussian controls. The result
/// is the feasible start (`|r| ≤ event.tolerance`) of least energy, ties to
/// the lowest index.
pub fn evaluate_rate(m: &ModelSpec, cfg: &StepperConfig, event: &TargetEvent, opt: &OptimizerSettings) -> Result<RateResult> {
    event.validate(m.dim())?;
    cfg.validate(&m.space)?;
    let pieces = opt.control_pieces.unwrap_or_else(|| cfg.steps());
    if pieces == 0 || pieces > MAX_CONTROL_PIECES {
        return Err(Error::config(format!(
            "control discretization must have 1..={MAX_CONTROL_PIECES} pieces, got {pieces}"
        )));
    }
    if opt.starts == 0 || opt.rho_schedule.is_empty() || opt.rho_schedule.iter().any(|r| !(*r > 0.0)) {
        return Err(Error::config("optimizer needs at least one start and a positive penalty schedule"));
    }
    let grid = uniform_grid(cfg.horizon, pieces);
    let widths = grid.windows(2).map(|w| w[1] - w[0]).collect();
    let problem = Problem { m, cfg, event, grid, widths };

    let runs = (0..opt.starts)
        .into_par_iter()
        .map(|s| -> Result<(DVector<f64>, usize, f64, f64)> {
            let start = if s == 0 {
                DVector::zeros(pieces)
            } else {
                let mut g = NormalStream::new(derive_seed(opt.seed, s as u64));
                DVector::from_fn(pieces, |_, _| opt.start_scale * g.next_normal())
            };
            let (k, iters) = problem.minimize(start, opt)?;
            let residual = problem.residual(&k)?.norm();
            Ok((k.clone(), iters, problem.energy(&k), residual))
        })
        .collect::<Result<Vec<_>>>()?;

    let iterations = runs.iter().map(|r| r.1).sum();
    let start_rates = runs.iter().map(|r| r.2).collect();
    let best = runs
        .iter()
        .enumerate()
        .filter(|(_, r)| r.3 <= event.tolerance)
        .min_by(|a, b| a.1 .2.total_cmp(&b.1 .2).then(a.0.cmp(&b.0)))
        .map(|(i, _)| i);
    let (best_start, feasible) = match best {
        Some(i) => (i, true),
        None => {
            let i = (0..runs.len()).min_by(|&a, &b| runs[a].3.total_cmp(&runs[b].3)).unwrap();
            (i, false)
        }
    };
    let (k, _, _, residual) = &runs[best_start];
    let optimal_control = problem.control(k)?;
    let rate_value = if feasible { control_energy(&optimal_control) / 2.0 } else { f64::INFINITY };
    Ok(RateResult {
        optimal_control,
        rate_value,
        constraint_residual: *residual,
        iterations,
        feasible,
        best_start,
        start_rates,
        seed: opt.seed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub stderr: f64,
    pub hits: usize,
    pub samples: usize,
    /// One-sided 95% bound `3/samples`, reported when there are no hits.
    pub upper_bound: Option<f64>,
}

/// Frequency of `event` over independent small-noise paths; sample `i` uses
/// the seed `derive_seed(seed, i)`.
pub fn mc_probability(
    m: &ModelSpec,
    cfg: &StepperConfig,
    event: &TargetEvent,
    eps: f64,
    samples: usize,
    seed: u64,
) -> Result<McEstimate> {
    event.validate(m.dim())?;
    if samples < 100 {
        return Err(Error::config(format!("at least 100 samples required, got {samples}")));
    }
    if !(eps > 0.0) {
        return Err(Error::config("noise level must be positive"));
    }
    let hits = (0..samples)
        .into_par_iter()
        .map(|i| -> Result<bool> {
            let traj = sample_small_noise(m, cfg, eps, derive_seed(seed, i as u64))?;
            event.contains(&traj)
        })
        .collect::<Result<Vec<bool>>>()?
        .into_iter()
        .filter(|h| *h)
        .count();
    let p = hits as f64 / samples as f64;
    Ok(McEstimate {
        estimate: p,
        stderr: (p * (1.0 - p) / samples as f64).sqrt(),
        hits,
        samples,
        upper_bound: (hits == 0).then(|| 3.0 / samples as f64),
    })
}

/// Weighted least-squares line `y = a + b·x`; returns `(a, b)`.
fn weighted_line(x: &[f64], y: &[f64], w: &[f64]) -> (f64, f64) {
    let sw: f64 = w.iter().sum();
    let mx = x.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let my = y.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let sxx: f64 = x.iter().zip(w).map(|(a, b)| b * (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).zip(w).map(|((a, c), b)| b * (a - mx) * (c - my)).sum();
    if sxx > 0.0 {
        let slope = sxy / sxx;
        (my - slope * mx, slope)
    } else {
        (my, 0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeFitSettings {
    pub samples_per_eps: usize,
    pub seed: u64,
    pub rel_tol: f64,
    /// Floor of the denominator in the relative error.
    pub abs_floor: f64,
}

impl Default for SlopeFitSettings {
    fn default() -> Self {
        Self { samples_per_eps: 10_000, seed: 0, rel_tol: 0.25, abs_floor: 1e-3 }
    }
}

/// Fits `ε log P̂(ε)` against `ε` and compares the intercept with the
/// optimized rate of the event.
pub fn ldp_slope_fit(
    m: &ModelSpec,
    cfg: &StepperConfig,
    event: &TargetEvent,
    eps_list: &[f64],
    settings: &SlopeFitSettings,
    opt: &OptimizerSettings,
) -> Result<ExperimentReport> {
    if eps_list.is_empty() || eps_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::config("eps_list must be strictly decreasing"));
    }
    let mut report = ExperimentReport::new("ldp-slope");
    report.context("seed", settings.seed);
    report.context("samples_per_eps", settings.samples_per_eps);
    let rate = evaluate_rate(m, cfg, event, opt)?;
    report.metric("rate", rate.rate_value);
    report.metric("rate_residual", rate.constraint_residual);

    let n = settings.samples_per_eps as f64;
    let (mut xs, mut ys, mut ws) = (Vec::new(), Vec::new(), Vec::new());
    for (i, &eps) in eps_list.iter().enumerate() {
        let est = mc_probability(m, cfg, event, eps, settings.samples_per_eps, derive_seed(settings.seed, i as u64))?;
        report.context(format!("eps_{i}"), eps);
        report.metric(format!("probability_{i}"), est.estimate);
        report.metric(format!("stderr_{i}"), est.stderr);
        if est.hits == 0 {
            continue;
        }
        let y = eps * est.estimate.ln();
        let se = (eps * est.stderr / est.estimate).max(eps / n);
        report.metric(format!("eps_log_p_{i}"), y);
        xs.push(eps);
        ys.push(y);
        ws.push(1.0 / (se * se));
    }
    if !report.check_bool("all_estimates_positive", xs.len() == eps_list.len()) {
        report.note("needs smaller event or more samples");
    }
    if xs.is_empty() {
        return Ok(report);
    }
    let (intercept, slope) = weighted_line(&xs, &ys, &ws);
    let fitted = -intercept;
    report.metric("fit_intercept", intercept);
    report.metric("fit_slope", slope);
    report.metric("fitted_rate", fitted);
    report.metric("smallest_eps_rate", -ys[ys.len() - 1]);
    let denom = rate.rate_value.max(settings.abs_floor);
    report.check("relative_error", (fitted - rate.rate_value).abs() / denom, Relation::AtMost, settings.rel_tol);
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionISettings {
    pub samples: usize,
    pub seed: u64,
    pub delta: f64,
    /// Required frequency bound at the smallest `ε`.
    pub floor: f64,
    /// Declared `N` of the family's `S_N`.
    pub energy_bound: f64,
}

/// Frequency of `|u^{ε,k^ε} - u^{k^ε}|_{X_T} > delta` for the shifted
/// equation driven by both `k^ε dt` and `√ε dW`.
///
/// `k_family` holds one control per `ε`, or a single control used for all.
/// Sample `i` uses the same noise seed for every `ε`.
pub fn verify_condition_i(
    m: &ModelSpec,
    cfg: &StepperConfig,
    k_family: &[Control],
    eps_list: &[f64],
    settings: &ConditionISettings,
) -> Result<ExperimentReport> {
    if k_family.len() != eps_list.len() && k_family.len() != 1 {
        return Err(Error::config("k_family must have one control per eps or exactly one"));
    }
    if eps_list.is_empty() || eps_list.iter().any(|e| !(*e >= 0.0)) {
        return Err(Error::config("eps_list must be nonempty and nonnegative"));
    }
    let mut report = ExperimentReport::new("condition-i");
    report.context("seed", settings.seed);
    report.context("samples", settings.samples);
    report.context("delta", settings.delta);
    report.check_bool("family_in_sn", k_family.iter().all(|k| in_sn(k, settings.energy_bound)));

    let grid = cfg.grid();
    let mut freqs = Vec::with_capacity(eps_list.len());
    for (i, &eps) in eps_list.iter().enumerate() {
        let k = &k_family[i.min(k_family.len() - 1)];
        let skeleton = gamma0(m, cfg, k)?;
        let dists = (0..settings.samples)
            .into_par_iter()
            .map(|s| -> Result<f64> {
                let noise = if eps > 0.0 {
                    Some(sample_noise(&grid, derive_seed(settings.seed, s as u64))?)
                } else {
                    None
                };
                let y = reflected_path(m, cfg, k, eps, noise.as_ref(), cfg.penalty_n)?;
                xt_distance(&y, &skeleton, &m.space)
            })
            .collect::<Result<Vec<f64>>>()?;
        let exceed = dists.iter().filter(|d| **d > settings.delta).count();
        let freq = exceed as f64 / settings.samples.max(1) as f64;
        let mean = dists.iter().sum::<f64>() / dists.len().max(1) as f64;
        report.context(format!("eps_{i}"), eps);
        report.metric(format!("frequency_{i}"), freq);
        report.metric(format!("mean_distance_{i}"), mean);
        freqs.push(freq);
    }
    let monotone = freqs.windows(2).all(|w| w[1] < w[0] || (w[1] == 0.0 && w[0] == 0.0));
    report.check_bool("frequencies_decreasing", monotone);
    report.check("last_frequency", *freqs.last().unwrap(), Relation::AtMost, settings.floor);
    Ok(report)
}

/// Convergence of the controlled map along a weakly converging family.
pub fn verify_condition_ii(
    m: &ModelSpec,
    cfg: &StepperConfig,
    base: &Control,
    amplitude: f64,
    eps_list: &[f64],
    settings: &ProbeSettings,
) -> Result<ExperimentReport> {
    let mut report = weak_continuity_probe(m, cfg, base, amplitude, eps_list, settings)?;
    report.name = "condition-ii".into();
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{DiffusionMap, DriftMap, TrilinearForm};
    use crate::penalized::Scheme;
    use crate::space::SpaceConfig;

    fn sv(x: f64) -> SpectralVector {
        SpectralVector::new(vec![x]).unwrap()
    }

    fn lq(sigma: f64) -> ModelSpec {
        let diffusion = if sigma == 0.0 { DiffusionMap::zero() } else { DiffusionMap::constant(sv(sigma)) };
        ModelSpec::new(SpaceConfig::new(vec![1.0]).unwrap(), DriftMap::zero(1), diffusion, TrilinearForm::zero(1), sv(0.0))
            .unwrap()
    }

    fn cfg() -> StepperConfig {
        StepperConfig::new(0.05, 1.0, 1e4, Scheme::SemiImplicitA)
    }

    fn quick() -> OptimizerSettings {
        OptimizerSettings { starts: 2, ..Default::default() }
    }

    #[test]
    fn event_containing_rest_path_costs_nothing() {
        let e = TargetEvent::terminal_ball(sv(0.0), 0.0, 1e-6);
        let r = evaluate_rate(&lq(1.0), &cfg(), &e, &quick()).unwrap();
        assert!(r.feasible);
        assert_eq!(r.rate_value, 0.0);
        assert_eq!(r.best_start, 0);
    }

    #[test]
    fn zero_diffusion_is_infeasible() {
        let e = TargetEvent::terminal_halfspace(sv(1.0), 0.3, 1e-3);
        let r = evaluate_rate(&lq(0.0), &cfg(), &e, &quick()).unwrap();
        assert!(!r.feasible);
        assert!(r.rate_value.is_infinite());
    }

    #[test]
    fn rate_is_half_energy_of_returned_control() {
        let e = TargetEvent::terminal_halfspace(sv(1.0), 0.3, 1e-3);
        let r = evaluate_rate(&lq(1.0), &cfg(), &e, &quick()).unwrap();
        assert!(r.feasible && r.rate_value > 0.0);
        assert_eq!(r.rate_value, control_energy(&r.optimal_control) / 2.0);
        assert!(r.constraint_residual <= 1e-3);
    }

    #[test]
    fn rejects_oversized_discretization() {
        let e = TargetEvent::terminal_halfspace(sv(1.0), 0.3, 1e-3);
        let opt = OptimizerSettings { control_pieces: Some(257), ..quick() };
        assert!(evaluate_rate(&lq(1.0), &cfg(), &e, &opt).is_err());
    }

    #[test]
    fn whole_space_and_empty_events() {
        let m = lq(1.0);
        let all = TargetEvent::terminal_halfspace(sv(1.0), -2.0, 0.0);
        let p = mc_probability(&m, &cfg(), &all, 0.5, 200, 3).unwrap();
        assert_eq!((p.estimate, p.stderr, p.upper_bound), (1.0, 0.0, None));
        let none = TargetEvent::terminal_halfspace(sv(1.0), 2.0, 0.0);
        let p = mc_probability(&m, &cfg(), &none, 0.5, 200, 3).unwrap();
        assert_eq!(p.estimate, 0.0);
        assert_eq!(p.upper_bound, Some(3.0 / 200.0));
        assert!(mc_probability(&m, &cfg(), &all, 0.5, 99, 3).is_err());
    }

    #[test]
    fn residuals() {
        let traj = Trajectory::from_states(vec![0.0, 1.0], vec![sv(0.2), sv(0.6)]);
        let ball = TargetEvent::terminal_ball(sv(0.0), 0.5, 0.0);
        assert!((ball.residual(&traj).unwrap()[0] - 0.1).abs() < 1e-15);
        let sup = TargetEvent::sup_exceedance(sv(-1.0), 0.0, 0.0);
        assert_eq!(sup.residual(&traj).unwrap(), vec![0.2]);
        assert!(TargetEvent::terminal_ball(sv(0.0), -1.0, 0.0).validate(1).is_err());
        assert!(TargetEvent::terminal_ball(SpectralVector::zeros(2), 1.0, 0.0).validate(1).is_err());
    }

    #[test]
    fn condition_i_without_noise_matches_skeleton() {
        let m = lq(1.0);
        let k = Control::constant(1.0, 20, 0.5).unwrap();
        let settings = ConditionISettings { samples: 10, seed: 1, delta: 0.0, floor: 0.0, energy_bound: 1.0 };
        let rep = verify_condition_i(&m, &cfg(), &[k], &[0.0], &settings).unwrap();
        assert_eq!(rep.metrics["mean_distance_0"], 0.0);
        assert!(rep.passed());
    }

    #[test]
    fn weighted_line_recovers_exact_fit() {
        let (a, b) = weighted_line(&[0.1, 0.2, 0.4], &[1.3, 1.6, 2.2], &[1.0, 5.0, 2.0]);
        assert!((a - 1.0).abs() < 1e-12 && (b - 3.0).abs() < 1e-12);
    }
}
