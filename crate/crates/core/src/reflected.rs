//! Reflected solutions `(u, L)` as limits of the penalized ladder, their
//! conformance checks, and the small-noise sampler.
//!
//! The reflected trajectory is the largest-`n` ladder level with every state
//! projected onto the closed ball. Local-time increments are kept as produced
//! by the penalty substep, which makes them anti-parallel to the projected
//! post-step state.

use rayon::prelude::*;

use crate::controls::{sample_noise, Control, NoisePath};
use crate::dynamics::{uniform_in_ball, ModelSpec};
use crate::error::{Error, Result};
use crate::penalized::{penalty_diagnostics, solve_penalized, StepperConfig};
use crate::report::{ExperimentReport, Relation};
use crate::rng::{derive_seed, NormalStream};
use crate::space::{h_inner, project_ball, xt_distance, SpectralVector};
use crate::trajectory::Trajectory;

pub const DEFAULT_LADDER: [f64; 3] = [1e2, 1e3, 1e4];

/// Ladder `(n/100, n/10, n)` topped by the stepper's penalty parameter.
pub fn ladder_for(cfg: &StepperConfig) -> Vec<f64> {
    vec![cfg.penalty_n / 100.0, cfg.penalty_n / 10.0, cfg.penalty_n]
}

/// Raw penalized solutions for every ladder level plus the certificate.
#[derive(Debug, Clone)]
pub struct LadderSolution {
    pub ladder: Vec<f64>,
    pub levels: Vec<Trajectory>,
    pub distances: Vec<f64>,
}

impl LadderSolution {
    pub fn top(&self) -> &Trajectory {
        self.levels.last().unwrap()
    }
}

fn validate_ladder(n_ladder: &[f64]) -> Result<()> {
    if n_ladder.len() < 2 {
        return Err(Error::config("penalty ladder needs at least two levels"));
    }
    if n_ladder.iter().any(|n| !(n.is_finite() && *n > 0.0)) || n_ladder.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::config("penalty ladder must be positive and strictly increasing"));
    }
    Ok(())
}

/// Solves every ladder level with the same control and noise.
pub fn solve_ladder(
    m: &ModelSpec,
    cfg: &StepperConfig,
    control: &Control,
    eps: f64,
    noise: Option<&NoisePath>,
    n_ladder: &[f64],
) -> Result<LadderSolution> {
    validate_ladder(n_ladder)?;
    let levels = n_ladder
        .par_iter()
        .map(|&n| solve_penalized(m, &cfg.with_penalty(n), control, noise, eps))
        .collect::<Result<Vec<_>>>()?;
    let distances = levels
        .windows(2)
        .map(|w| xt_distance(&w[0], &w[1], &m.space))
        .collect::<Result<Vec<_>>>()?;
    Ok(LadderSolution { ladder: n_ladder.to_vec(), levels, distances })
}

/// Post-projects a penalized trajectory into the closed ball.
pub fn project_trajectory(raw: &Trajectory) -> Trajectory {
    Trajectory {
        grid: raw.grid.clone(),
        states: raw.states.iter().map(project_ball).collect(),
        local_time_increments: raw.local_time_increments.clone(),
        control_values: raw.control_values.clone(),
    }
}

fn noise_for(cfg: &StepperConfig, eps: f64, seed: u64) -> Result<Option<NoisePath>> {
    if eps > 0.0 {
        Ok(Some(sample_noise(&cfg.grid(), seed)?))
    } else {
        Ok(None)
    }
}

/// Reflected path from the single penalty level `n_top`; identical to the
/// output of [`solve_reflected`] whose ladder ends at `n_top`.
pub fn reflected_path(
    m: &ModelSpec,
    cfg: &StepperConfig,
    control: &Control,
    eps: f64,
    noise: Option<&NoisePath>,
    n_top: f64,
) -> Result<Trajectory> {
    let raw = solve_penalized(m, &cfg.with_penalty(n_top), control, noise, eps)?;
    Ok(project_trajectory(&raw))
}

/// Certificate for a ladder: successive distances and per-level diagnostics.
pub fn ladder_report(m: &ModelSpec, cfg: &StepperConfig, sol: &LadderSolution) -> ExperimentReport {
    let mut report = ExperimentReport::new("reflected-ladder");
    for (i, (n, traj)) in sol.ladder.iter().zip(&sol.levels).enumerate() {
        report.context(format!("level{i}.n"), n);
        report.absorb(&format!("level{i}"), &penalty_diagnostics(traj, &cfg.with_penalty(*n)));
    }
    for (i, d) in sol.distances.iter().enumerate() {
        report.metric(format!("ladder_distance_{i}"), *d);
    }
    let k = sol.distances.len();
    let contracting = k < 2 || sol.distances[k - 1] <= sol.distances[k - 2] || sol.distances[k - 1] < 1e-14;
    report.metric("ladder_contracting", if contracting { 1.0 } else { 0.0 });
    if !contracting {
        report.note(format!(
            "non-convergence warning: top ladder distance {} did not decrease from {}",
            sol.distances[k - 1],
            sol.distances[k - 2]
        ));
    }
    let drift_bound = m.drift_bound(
        sol.top()
            .control_values
            .as_ref()
            .map_or(0.0, |k| k.iter().fold(0.0f64, |a, b| a.max(b.abs()))),
    );
    report.metric("tol_reflect", cfg.with_penalty(*sol.ladder.last().unwrap()).tol_reflect(drift_bound));
    report
}

/// Reflected solution via the penalty ladder; returns the projected top level
/// and the convergence certificate.
pub fn solve_reflected(
    m: &ModelSpec,
    cfg: &StepperConfig,
    control: &Control,
    eps: f64,
    seed: u64,
    n_ladder: &[f64],
) -> Result<(Trajectory, ExperimentReport)> {
    let noise = noise_for(cfg, eps, seed)?;
    let sol = solve_ladder(m, cfg, control, eps, noise.as_ref(), n_ladder)?;
    let mut report = ladder_report(m, cfg, &sol);
    report.context("seed", seed);
    report.context("eps", eps);
    Ok((project_trajectory(sol.top()), report))
}

/// One reflected sample path at noise level `eps` with `k ≡ 0`; the top
/// ladder level is `cfg.penalty_n`.
pub fn sample_small_noise(m: &ModelSpec, cfg: &StepperConfig, eps: f64, seed: u64) -> Result<Trajectory> {
    if !(eps >= 0.0) {
        return Err(Error::config("noise level must be nonnegative"));
    }
    let zero = Control::zero(cfg.horizon, 1)?;
    let noise = noise_for(cfg, eps, seed)?;
    reflected_path(m, cfg, &zero, eps, noise.as_ref(), cfg.penalty_n)
}

/// Tolerances for [`check_solution_properties_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolutionTolerances {
    /// Variational inequality slack, relative to `1 + Var(L)`.
    pub vi_rel: f64,
    /// Allowed `max_t |u(t)| - 1`.
    pub overshoot: f64,
    /// Local time may be charged only where `|u| ≥ 1 - support`.
    pub support: f64,
}

impl Default for SolutionTolerances {
    fn default() -> Self {
        Self { vi_rel: 1e-8, overshoot: 0.0, support: 1e-9 }
    }
}

/// Random piecewise-linear path through `knots` uniform points of the ball.
/// Knot times include both endpoints.
pub fn random_ball_path(grid: &[f64], dim: usize, knots: usize, seed: u64) -> Vec<SpectralVector> {
    let mut s = NormalStream::new(seed);
    let (t0, t1) = (grid[0], *grid.last().unwrap());
    let mut times: Vec<f64> = (0..knots.saturating_sub(2)).map(|_| t0 + (t1 - t0) * s.next_uniform()).collect();
    times.push(t0);
    times.push(t1);
    times.sort_by(f64::total_cmp);
    let values: Vec<SpectralVector> = times.iter().map(|_| uniform_in_ball(&mut s, dim, 1.0)).collect();
    grid.iter()
        .map(|&t| {
            let seg = times.partition_point(|&x| x <= t).clamp(1, times.len() - 1);
            let (a, b) = (times[seg - 1], times[seg]);
            let w = if b > a { ((t - a) / (b - a)).clamp(0.0, 1.0) } else { 0.0 };
            let mut p = values[seg - 1].scaled(1.0 - w);
            p.axpy(w, &values[seg]);
            p
        })
        .collect()
}

/// `Σ_j (φ(t_{j+1}) - u(t_{j+1}), ΔL_j)`.
pub fn stieltjes_sum(traj: &Trajectory, phi: &[SpectralVector]) -> Result<f64> {
    let Some(inc) = &traj.local_time_increments else {
        return Ok(0.0);
    };
    let mut total = 0.0;
    for (j, dl) in inc.iter().enumerate() {
        if dl.coeffs().iter().all(|c| *c == 0.0) {
            continue;
        }
        total += h_inner(&(&phi[j + 1] - &traj.states[j + 1]), dl)?;
    }
    Ok(total)
}

pub fn check_solution_properties(traj: &Trajectory, m: &ModelSpec, probes: usize, seed: u64) -> Result<ExperimentReport> {
    check_solution_properties_with(traj, m, probes, seed, &SolutionTolerances::default())
}

/// Conformance of a trajectory with the reflected-solution definition:
/// ball-valued states, finite-variation `L` with `L(0) = 0`, the variational
/// inequality against random ball-valued test paths, and the support of `L`.
pub fn check_solution_properties_with(
    traj: &Trajectory,
    m: &ModelSpec,
    probes: usize,
    seed: u64,
    tol: &SolutionTolerances,
) -> Result<ExperimentReport> {
    traj.validate()?;
    if traj.dim() != m.dim() {
        return Err(Error::DimensionMismatch { expected: m.dim(), found: traj.dim() });
    }
    let mut report = ExperimentReport::new("solution-properties");
    report.context("seed", seed);
    report.context("probes", probes);
    if traj.local_time_increments.is_none() {
        report.note("trajectory carries no local-time increments; L taken as zero");
    }

    let overshoot = traj.states.iter().map(|u| u.norm() - 1.0).fold(f64::NEG_INFINITY, f64::max);
    report.check("max_norm_minus_one", overshoot, Relation::AtMost, tol.overshoot);

    let variation = traj.local_time_variation();
    report.check("local_time_variation", variation, Relation::AtMost, f64::MAX);
    report.check("initial_state_error", (&traj.states[0] - &m.u0).norm(), Relation::AtMost, 1e-12);

    let vi_values = (0..probes)
        .into_par_iter()
        .map(|p| {
            let phi = random_ball_path(&traj.grid, m.dim(), 8, derive_seed(seed, p as u64));
            stieltjes_sum(traj, &phi)
        })
        .collect::<Result<Vec<f64>>>()?;
    let vi_min = vi_values.iter().copied().fold(f64::INFINITY, f64::min);
    let vi_min = if probes == 0 { 0.0 } else { vi_min };
    let zero_probe = stieltjes_sum(traj, &vec![SpectralVector::zeros(m.dim()); traj.grid.len()])?;
    report.metric("variational_inequality_zero_path", zero_probe);
    report.check("variational_inequality_min", vi_min.min(zero_probe), Relation::AtLeast, -tol.vi_rel * (1.0 + variation));

    let off_support: f64 = traj
        .local_time_increments
        .iter()
        .flatten()
        .enumerate()
        .filter(|(j, _)| traj.states[j + 1].norm() < 1.0 - tol.support)
        .map(|(_, dl)| dl.norm())
        .sum();
    report.check("off_boundary_local_time", off_support, Relation::AtMost, 0.0);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{DiffusionMap, DriftMap, TrilinearForm};
    use crate::penalized::Scheme;
    use crate::space::SpaceConfig;

    fn pressing(c: f64, lambda: f64, u0: f64) -> ModelSpec {
        ModelSpec::new(
            SpaceConfig::new(vec![lambda]).unwrap(),
            DriftMap::affine(0.0, SpectralVector::new(vec![c]).unwrap(), lambda),
            DiffusionMap::zero(),
            TrilinearForm::zero(1),
            SpectralVector::new(vec![u0]).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn interior_runs_have_identical_levels() {
        let m = ModelSpec::new(
            SpaceConfig::laplacian_like(3).unwrap(),
            DriftMap::affine(2.0, SpectralVector::zeros(3), 1.0),
            DiffusionMap::zero(),
            TrilinearForm::zero(3),
            SpectralVector::new(vec![0.3, 0.2, -0.1]).unwrap(),
        )
        .unwrap();
        let cfg = StepperConfig::new(0.01, 1.0, 1e4, Scheme::SemiImplicitA);
        let (traj, rep) = solve_reflected(&m, &cfg, &Control::zero(1.0, 1).unwrap(), 0.0, 0, &DEFAULT_LADDER).unwrap();
        assert_eq!(rep.metrics["ladder_distance_0"], 0.0);
        assert_eq!(rep.metrics["ladder_distance_1"], 0.0);
        assert_eq!(traj.local_time_variation(), 0.0);
        let props = check_solution_properties(&traj, &m, 50, 3).unwrap();
        assert!(props.passed(), "{:?}", props.failed_flags());
        assert_eq!(props.metrics["variational_inequality_min"], 0.0);
    }

    #[test]
    fn boundary_pressing_local_time_balances_excess_drift() {
        // u' = c - λu from 0 hits 1 at t_hit = -ln(1 - λ/c)/λ, then L absorbs c - λ.
        let (c, lambda, horizon) = (5.0, 1e-4, 1.0);
        let m = pressing(c, lambda, 0.0);
        let cfg = StepperConfig::new(1e-4, horizon, 1e4, Scheme::SemiImplicitA);
        let (traj, rep) = solve_reflected(&m, &cfg, &Control::zero(horizon, 1).unwrap(), 0.0, 0, &DEFAULT_LADDER).unwrap();
        assert!((traj.terminal().coeffs()[0] - 1.0).abs() < 1e-15);
        let t_hit = -(1.0 - lambda / c).ln() / lambda;
        let expected = (c - lambda) * (horizon - t_hit);
        let total = traj.local_time_total().coeffs()[0];
        assert!(total < 0.0);
        assert!((total.abs() - expected).abs() < 5e-3 * expected, "{total} vs {expected}");
        assert!(rep.metrics["ladder_distance_1"] < rep.metrics["ladder_distance_0"]);
        let props = check_solution_properties(&traj, &m, 200, 9).unwrap();
        assert!(props.passed(), "{:?}", props.failed_flags());
        assert!(props.metrics["variational_inequality_zero_path"] >= 0.0);
    }

    #[test]
    fn noisy_runs_are_deterministic_given_seed() {
        let m = ModelSpec::new(
            SpaceConfig::new(vec![1.0]).unwrap(),
            DriftMap::zero(1),
            DiffusionMap::constant(SpectralVector::new(vec![1.0]).unwrap()),
            TrilinearForm::zero(1),
            SpectralVector::zeros(1),
        )
        .unwrap();
        let cfg = StepperConfig::new(0.01, 1.0, 1e3, Scheme::SemiImplicitA);
        let a = sample_small_noise(&m, &cfg, 0.3, 17).unwrap();
        assert_eq!(a, sample_small_noise(&m, &cfg, 0.3, 17).unwrap());
        assert_ne!(a, sample_small_noise(&m, &cfg, 0.3, 18).unwrap());
        let det = sample_small_noise(&m, &cfg, 0.0, 17).unwrap();
        let zero = Control::zero(1.0, 1).unwrap();
        let (refl, _) = solve_reflected(&m, &cfg, &zero, 0.0, 17, &ladder_for(&cfg)).unwrap();
        assert_eq!(det, refl);
    }

    #[test]
    fn zero_diffusion_ignores_noise_level() {
        let m = pressing(2.0, 1.0, 0.5);
        let cfg = StepperConfig::new(0.01, 1.0, 1e3, Scheme::SemiImplicitA);
        assert_eq!(sample_small_noise(&m, &cfg, 0.7, 1).unwrap(), sample_small_noise(&m, &cfg, 0.0, 1).unwrap());
    }

    #[test]
    fn ladder_validation() {
        let m = pressing(1.0, 1.0, 0.0);
        let cfg = StepperConfig::new(0.1, 1.0, 1e3, Scheme::SemiImplicitA);
        let k = Control::zero(1.0, 1).unwrap();
        assert!(solve_reflected(&m, &cfg, &k, 0.0, 0, &[1e3]).is_err());
        assert!(solve_reflected(&m, &cfg, &k, 0.0, 0, &[1e3, 1e2]).is_err());
    }

    #[test]
    fn wrong_sign_local_time_violates_inequality() {
        let m = pressing(5.0, 1e-4, 0.0);
        let cfg = StepperConfig::new(1e-3, 1.0, 1e3, Scheme::SemiImplicitA);
        let (mut traj, _) = solve_reflected(&m, &cfg, &Control::zero(1.0, 1).unwrap(), 0.0, 0, &DEFAULT_LADDER).unwrap();
        for dl in traj.local_time_increments.as_mut().unwrap() {
            *dl = dl.scaled(-1.0);
        }
        let props = check_solution_properties(&traj, &m, 20, 0).unwrap();
        assert!(!props.pass_flags["variational_inequality_min"]);
    }

    #[test]
    fn test_paths_stay_in_ball() {
        let grid = crate::controls::uniform_grid(1.0, 100);
        for s in 0..20 {
            for p in random_ball_path(&grid, 4, 8, s) {
                assert!(p.norm() <= 1.0 + 1e-15);
            }
        }
    }
}
