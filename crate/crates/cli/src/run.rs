//! Experiment orchestration, artifact emission and replay.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Deserialize;

use refldp::dynamics::{eval_f, eval_sigma};
use refldp::penalized::{penalty_diagnostics, Scheme};
use refldp::rate::{
    evaluate_rate, ldp_slope_fit, verify_condition_i, ConditionISettings, EventKind, SlopeFitSettings, TargetEvent,
};
use refldp::reflected::{check_solution_properties_with, ladder_for, ladder_report, solve_ladder, DEFAULT_LADDER};
use refldp::skeleton::{weak_continuity_probe, ProbeSettings};
use refldp::{control_energy, sample_noise, solve_reflected, verify_assumptions, ExperimentReport, Relation, Trajectory};
use refldp::{ModelSpec, SpectralVector, StepperConfig};

use crate::scenario::{ChecksSection, Experiment, Scenario};
use crate::CliError;

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Overrides the scenario seed.
    pub seed: Option<u64>,
    /// Overrides the scenario output directory.
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: ExperimentReport,
    pub output_dir: PathBuf,
}

impl RunOutcome {
    pub fn exit_code(&self) -> i32 {
        if self.report.passed() {
            crate::EXIT_PASS
        } else {
            crate::EXIT_FAIL
        }
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io { path: path.display().to_string(), source: e }
}

fn absorb_with_context(report: &mut ExperimentReport, prefix: &str, other: &ExperimentReport) {
    report.absorb(prefix, other);
    for (k, v) in &other.context {
        report.context(format!("{prefix}.{k}"), v);
    }
}

fn write_artifact(report: &mut ExperimentReport, path: PathBuf, write: impl FnOnce(&Path) -> Result<(), CliError>) -> Result<(), CliError> {
    write(&path)?;
    report.artifacts.push(path.display().to_string());
    Ok(())
}

fn save_trajectory(traj: &Trajectory, path: &Path) -> Result<(), CliError> {
    Ok(traj.save(path)?)
}

fn save_text(text: &str, path: &Path) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

fn save_control(k: &refldp::Control, path: &Path) -> Result<(), CliError> {
    let file = std::fs::File::create(path).map_err(|e| io_err(path, e))?;
    Ok(k.write_csv(std::io::BufWriter::new(file))?)
}

/// Largest per-step increase of `|u|²`.
fn max_energy_increase(traj: &Trajectory) -> f64 {
    traj.states.windows(2).map(|w| w[1].norm_sq() - w[0].norm_sq()).fold(f64::NEG_INFINITY, f64::max)
}

/// Solution checks and penalty diagnostics of a stored trajectory; shared by
/// `run` and `replay` so both report identical keys and values.
fn trajectory_checks(
    report: &mut ExperimentReport,
    traj: &Trajectory,
    m: &ModelSpec,
    cfg: &StepperConfig,
    checks: &ChecksSection,
    seed: u64,
) -> Result<(), CliError> {
    let sol = check_solution_properties_with(traj, m, checks.probes, seed, &checks.tolerances())?;
    report.absorb("solution", &sol);
    report.absorb("diagnostics", &penalty_diagnostics(traj, cfg));
    if checks.energy_nonincreasing {
        report.check("solution.max_energy_increase", max_energy_increase(traj), Relation::AtMost, 1e-12);
    }
    Ok(())
}

pub fn run_scenario(path: &Path, opts: &RunOptions) -> Result<RunOutcome, CliError> {
    let scenario = Scenario::load(path)?;
    run_loaded(&scenario, opts)
}

/// Runs the scenario's experiment and writes `trajectory.csv`,
/// `control.csv` and `report.json` (plus experiment artifacts) to the output
/// directory.
pub fn run_loaded(s: &Scenario, opts: &RunOptions) -> Result<RunOutcome, CliError> {
    let start = Instant::now();
    let seed = opts.seed.unwrap_or(s.seed());
    let out = opts
        .output
        .clone()
        .or_else(|| s.file.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("refldp-out").join(&s.file.name));
    std::fs::create_dir_all(&out).map_err(|e| io_err(&out, e))?;

    let (m, cfg) = (&s.model, &s.file.stepper);
    let mut report = ExperimentReport::new(s.file.name.clone());
    report.context("experiment", s.file.experiment.as_str());
    report.context("instance", &s.file.model.instance);
    report.context("seed", seed);
    report.context("scenario", &s.source);

    let (traj, ladder) = solve_reflected(m, cfg, &s.control, s.file.checks.eps, seed, &ladder_for(cfg))?;
    absorb_with_context(&mut report, "ladder", &ladder);
    trajectory_checks(&mut report, &traj, m, cfg, &s.file.checks, seed)?;
    write_artifact(&mut report, out.join("trajectory.csv"), |p| save_trajectory(&traj, p))?;
    write_artifact(&mut report, out.join("control.csv"), |p| save_control(&s.control, p))?;

    match s.file.experiment {
        Experiment::VerifyAssumptions => verify(s, seed, &mut report)?,
        Experiment::PenalizationSweep => sweep(s, seed, &mut report, &out)?,
        Experiment::DefinitionChecks => {}
        Experiment::WeakContinuity => weak(s, &mut report)?,
        Experiment::ConditionI => condition_i(s, seed, &mut report)?,
        Experiment::Rate => rate(s, seed, &mut report, &out)?,
        Experiment::McLdp => mc_ldp(s, seed, &mut report)?,
    }

    report.wall_time = start.elapsed().as_secs_f64();
    let json_path = out.join("report.json");
    report.artifacts.push(json_path.display().to_string());
    save_text(&report.to_json()?, &json_path)?;
    Ok(RunOutcome { report, output_dir: out })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct VerifyParams {
    #[serde(default = "thousand")]
    samples: usize,
}

fn thousand() -> usize {
    1000
}

fn verify(s: &Scenario, seed: u64, report: &mut ExperimentReport) -> Result<(), CliError> {
    let p: VerifyParams = s.params()?;
    absorb_with_context(report, "audit", &verify_assumptions(&s.model, p.samples, seed));
    Ok(())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepParams {
    #[serde(default = "default_ladder")]
    ladder: Vec<f64>,
    /// Expected `sup |u - π(u)| · n` on boundary-pressing scenarios.
    defect_scale: Option<f64>,
    #[serde(default = "point_two")]
    defect_rel_tol: f64,
}

fn default_ladder() -> Vec<f64> {
    DEFAULT_LADDER.to_vec()
}

fn point_two() -> f64 {
    0.2
}

fn sweep(s: &Scenario, seed: u64, report: &mut ExperimentReport, out: &Path) -> Result<(), CliError> {
    let p: SweepParams = s.params()?;
    let (m, cfg) = (&s.model, &s.file.stepper);
    let eps = s.file.checks.eps;
    let noise = if eps > 0.0 { Some(sample_noise(&cfg.grid(), seed)?) } else { None };
    let sol = solve_ladder(m, cfg, &s.control, eps, noise.as_ref(), &p.ladder)?;
    absorb_with_context(report, "sweep", &ladder_report(m, cfg, &sol));
    let decreasing = sol.distances.windows(2).all(|w| w[1] < w[0]);
    report.check_bool("sweep.ladder_monotone", decreasing);
    for (i, (n, level)) in sol.ladder.iter().zip(&sol.levels).enumerate() {
        if let Some(c) = p.defect_scale {
            let sup = level.states.iter().map(refldp::space::ball_defect_norm).fold(0.0, f64::max);
            report.check(format!("sweep.defect_ratio_error_{i}"), (sup * n / c - 1.0).abs(), Relation::AtMost, p.defect_rel_tol);
        }
        write_artifact(report, out.join(format!("level{i}.csv")), |path| save_trajectory(level, path))?;
    }
    Ok(())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct WeakParams {
    amplitude: f64,
    eps_list: Vec<f64>,
    threshold: Option<f64>,
    #[serde(default = "one_point_five")]
    min_factor: f64,
    #[serde(default = "yes")]
    reference: bool,
}

fn one_point_five() -> f64 {
    1.5
}

fn yes() -> bool {
    true
}

fn weak(s: &Scenario, report: &mut ExperimentReport) -> Result<(), CliError> {
    let p: WeakParams = s.params()?;
    let settings = ProbeSettings { threshold: p.threshold.unwrap_or(f64::MAX), min_factor: p.min_factor, reference: p.reference };
    let probe = weak_continuity_probe(&s.model, &s.file.stepper, &s.control, p.amplitude, &p.eps_list, &settings)?;
    absorb_with_context(report, "probe", &probe);
    Ok(())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ConditionIParams {
    eps_list: Vec<f64>,
    #[serde(default = "thousand")]
    samples: usize,
    #[serde(default = "point_zero_five")]
    delta: f64,
    #[serde(default = "point_zero_one")]
    floor: f64,
    energy_bound: Option<f64>,
}

fn point_zero_five() -> f64 {
    0.05
}

fn point_zero_one() -> f64 {
    0.01
}

fn condition_i(s: &Scenario, seed: u64, report: &mut ExperimentReport) -> Result<(), CliError> {
    let p: ConditionIParams = s.params()?;
    let settings = ConditionISettings {
        samples: p.samples,
        seed,
        delta: p.delta,
        floor: p.floor,
        energy_bound: p.energy_bound.unwrap_or_else(|| control_energy(&s.control)),
    };
    let rep = verify_condition_i(&s.model, &s.file.stepper, std::slice::from_ref(&s.control), &p.eps_list, &settings)?;
    absorb_with_context(report, "condition_i", &rep);
    Ok(())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RateParams {
    /// `"linear"` compares against the closed-form minimum-energy control of
    /// a scalar affine model.
    oracle: Option<String>,
    #[serde(default = "point_zero_two")]
    oracle_rel_tol: f64,
}

fn point_zero_two() -> f64 {
    0.02
}

fn rate(s: &Scenario, seed: u64, report: &mut ExperimentReport, out: &Path) -> Result<(), CliError> {
    let p: RateParams = s.params()?;
    let event = s.event()?;
    let opt = refldp::OptimizerSettings { seed, ..s.file.optimizer.clone() };
    let r = evaluate_rate(&s.model, &s.file.stepper, event, &opt)?;
    report.metric("rate.rate_value", r.rate_value);
    report.metric("rate.constraint_residual", r.constraint_residual);
    report.metric("rate.iterations", r.iterations as f64);
    report.metric("rate.best_start", r.best_start as f64);
    report.check_bool("rate.feasible", r.feasible);
    if !r.feasible {
        report.note("rate: no feasible control found; the rate is infinite");
    }
    match p.oracle.as_deref() {
        None => {}
        Some("linear") => {
            let pieces = opt.control_pieces.unwrap_or_else(|| s.file.stepper.steps());
            let reference = linear_reference(&s.model, &s.file.stepper, event, pieces)?;
            report.metric("rate.oracle", reference);
            report.check("rate.oracle_rel_error", (r.rate_value / reference - 1.0).abs(), Relation::AtMost, p.oracle_rel_tol);
        }
        Some(other) => return Err(CliError::Config(format!("unknown rate oracle `{other}`"))),
    }
    write_artifact(report, out.join("optimal_control.csv"), |path| save_control(&r.optimal_control, path))?;
    write_artifact(report, out.join("rate.json"), |path| save_text(&r.to_json()?, path))?;
    Ok(())
}

/// Minimum energy `½ s² / Σ g_p² / Δ_p` for a scalar affine model that stays
/// inside the ball, where `s` is the distance the free terminal state must
/// move and `g_p` the terminal response to a unit control on piece `p`.
fn linear_reference(m: &ModelSpec, cfg: &StepperConfig, event: &TargetEvent, pieces: usize) -> Result<f64, CliError> {
    if m.dim() != 1 || !m.form.is_zero() {
        return Err(CliError::Config("the linear oracle needs a scalar model without a trilinear form".into()));
    }
    let at = |x: f64| SpectralVector::new(vec![x]);
    let f0 = eval_f(&m.drift, &at(0.0)?)?.coeffs()[0];
    let slope = eval_f(&m.drift, &at(1.0)?)?.coeffs()[0] - f0;
    let sigma = eval_sigma(&m.diffusion, &at(0.0)?)?.coeffs()[0];
    if eval_sigma(&m.diffusion, &at(1.0)?)?.coeffs()[0] != sigma {
        return Err(CliError::Config("the linear oracle needs a constant diffusion".into()));
    }
    let lambda = m.space.eigenvalues()[0];
    let steps = cfg.steps();
    if steps % pieces != 0 {
        return Err(CliError::Config("the linear oracle needs control pieces dividing the solver steps".into()));
    }
    let per = steps / pieces;
    let dt = cfg.dt;
    let terminal = |k: &dyn Fn(usize) -> f64| {
        let mut x = m.u0.coeffs()[0];
        for j in 0..steps {
            let rhs = x + dt * (f0 + slope * x + sigma * k(j / per));
            x = match cfg.scheme {
                Scheme::SemiImplicitA => rhs / (1.0 + dt * lambda),
                Scheme::Explicit => rhs - dt * lambda * x,
            };
        }
        x
    };
    let free = terminal(&|_| 0.0);
    let width = cfg.horizon / pieces as f64;
    let gram: f64 = (0..pieces)
        .map(|p| {
            let g = terminal(&|q| if q == p { 1.0 } else { 0.0 }) - free;
            g * g / width
        })
        .sum();
    let shift = match &event.kind {
        EventKind::TerminalBall { center, radius } => ((free - center.coeffs()[0]).abs() - radius).max(0.0),
        EventKind::TerminalHalfspace { normal, level } => {
            let n = normal.coeffs()[0];
            ((level - n * free) / n.abs()).max(0.0)
        }
        EventKind::SupExceedance { .. } => {
            return Err(CliError::Config("the linear oracle supports terminal events only".into()));
        }
    };
    Ok(0.5 * shift * shift / gram)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct McLdpParams {
    eps_list: Vec<f64>,
    #[serde(default = "ten_thousand")]
    samples_per_eps: usize,
    #[serde(default = "point_two_five")]
    rel_tol: f64,
    #[serde(default = "milli")]
    abs_floor: f64,
}

fn ten_thousand() -> usize {
    10_000
}

fn point_two_five() -> f64 {
    0.25
}

fn milli() -> f64 {
    1e-3
}

fn mc_ldp(s: &Scenario, seed: u64, report: &mut ExperimentReport) -> Result<(), CliError> {
    let p: McLdpParams = s.params()?;
    let event = s.event()?;
    let settings = SlopeFitSettings { samples_per_eps: p.samples_per_eps, seed, rel_tol: p.rel_tol, abs_floor: p.abs_floor };
    let opt = refldp::OptimizerSettings { seed, ..s.file.optimizer.clone() };
    let rep = ldp_slope_fit(&s.model, &s.file.stepper, event, &p.eps_list, &settings, &opt)?;
    absorb_with_context(report, "ldp", &rep);
    Ok(())
}

/// Tolerance overrides for [`replay`].
#[derive(Debug, Clone, Default)]
pub struct ReplayOverrides {
    pub vi_rel: Option<f64>,
    pub overshoot: Option<f64>,
    pub support: Option<f64>,
    pub probes: Option<usize>,
    pub seed: Option<u64>,
}

/// Re-checks a stored trajectory against the scenario's model without
/// re-solving.
pub fn replay(trajectory_csv: &Path, scenario: &Path, o: &ReplayOverrides) -> Result<ExperimentReport, CliError> {
    let s = Scenario::load(scenario)?;
    let traj = Trajectory::load(trajectory_csv)?;
    let mut checks = s.file.checks.clone();
    checks.vi_rel = o.vi_rel.unwrap_or(checks.vi_rel);
    checks.overshoot = o.overshoot.unwrap_or(checks.overshoot);
    checks.support = o.support.unwrap_or(checks.support);
    checks.probes = o.probes.unwrap_or(checks.probes);
    let seed = o.seed.unwrap_or(s.seed());
    let mut report = ExperimentReport::new(format!("{}-replay", s.file.name));
    report.context("trajectory", trajectory_csv.display());
    report.context("seed", seed);
    trajectory_checks(&mut report, &traj, &s.model, &s.file.stepper, &checks, seed)?;
    Ok(report)
}

/// Runs `f` on a pool of `jobs` threads, or on the global pool when `None`.
pub fn with_jobs<R: Send>(jobs: Option<usize>, f: impl FnOnce() -> R + Send) -> Result<R, CliError> {
    match jobs {
        None => Ok(f()),
        Some(0) => Err(CliError::Config("--jobs must be at least 1".into())),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

/// `--jobs`, falling back to `REFLDP_JOBS`.
pub fn resolve_jobs(flag: Option<usize>) -> Result<Option<usize>, CliError> {
    match flag {
        Some(0) => Err(CliError::Config("--jobs must be a positive integer".into())),
        Some(n) => Ok(Some(n)),
        None => match std::env::var("REFLDP_JOBS") {
            Ok(v) if !v.trim().is_empty() => match v.trim().parse::<usize>() {
                Ok(n) if n > 0 => Ok(Some(n)),
                _ => Err(CliError::Config(format!("REFLDP_JOBS must be a positive integer, got `{v}`"))),
            },
            _ => Ok(None),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::build_instance;

    #[test]
    fn linear_reference_matches_hand_computation() {
        // One step, one piece: x_1 = dt σ k / (1 + dt λ) from 0, so reaching
        // x* costs ½ (x*)² dt / (dt σ / (1 + dt λ))².
        let m = build_instance("constant-sigma-scalar", &"lambda = 2.0\nsigma = 0.5".parse().unwrap()).unwrap();
        let cfg = StepperConfig::new(0.5, 0.5, 1e4, Scheme::SemiImplicitA);
        let event = TargetEvent::terminal_ball(SpectralVector::new(vec![0.3]).unwrap(), 0.0, 1e-3);
        let g: f64 = 0.5 * 0.5 / 2.0;
        let expected = 0.5 * 0.09 * 0.5 / (g * g);
        assert!((linear_reference(&m, &cfg, &event, 1).unwrap() / expected - 1.0).abs() < 1e-14);
    }

    #[test]
    fn jobs_resolution() {
        assert_eq!(resolve_jobs(Some(3)).unwrap(), Some(3));
        assert!(with_jobs(Some(0), || ()).is_err());
        assert_eq!(with_jobs(Some(2), rayon::current_num_threads).unwrap(), 2);
    }
}
