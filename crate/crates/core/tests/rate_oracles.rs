//! Rate evaluation and Monte Carlo against independent scalar oracles.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use refldp::controls::uniform_grid;
use refldp::rate::mc_probability;
use refldp::{
    control_energy, evaluate_rate, gamma0, DiffusionMap, DriftMap, ModelSpec, OptimizerSettings, Scheme, SpaceConfig,
    SpectralVector, StepperConfig, TargetEvent, TrilinearForm,
};

fn sv(x: f64) -> SpectralVector {
    SpectralVector::new(vec![x]).unwrap()
}

fn lq(lambda: f64, sigma: f64, u0: f64) -> ModelSpec {
    ModelSpec::new(
        SpaceConfig::new(vec![lambda]).unwrap(),
        DriftMap::zero(1),
        DiffusionMap::constant(sv(sigma)),
        TrilinearForm::zero(1),
        sv(u0),
    )
    .unwrap()
}

/// Backward dynamic programming for `min ½Σ k_j² dt` subject to
/// `x_{j+1} = a x_j + b k_j`, `x_M = target`. The value function from step
/// `j` is `½ (target - c_j x)² / s_j`.
fn dp_rate(lambda: f64, sigma: f64, u0: f64, dt: f64, steps: usize, target: f64) -> f64 {
    let a = 1.0 / (1.0 + dt * lambda);
    let b = a * dt * sigma;
    let (mut c, mut s) = (1.0, 0.0);
    for _ in 0..steps {
        s += c * c * b * b / dt;
        c *= a;
    }
    0.5 * (target - c * u0).powi(2) / s
}

#[test]
fn terminal_point_rate_matches_dp() {
    let (lambda, sigma, dt) = (1.0, 1.0, 0.02);
    let m = lq(lambda, sigma, 0.0);
    let cfg = StepperConfig::new(dt, 1.0, 1e4, Scheme::SemiImplicitA);
    let event = TargetEvent::terminal_ball(sv(0.5), 0.0, 1e-3);
    let r = evaluate_rate(&m, &cfg, &event, &OptimizerSettings { starts: 3, ..Default::default() }).unwrap();
    let oracle = dp_rate(lambda, sigma, 0.0, dt, 50, 0.5);
    assert!(r.feasible);
    assert!((r.rate_value / oracle - 1.0).abs() < 0.02, "{} vs {oracle}", r.rate_value);
}

#[test]
fn nonzero_start_and_coarse_controls() {
    // Ten control pieces over fifty solver steps: the DP runs over pieces
    // with the five-step transition compounded.
    let (lambda, sigma, dt) = (2.0, 0.7, 0.02);
    let m = lq(lambda, sigma, 0.2);
    let cfg = StepperConfig::new(dt, 1.0, 1e4, Scheme::SemiImplicitA);
    let event = TargetEvent::terminal_ball(sv(-0.3), 0.0, 1e-3);
    let opt = OptimizerSettings { starts: 2, control_pieces: Some(10), ..Default::default() };
    let r = evaluate_rate(&m, &cfg, &event, &opt).unwrap();

    let a = 1.0 / (1.0 + dt * lambda);
    let a5 = a.powi(5);
    let b5: f64 = (0..5).map(|i| a.powi(i + 1) * dt * sigma).sum();
    let (mut c, mut s) = (1.0, 0.0);
    for _ in 0..10 {
        s += c * c * b5 * b5 / 0.1;
        c *= a5;
    }
    let oracle = 0.5 * (-0.3 - c * 0.2f64).powi(2) / s;
    assert!((r.rate_value / oracle - 1.0).abs() < 0.02, "{} vs {oracle}", r.rate_value);
}

#[test]
fn nested_halfspaces_and_scaling() {
    let m = lq(1.0, 1.0, 0.0);
    let cfg = StepperConfig::new(0.05, 1.0, 1e4, Scheme::SemiImplicitA);
    let opt = OptimizerSettings { starts: 2, ..Default::default() };
    let inner = evaluate_rate(&m, &cfg, &TargetEvent::terminal_halfspace(sv(1.0), 0.4, 1e-3), &opt).unwrap();
    let outer_event = TargetEvent::terminal_halfspace(sv(1.0), 0.2, 1e-3);
    let outer = evaluate_rate(&m, &cfg, &outer_event, &opt).unwrap();
    assert!(inner.rate_value >= 0.95 * outer.rate_value);
    assert!(outer.rate_value > 0.0);

    let scaled = inner.optimal_control.with_values(inner.optimal_control.values().iter().map(|k| 1.5 * k).collect()).unwrap();
    assert!(outer_event.contains(&gamma0(&m, &cfg, &scaled).unwrap()).unwrap());
    let e = control_energy(&scaled);
    assert!((e / control_energy(&inner.optimal_control) - 2.25).abs() < 1e-12);
}

#[test]
fn rate_is_reproducible() {
    let m = lq(1.0, 1.0, 0.0);
    let cfg = StepperConfig::new(0.05, 1.0, 1e4, Scheme::SemiImplicitA);
    let event = TargetEvent::sup_exceedance(sv(1.0), 0.3, 1e-3);
    let opt = OptimizerSettings { starts: 3, seed: 9, ..Default::default() };
    let a = evaluate_rate(&m, &cfg, &event, &opt).unwrap();
    let b = evaluate_rate(&m, &cfg, &event, &opt).unwrap();
    assert_eq!(a, b);
    assert!(a.feasible && a.rate_value > 0.0);
}

fn box_muller(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

#[test]
fn mc_matches_direct_resimulation() {
    let (lambda, sigma, eps, dt) = (1.0, 1.0, 0.5, 0.02);
    let m = lq(lambda, sigma, 0.0);
    let cfg = StepperConfig::new(dt, 1.0, 1e4, Scheme::SemiImplicitA);
    let event = TargetEvent::terminal_halfspace(sv(1.0), 0.3, 0.0);
    let samples = 10_000;
    let est = mc_probability(&m, &cfg, &event, eps, samples, 4).unwrap();

    let mut rng = ChaCha8Rng::seed_from_u64(1234);
    let mut hits = 0;
    for _ in 0..samples {
        let mut u: f64 = 0.0;
        for _ in 0..50 {
            u = (u + eps.sqrt() * sigma * dt.sqrt() * box_muller(&mut rng)) / (1.0 + dt * lambda);
            u = u.clamp(-1.0, 1.0);
        }
        if u >= 0.3 {
            hits += 1;
        }
    }
    let p = hits as f64 / samples as f64;
    let se = (p * (1.0 - p) / samples as f64).sqrt();
    let combined = (se * se + est.stderr * est.stderr).sqrt();
    assert!((est.estimate - p).abs() <= 3.0 * combined, "{} vs {p}", est.estimate);
    assert!(est.estimate > 0.1 && est.estimate < 0.4);
}

#[test]
fn mc_stderr_scales_with_samples() {
    let m = lq(1.0, 1.0, 0.0);
    let cfg = StepperConfig::new(0.05, 1.0, 1e4, Scheme::SemiImplicitA);
    let event = TargetEvent::terminal_halfspace(sv(1.0), 0.2, 0.0);
    let mut ratios = Vec::new();
    for rep in 0..10 {
        let a = mc_probability(&m, &cfg, &event, 0.5, 1000, 100 + rep).unwrap();
        let b = mc_probability(&m, &cfg, &event, 0.5, 2000, 200 + rep).unwrap();
        ratios.push(a.stderr / b.stderr);
    }
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    assert!((mean / 2f64.sqrt() - 1.0).abs() < 0.2, "{mean}");
}

#[test]
fn brownian_increment_statistics() {
    let grid = uniform_grid(1.0, 10);
    let n = 100_000;
    let terminal: Vec<f64> = (0..n).map(|s| refldp::sample_noise(&grid, s as u64).unwrap().terminal()).collect();
    let mean = terminal.iter().sum::<f64>() / n as f64;
    let var = terminal.iter().map(|w| (w - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    assert!(mean.abs() < 4.0 * (1.0 / n as f64).sqrt(), "{mean}");
    assert!((var - 1.0).abs() < 0.05, "{var}");
}
