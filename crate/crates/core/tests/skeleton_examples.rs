use refldp::controls::uniform_grid;
use refldp::rate::{verify_condition_i, ConditionISettings};
use refldp::skeleton::lipschitz_probe;
use refldp::{
    gamma0, oscillatory_family, Control, DiffusionMap, DriftMap, ModelSpec, Scheme, SpaceConfig, SpectralVector, StepperConfig,
    TrilinearForm,
};

fn sv(x: Vec<f64>) -> SpectralVector {
    SpectralVector::new(x).unwrap()
}

fn scalar_sigma(lambda: f64, sigma: f64, drift: Option<f64>) -> ModelSpec {
    let drift = drift.map_or(DriftMap::zero(1), |g| DriftMap::affine(g, sv(vec![0.0]), lambda));
    ModelSpec::new(
        SpaceConfig::new(vec![lambda]).unwrap(),
        drift,
        DiffusionMap::constant(sv(vec![sigma])),
        TrilinearForm::zero(1),
        sv(vec![0.0]),
    )
    .unwrap()
}

#[test]
fn free_decay_tracks_the_exponential() {
    let space = SpaceConfig::new(vec![1.0, 4.0, 9.0]).unwrap();
    let m = ModelSpec::new(space, DriftMap::zero(3), DiffusionMap::zero(), TrilinearForm::zero(3), sv(vec![1.0, 0.0, 0.0])).unwrap();
    let cfg = StepperConfig::new(1e-3, 2.0, 1e4, Scheme::SemiImplicitA);
    let u = gamma0(&m, &cfg, &Control::zero(2.0, 1).unwrap()).unwrap();
    for (t, x) in u.grid.iter().zip(&u.states) {
        assert!((x.norm() - (-t).exp()).abs() <= cfg.dt, "t = {t}");
        assert!(x.norm() <= 1.0);
    }
}

#[test]
fn constant_push_reaches_the_boundary_at_time_one() {
    // u' = k σ with σ = 1, k ≡ 1 and a negligible A: u(t) = min(1, t).
    let m = scalar_sigma(1e-9, 1.0, None);
    let cfg = StepperConfig::new(1e-3, 2.0, 1e6, Scheme::SemiImplicitA);
    let u = gamma0(&m, &cfg, &Control::constant(2.0, 1, 1.0).unwrap()).unwrap();
    for (t, x) in u.grid.iter().zip(&u.states) {
        assert!((x.coeffs()[0] - t.min(1.0)).abs() < 2e-6, "t = {t}: {}", x.coeffs()[0]);
    }
    // L accumulates the push k σ = 1 over [1, 2].
    assert!((u.local_time_variation() - 1.0).abs() < 1e-3);
}

#[test]
fn small_control_perturbation_is_linear() {
    // Linearized oracle: u' = -λu + σk, so δk on [0, T] moves u(T) by
    // σ δ (1 - e^{-λT}) / λ and the supremum is attained at T.
    let m = scalar_sigma(1.0, 0.5, None);
    let cfg = StepperConfig::new(1e-3, 1.0, 1e4, Scheme::SemiImplicitA);
    let k1 = Control::constant(1.0, 10, 0.2).unwrap();
    let delta = 1e-3;
    let k2 = Control::constant(1.0, 10, 0.2 + delta).unwrap();
    let rep = lipschitz_probe(&m, &cfg, &k1, &k2).unwrap();
    let sup = 0.5 * delta * (1.0 - (-1.0f64).exp());
    let integral = (0.5 * delta).powi(2) * (-0.5 + 2.0 * (-1.0f64).exp() - 0.5 * (-2.0f64).exp());
    let exact = (sup * sup + integral).sqrt();
    assert!((rep.metrics["xt_distance"] / exact - 1.0).abs() < 2e-3, "{} vs {exact}", rep.metrics["xt_distance"]);
    assert!((rep.metrics["control_distance"] - delta).abs() < 1e-15);
}

#[test]
fn oscillatory_pairings_vanish_linearly() {
    let base = Control::new(uniform_grid(1.0, 1000), vec![0.0; 1000]).unwrap();
    let phi: Vec<f64> = (0..1000).map(|j| if j < 300 { 1.0 } else { -0.5 }).collect();
    let pairing = |eps: f64| {
        let k = oscillatory_family(&base, 1.0, eps).unwrap();
        k.values().iter().zip(&phi).map(|(a, b)| a * b * 1e-3).sum::<f64>().abs()
    };
    // |∫ sin(t/ε) φ| ≤ ε (|φ(0)| + |φ(1)| + TV(φ)) = 3ε.
    for eps in [0.1, 0.03, 0.01, 0.003] {
        assert!(pairing(eps) <= 3.0 * eps + 1e-12, "eps = {eps}");
    }
}

#[test]
fn condition_i_exceedance_shrinks() {
    let m = scalar_sigma(1.0, 0.5, Some(1.0));
    let cfg = StepperConfig::new(0.01, 1.0, 1e4, Scheme::SemiImplicitA);
    let k = Control::constant(1.0, 100, 1.0).unwrap();
    let settings = ConditionISettings { samples: 300, seed: 5, delta: 0.05, floor: 0.02, energy_bound: 1.0 };
    let rep = verify_condition_i(&m, &cfg, &[k], &[0.1, 0.01, 0.001], &settings).unwrap();
    assert!(rep.passed(), "{:?}", rep.metrics);
    assert!(rep.metrics["mean_distance_2"] < rep.metrics["mean_distance_0"]);
}
