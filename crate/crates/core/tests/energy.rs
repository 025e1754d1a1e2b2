//! With `f = σ = 0` the form conserves `|u|²` and `A` dissipates it, so the
//! discrete energy is nonincreasing.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use refldp::nse::{nse_galerkin_form, torus_space, torus_wavenumbers_16, torus_wavenumbers_8};
use refldp::{solve_penalized, Control, DiffusionMap, DriftMap, ModelSpec, Scheme, SpectralVector, StepperConfig};

fn run(ks: Vec<(i64, i64)>, paths: usize) {
    let cfg = torus_space(&ks).unwrap();
    let form = nse_galerkin_form(&cfg, &ks).unwrap();
    let d = ks.len();
    let step = StepperConfig::new(1e-3, 0.2, 1e4, Scheme::SemiImplicitA);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..paths {
        let g: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let r = rng.random_range(0.0..1.0) / g.iter().map(|x| x * x).sum::<f64>().sqrt();
        let u0 = SpectralVector::new(g.iter().map(|x| x * r).collect()).unwrap();
        let m = ModelSpec::new(cfg.clone(), DriftMap::zero(d), DiffusionMap::zero(), form.clone(), u0).unwrap();
        let traj = solve_penalized(&m, &step, &Control::zero(0.2, 1).unwrap(), None, 0.0).unwrap();
        for w in traj.states.windows(2) {
            assert!(w[1].norm_sq() - w[0].norm_sq() <= 1e-12);
        }
        assert!(traj.terminal().norm_sq() < m.u0.norm_sq() || m.u0.norm_sq() == 0.0);
    }
}

#[test]
fn eight_mode_energy_is_nonincreasing() {
    run(torus_wavenumbers_8(), 100);
}

#[test]
fn sixteen_mode_energy_is_nonincreasing() {
    run(torus_wavenumbers_16(), 20);
}
