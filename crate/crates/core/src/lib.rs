//! Numerical laboratory for stochastic evolution equations reflected in the
//! closed unit ball of a Hilbert space.
//!
//! The crate solves the penalized and reflected equations on a spectral
//! Galerkin truncation, the controlled skeleton equation, and evaluates the
//! small-noise large-deviation rate function by control optimization.

pub mod controls;
pub mod dynamics;
pub mod error;
pub mod nse;
pub mod penalized;
pub mod rate;
pub mod reflected;
pub mod report;
pub mod rng;
pub mod skeleton;
pub mod space;
pub mod trajectory;

pub use controls::{control_energy, in_sn, oscillatory_family, sample_noise, Control, NoisePath};
pub use dynamics::{
    eval_b, eval_f, eval_sigma, verify_assumptions, DiffusionMap, DriftMap, ModelSpec, TrilinearForm,
};
pub use error::{Error, Result};
pub use nse::nse_galerkin_form;
pub use penalized::{penalty_diagnostics, solve_penalized, step_penalized, Scheme, StepperConfig};
pub use reflected::{check_solution_properties, sample_small_noise, solve_reflected};
pub use rate::{evaluate_rate, ldp_slope_fit, mc_probability, verify_condition_i, verify_condition_ii, OptimizerSettings, RateResult, TargetEvent};
pub use report::{ExperimentReport, Relation};
pub use skeleton::{gamma0, lipschitz_probe, weak_continuity_probe};
pub use space::{apply_A, h_inner, project_ball, v_norm_sq, xt_distance, SpaceConfig, SpectralVector};
pub use trajectory::Trajectory;
