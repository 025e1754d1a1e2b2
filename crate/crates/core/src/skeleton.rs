//! The deterministic controlled map `k ↦ u^k` (`eps = 0`, reflected) and
//! probes of its continuity in the control.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::controls::{control_energy, in_sn, oscillatory_family, Control};
use crate::dynamics::ModelSpec;
use crate::error::{Error, Result};
use crate::penalized::StepperConfig;
use crate::reflected::reflected_path;
use crate::report::{ExperimentReport, Relation};
use crate::space::{trapezoid, v_norm_sq, xt_distance, SpaceConfig};
use crate::trajectory::Trajectory;

/// Reflected deterministic trajectory driven by `k`. The top penalty level is
/// `cfg.penalty_n`.
pub fn gamma0(m: &ModelSpec, cfg: &StepperConfig, k: &Control) -> Result<Trajectory> {
    reflected_path(m, cfg, k, 0.0, None, cfg.penalty_n)
}

/// `sup_t |u|² + ∫ ‖u‖² ds`.
pub fn path_energy(traj: &Trajectory, space: &SpaceConfig) -> Result<f64> {
    let sup_h = traj.states.iter().map(|u| u.norm_sq()).fold(0.0, f64::max);
    let v_sq = traj.states.iter().map(|u| v_norm_sq(u, space)).collect::<Result<Vec<_>>>()?;
    Ok(sup_h + trapezoid(&traj.grid, &v_sq))
}

/// `‖k1 - k2‖` in `L²(0, T)`, exact for piecewise constants.
pub fn control_distance(k1: &Control, k2: &Control) -> Result<f64> {
    let mut grid: Vec<f64> = k1.grid().iter().chain(k2.grid()).copied().collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs().max(1.0));
    let a = k1.resample(&grid)?;
    let b = k2.resample(&grid)?;
    Ok(a.iter()
        .zip(&b)
        .zip(grid.windows(2))
        .map(|((x, y), w)| (x - y).powi(2) * (w[1] - w[0]))
        .sum::<f64>()
        .sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeSettings {
    /// Upper bound for the distance at the smallest `eps`.
    pub threshold: f64,
    /// Required ratio between the first and the last distance.
    pub min_factor: f64,
    /// Also rerun the smallest `eps` at `dt / 8`.
    pub reference: bool,
}

impl Default for ProbeSettings {
    fn default() -> Self {
        Self { threshold: f64::MAX, min_factor: 1.5, reference: true }
    }
}

fn decrease_factor(first: f64, last: f64) -> f64 {
    if last > 0.0 {
        first / last
    } else {
        f64::MAX
    }
}

/// Distances `|u^{k^ε} - u^k|_{X_T}` along `k^ε = base + amplitude·sin(t/ε)`.
///
/// The family lies in `S_N` with `N = (|base| + |amplitude|√T)²`, which is
/// checked for every member. Probes run concurrently.
pub fn weak_continuity_probe(
    m: &ModelSpec,
    cfg: &StepperConfig,
    base: &Control,
    amplitude: f64,
    eps_list: &[f64],
    settings: &ProbeSettings,
) -> Result<ExperimentReport> {
    if eps_list.is_empty() || eps_list.iter().any(|e| !(*e > 0.0)) || eps_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::config("eps_list must be positive and strictly decreasing"));
    }
    let mut report = ExperimentReport::new("weak-continuity");
    report.context("amplitude", amplitude);
    report.context("eps_list", format!("{eps_list:?}"));
    let bound = (control_energy(base).sqrt() + amplitude.abs() * base.horizon().sqrt()).powi(2);
    report.metric("energy_bound", bound);

    let limit = gamma0(m, cfg, base)?;
    let rows = eps_list
        .par_iter()
        .map(|&eps| -> Result<(f64, f64, bool)> {
            let k = oscillatory_family(base, amplitude, eps)?;
            let d = xt_distance(&gamma0(m, cfg, &k)?, &limit, &m.space)?;
            Ok((d, control_energy(&k), in_sn(&k, bound * (1.0 + 1e-12))))
        })
        .collect::<Result<Vec<_>>>()?;
    for (i, (eps, (d, energy, _))) in eps_list.iter().zip(&rows).enumerate() {
        report.context(format!("eps_{i}"), eps);
        report.metric(format!("distance_{i}"), *d);
        report.metric(format!("control_energy_{i}"), *energy);
    }
    report.check_bool("family_in_sn", rows.iter().all(|r| r.2));
    let dists: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let strictly = dists.windows(2).all(|w| w[1] < w[0] || (w[0] == 0.0 && w[1] == 0.0));
    report.metric("strictly_decreasing", if strictly { 1.0 } else { 0.0 });
    let (first, last) = (dists[0], *dists.last().unwrap());
    report.check("decrease_factor", decrease_factor(first, last), Relation::AtLeast, settings.min_factor);
    report.check("last_distance", last, Relation::AtMost, settings.threshold);

    if settings.reference {
        let fine = cfg.with_dt(cfg.dt / 8.0);
        let eps = *eps_list.last().unwrap();
        let k = oscillatory_family(base, amplitude, eps)?;
        let (a, b) = rayon::join(|| gamma0(m, &fine, &k), || gamma0(m, &fine, base));
        let d_ref = xt_distance(&a?, &b?, &m.space)?;
        report.metric("reference_last_distance", d_ref);
        report.metric("reference_gap", (d_ref - last).abs());
    }
    Ok(report)
}

/// Sensitivity of the controlled map to a strong perturbation of `k`.
pub fn lipschitz_probe(m: &ModelSpec, cfg: &StepperConfig, k1: &Control, k2: &Control) -> Result<ExperimentReport> {
    let (a, b) = rayon::join(|| gamma0(m, cfg, k1), || gamma0(m, cfg, k2));
    let (a, b) = (a?, b?);
    let d = xt_distance(&a, &b, &m.space)?;
    let dk = control_distance(k1, k2)?;
    let mut report = ExperimentReport::new("lipschitz-probe");
    report.metric("xt_distance", d);
    report.metric("control_distance", dk);
    report.metric("ratio", if dk > 0.0 { d / dk } else { 0.0 });
    report.metric("path_energy_1", path_energy(&a, &m.space)?);
    report.metric("path_energy_2", path_energy(&b, &m.space)?);
    Ok(report)
}
