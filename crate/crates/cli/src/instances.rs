//! Registry of model instances buildable from a `[model]` table.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use refldp::nse::{nse_galerkin_form, torus_space, torus_wavenumbers_16, torus_wavenumbers_8};
use refldp::{DiffusionMap, DriftMap, ModelSpec, SpaceConfig, SpectralVector, TrilinearForm};

use crate::CliError;

#[derive(Debug, Clone, Serialize)]
pub struct ParamSchema {
    pub name: &'static str,
    #[serde(rename = "type")]
    pub kind: &'static str,
    pub default: &'static str,
    pub doc: &'static str,
}

#[derive(Debug, Clone, Serialize)]
pub struct InstanceSchema {
    pub name: &'static str,
    pub summary: &'static str,
    pub params: Vec<ParamSchema>,
}

const fn p(name: &'static str, kind: &'static str, default: &'static str, doc: &'static str) -> ParamSchema {
    ParamSchema { name, kind, default, doc }
}

pub fn registry() -> Vec<InstanceSchema> {
    let declared = [
        p("drift_lipschitz", "real", "derived", "override of the declared drift Lipschitz constant"),
        p("sigma_lipschitz", "real", "derived", "override of the declared diffusion Lipschitz constant"),
    ];
    let nse_params = |summary| InstanceSchema {
        name: "",
        summary,
        params: [
            p("viscosity", "real", "1.0", "A = viscosity · |k|²"),
            p("damping", "real", "0.0", "f(u) = -damping·u + forcing"),
            p("forcing", "vector", "zeros", "forcing coefficients, one per mode"),
            p("sigma", "vector", "zeros", "constant diffusion vector, one entry per mode"),
            p("u0", "vector", "zeros", "initial state, |u0| ≤ 1"),
        ]
        .into_iter()
        .chain(declared.clone())
        .collect(),
    };
    vec![
        InstanceSchema {
            name: "zero",
            summary: "A = diag(i²), f = σ = b = 0",
            params: vec![
                p("dim", "integer", "4", "number of modes"),
                p("u0", "vector", "zeros", "initial state, |u0| ≤ 1"),
            ],
        },
        InstanceSchema {
            name: "linear-damped",
            summary: "A = diag(i²), f(u) = -damping·u + forcing, σ(u) = sigma_scale·u, b = 0",
            params: [
                p("dim", "integer", "4", "number of modes"),
                p("damping", "real", "1.0", "linear damping rate"),
                p("forcing", "vector", "zeros", "forcing coefficients"),
                p("sigma_scale", "real", "0.0", "multiplicative noise scale"),
                p("u0", "vector", "zeros", "initial state, |u0| ≤ 1"),
            ]
            .into_iter()
            .chain(declared.clone())
            .collect(),
        },
        InstanceSchema {
            name: "constant-sigma-scalar",
            summary: "d = 1, A = lambda, f(u) = -damping·u + forcing, σ ≡ sigma, b = 0",
            params: [
                p("lambda", "real", "1.0", "eigenvalue of A"),
                p("damping", "real", "0.0", "linear damping rate"),
                p("forcing", "real", "0.0", "constant forcing"),
                p("sigma", "real", "1.0", "constant diffusion"),
                p("u0", "real", "0.0", "initial state in [-1, 1]"),
            ]
            .into_iter()
            .chain(declared.clone())
            .collect(),
        },
        InstanceSchema { name: "nse-torus-8", ..nse_params("2D Navier–Stokes Galerkin truncation on 8 Fourier modes") },
        InstanceSchema { name: "nse-torus-16", ..nse_params("2D Navier–Stokes Galerkin truncation on 16 Fourier modes") },
    ]
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ZeroParams {
    #[serde(default = "default_dim")]
    dim: usize,
    u0: Option<Vec<f64>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LinearParams {
    #[serde(default = "default_dim")]
    dim: usize,
    #[serde(default = "one")]
    damping: f64,
    forcing: Option<Vec<f64>>,
    #[serde(default)]
    sigma_scale: f64,
    u0: Option<Vec<f64>>,
    drift_lipschitz: Option<f64>,
    sigma_lipschitz: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ScalarParams {
    #[serde(default = "one")]
    lambda: f64,
    #[serde(default)]
    damping: f64,
    #[serde(default)]
    forcing: f64,
    #[serde(default = "one")]
    sigma: f64,
    #[serde(default)]
    u0: f64,
    drift_lipschitz: Option<f64>,
    sigma_lipschitz: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct NseParams {
    #[serde(default = "one")]
    viscosity: f64,
    #[serde(default)]
    damping: f64,
    forcing: Option<Vec<f64>>,
    sigma: Option<Vec<f64>>,
    u0: Option<Vec<f64>>,
    drift_lipschitz: Option<f64>,
    sigma_lipschitz: Option<f64>,
}

fn default_dim() -> usize {
    4
}

fn one() -> f64 {
    1.0
}

fn parse<T: DeserializeOwned>(instance: &str, table: &toml::Table) -> Result<T, CliError> {
    toml::Value::Table(table.clone())
        .try_into()
        .map_err(|e| CliError::Config(format!("[model] parameters for instance `{instance}`: {e}")))
}

fn vector(name: &str, v: Option<Vec<f64>>, dim: usize) -> Result<SpectralVector, CliError> {
    match v {
        None => Ok(SpectralVector::zeros(dim)),
        Some(v) if v.len() == dim => Ok(SpectralVector::new(v)?),
        Some(v) => Err(CliError::Config(format!("`{name}` has {} entries, instance has {dim} modes", v.len()))),
    }
}

fn declare(mut drift: DriftMap, mut diffusion: DiffusionMap, f: Option<f64>, s: Option<f64>) -> (DriftMap, DiffusionMap) {
    if let Some(c) = f {
        drift = drift.with_lipschitz_bound(c);
    }
    if let Some(c) = s {
        diffusion = diffusion.with_lipschitz_bound(c);
    }
    (drift, diffusion)
}

fn squares(dim: usize) -> Result<SpaceConfig, CliError> {
    if dim == 0 {
        return Err(CliError::Config("dim must be positive".into()));
    }
    Ok(SpaceConfig::laplacian_like(dim)?)
}

/// Builds the named instance from its parameter table.
pub fn build_instance(name: &str, table: &toml::Table) -> Result<ModelSpec, CliError> {
    let model = match name {
        "zero" => {
            let p: ZeroParams = parse(name, table)?;
            let space = squares(p.dim)?;
            ModelSpec::new(space, DriftMap::zero(p.dim), DiffusionMap::zero(), TrilinearForm::zero(p.dim), vector("u0", p.u0, p.dim)?)?
        }
        "linear-damped" => {
            let p: LinearParams = parse(name, table)?;
            let space = squares(p.dim)?;
            let drift = DriftMap::affine(p.damping, vector("forcing", p.forcing, p.dim)?, space.lambda_min());
            let diffusion = if p.sigma_scale == 0.0 { DiffusionMap::zero() } else { DiffusionMap::linear(p.sigma_scale) };
            let (drift, diffusion) = declare(drift, diffusion, p.drift_lipschitz, p.sigma_lipschitz);
            ModelSpec::new(space, drift, diffusion, TrilinearForm::zero(p.dim), vector("u0", p.u0, p.dim)?)?
        }
        "constant-sigma-scalar" => {
            let p: ScalarParams = parse(name, table)?;
            let space = SpaceConfig::new(vec![p.lambda])?;
            let drift = DriftMap::affine(p.damping, SpectralVector::new(vec![p.forcing])?, p.lambda);
            let diffusion = if p.sigma == 0.0 { DiffusionMap::zero() } else { DiffusionMap::constant(SpectralVector::new(vec![p.sigma])?) };
            let (drift, diffusion) = declare(drift, diffusion, p.drift_lipschitz, p.sigma_lipschitz);
            ModelSpec::new(space, drift, diffusion, TrilinearForm::zero(1), SpectralVector::new(vec![p.u0])?)?
        }
        "nse-torus-8" | "nse-torus-16" => {
            let p: NseParams = parse(name, table)?;
            let ks = if name == "nse-torus-8" { torus_wavenumbers_8() } else { torus_wavenumbers_16() };
            let d = ks.len();
            if !(p.viscosity > 0.0) {
                return Err(CliError::Config("viscosity must be positive".into()));
            }
            let unit = torus_space(&ks)?;
            let space = SpaceConfig::new(unit.eigenvalues().iter().map(|l| p.viscosity * l).collect())?;
            let form = nse_galerkin_form(&space, &ks)?;
            let drift = DriftMap::affine(p.damping, vector("forcing", p.forcing, d)?, space.lambda_min());
            let sigma = vector("sigma", p.sigma, d)?;
            let diffusion = if sigma.norm() == 0.0 { DiffusionMap::zero() } else { DiffusionMap::constant(sigma) };
            let (drift, diffusion) = declare(drift, diffusion, p.drift_lipschitz, p.sigma_lipschitz);
            ModelSpec::new(space, drift, diffusion, form, vector("u0", p.u0, d)?)?
        }
        other => return Err(CliError::UnknownInstance(other.to_string())),
    };
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(s: &str) -> toml::Table {
        s.parse().unwrap()
    }

    #[test]
    fn every_registered_instance_builds_with_defaults() {
        for inst in registry() {
            let m = build_instance(inst.name, &toml::Table::new()).unwrap();
            assert!(m.dim() >= 1, "{}", inst.name);
        }
        assert!(registry().len() >= 5);
    }

    #[test]
    fn unknown_instance_and_fields() {
        assert!(matches!(build_instance("heat", &toml::Table::new()), Err(CliError::UnknownInstance(_))));
        assert!(matches!(build_instance("zero", &table("dimm = 3")), Err(CliError::Config(_))));
        assert!(build_instance("nse-torus-8", &table("u0 = [1.0]")).is_err());
        assert!(build_instance("constant-sigma-scalar", &table("u0 = 1.5")).is_err());
    }

    #[test]
    fn viscosity_scales_the_spectrum() {
        let m = build_instance("nse-torus-16", &table("viscosity = 0.5")).unwrap();
        assert_eq!(m.space.lambda_min(), 0.5);
        assert_eq!(m.space.lambda_max(), 2.5);
        assert!(!m.form.is_zero());
    }
}
