//! Galerkin model of the triple `V ⊂ H ⊂ V*`.
//!
//! A state is a coefficient vector in the eigenbasis of the positive
//! self-adjoint operator `A`, so every norm of the triple is diagonal:
//!
//! ```text
//! |u|^2      = Σ u_i^2            (H)
//! ||u||^2    = Σ λ_i u_i^2        (V)
//! |u|_{V*}^2 = Σ u_i^2 / λ_i      (V*)
//! ```

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trajectory::Trajectory;

/// Default Galerkin truncation size.
pub const DEFAULT_DIM: usize = 16;

/// Spectrum of `A` on the retained modes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceConfig {
    eigenvalues: Vec<f64>,
}

impl SpaceConfig {
    /// Validates positivity and monotonicity of the spectrum.
    pub fn new(eigenvalues: Vec<f64>) -> Result<Self> {
        if eigenvalues.is_empty() {
            return Err(Error::config("space needs at least one mode"));
        }
        if let Some(bad) = eigenvalues.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
            return Err(Error::config(format!("eigenvalue {bad} is not a positive finite real")));
        }
        if eigenvalues.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::config("eigenvalues must be nondecreasing"));
        }
        Ok(Self { eigenvalues })
    }

    /// `λ_i = i^2`, i = 1..=dim.
    pub fn laplacian_like(dim: usize) -> Result<Self> {
        Self::new((1..=dim).map(|i| (i * i) as f64).collect())
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Coercivity constant `λ_1`.
    pub fn lambda_min(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn lambda_max(&self) -> f64 {
        *self.eigenvalues.last().unwrap()
    }

    pub fn check_dim(&self, x: &SpectralVector) -> Result<()> {
        check_same(self.dim(), x.dim())
    }
}

impl Default for SpaceConfig {
    fn default() -> Self {
        Self::laplacian_like(DEFAULT_DIM).expect("default spectrum is valid")
    }
}

/// Coordinates of a state in the eigenbasis of `A`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SpectralVector(Vec<f64>);

impl SpectralVector {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("SpectralVector::new"));
        }
        Ok(Self(coeffs))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    /// Unit vector `e_i` (zero-based).
    pub fn basis(dim: usize, i: usize) -> Self {
        let mut v = vec![0.0; dim];
        v[i] = 1.0;
        Self(v)
    }

    pub(crate) fn from_vec_unchecked(coeffs: Vec<f64>) -> Self {
        Self(coeffs)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }

    /// H-norm.
    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn norm_sq(&self) -> f64 {
        self.0.iter().map(|c| c * c).sum()
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        Self(self.0.iter().map(|c| alpha * c).collect())
    }

    /// `self += alpha * x`, dimensions assumed equal.
    pub(crate) fn axpy(&mut self, alpha: f64, x: &SpectralVector) {
        for (a, b) in self.0.iter_mut().zip(&x.0) {
            *a += alpha * b;
        }
    }
}

impl<'a> Add<&'a SpectralVector> for &'a SpectralVector {
    type Output = SpectralVector;
    fn add(self, rhs: &SpectralVector) -> SpectralVector {
        SpectralVector(self.0.iter().zip(&rhs.0).map(|(a, b)| a + b).collect())
    }
}

impl<'a> Sub<&'a SpectralVector> for &'a SpectralVector {
    type Output = SpectralVector;
    fn sub(self, rhs: &SpectralVector) -> SpectralVector {
        SpectralVector(self.0.iter().zip(&rhs.0).map(|(a, b)| a - b).collect())
    }
}

impl Mul<f64> for &SpectralVector {
    type Output = SpectralVector;
    fn mul(self, rhs: f64) -> SpectralVector {
        self.scaled(rhs)
    }
}

impl Neg for &SpectralVector {
    type Output = SpectralVector;
    fn neg(self) -> SpectralVector {
        self.scaled(-1.0)
    }
}

fn check_same(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}

/// H inner product `(x, y)`.
pub fn h_inner(x: &SpectralVector, y: &SpectralVector) -> Result<f64> {
    check_same(x.dim(), y.dim())?;
    Ok(x.0.iter().zip(&y.0).map(|(a, b)| a * b).sum())
}

/// `||x||^2 = Σ λ_i x_i^2`.
pub fn v_norm_sq(x: &SpectralVector, cfg: &SpaceConfig) -> Result<f64> {
    cfg.check_dim(x)?;
    Ok(x.0.iter().zip(&cfg.eigenvalues).map(|(c, l)| l * c * c).sum())
}

/// `|x|_{V*}^2 = Σ x_i^2 / λ_i`.
pub fn dual_norm_sq(x: &SpectralVector, cfg: &SpaceConfig) -> Result<f64> {
    cfg.check_dim(x)?;
    Ok(x.0.iter().zip(&cfg.eigenvalues).map(|(c, l)| c * c / l).sum())
}

#[allow(non_snake_case)]
pub fn apply_A(x: &SpectralVector, cfg: &SpaceConfig) -> Result<SpectralVector> {
    cfg.check_dim(x)?;
    Ok(SpectralVector(
        x.0.iter().zip(&cfg.eigenvalues).map(|(c, l)| l * c).collect(),
    ))
}

/// Metric projection onto the closed unit ball. The result satisfies
/// `|π(y)| ≤ 1` in floating point.
pub fn project_ball(y: &SpectralVector) -> SpectralVector {
    let r = y.norm();
    if r <= 1.0 {
        return y.clone();
    }
    let mut shrink = 1.0;
    let mut p = y.scaled(1.0 / r);
    while p.norm() > 1.0 {
        shrink -= 4.0 * f64::EPSILON;
        p = y.scaled(shrink / r);
    }
    p
}

/// `y - π(y)`; zero inside the ball.
pub fn ball_defect(y: &SpectralVector) -> SpectralVector {
    let r = y.norm();
    if r <= 1.0 {
        SpectralVector::zeros(y.dim())
    } else {
        y.scaled(1.0 - 1.0 / r)
    }
}

/// `|y - π(y)| = max(0, |y| - 1)`.
pub fn ball_defect_norm(y: &SpectralVector) -> f64 {
    (y.norm() - 1.0).max(0.0)
}

/// Distance in `X_T`: `sqrt(max_t |a-b|^2 + ∫ ||a-b||^2 ds)`, the integral by
/// the trapezoidal rule on the shared grid.
pub fn xt_distance(a: &Trajectory, b: &Trajectory, cfg: &SpaceConfig) -> Result<f64> {
    if a.grid.len() != b.grid.len() || a.grid.iter().zip(&b.grid).any(|(s, t)| s != t) {
        return Err(Error::GridMismatch(format!(
            "{} vs {} grid points",
            a.grid.len(),
            b.grid.len()
        )));
    }
    let mut sup_h = 0.0f64;
    let mut v_sq = Vec::with_capacity(a.grid.len());
    for (x, y) in a.states.iter().zip(&b.states) {
        let diff = x - y;
        cfg.check_dim(&diff)?;
        sup_h = sup_h.max(diff.norm_sq());
        v_sq.push(v_norm_sq(&diff, cfg)?);
    }
    Ok((sup_h + trapezoid(&a.grid, &v_sq)).sqrt())
}

pub(crate) fn trapezoid(grid: &[f64], values: &[f64]) -> f64 {
    grid.windows(2)
        .zip(values.windows(2))
        .map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1]))
        .sum()
}
