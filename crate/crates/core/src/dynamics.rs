//! Coefficient maps `f`, `σ`, the trilinear form `b` and the assumption audit.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::report::{ExperimentReport, Relation};
use crate::rng::{derive_seed, NormalStream};
use crate::space::{dual_norm_sq, v_norm_sq, SpaceConfig, SpectralVector};

pub type VectorField = Arc<dyn Fn(&SpectralVector) -> SpectralVector + Send + Sync>;

/// Radius of the ball on which the Lipschitz audit samples points. Penalized
/// states overshoot the unit ball by `O(1/n)`, so the audit covers a margin.
pub const AUDIT_RADIUS: f64 = 1.5;

#[derive(Clone)]
pub enum DriftKind {
    /// `f(u) = -damping · u + forcing`.
    Affine { damping: f64, forcing: SpectralVector },
    Custom(VectorField),
}

/// Drift `f: H -> V*` with its declared Lipschitz constant.
#[derive(Clone)]
pub struct DriftMap {
    pub kind: DriftKind,
    pub lipschitz_bound: f64,
}

impl fmt::Debug for DriftMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            DriftKind::Affine { damping, forcing } => f
                .debug_struct("DriftMap::Affine")
                .field("damping", damping)
                .field("forcing", forcing)
                .field("lipschitz_bound", &self.lipschitz_bound)
                .finish(),
            DriftKind::Custom(_) => f
                .debug_struct("DriftMap::Custom")
                .field("lipschitz_bound", &self.lipschitz_bound)
                .finish(),
        }
    }
}

impl DriftMap {
    pub fn zero(dim: usize) -> Self {
        Self::affine(0.0, SpectralVector::zeros(dim), 1.0)
    }

    /// `f(u) = -damping · u + forcing`; the V* Lipschitz constant is
    /// `|damping| / sqrt(λ_1)`.
    pub fn affine(damping: f64, forcing: SpectralVector, lambda_min: f64) -> Self {
        Self {
            kind: DriftKind::Affine { damping, forcing },
            lipschitz_bound: damping.abs() / lambda_min.sqrt(),
        }
    }

    pub fn custom(f: VectorField, lipschitz_bound: f64) -> Self {
        Self { kind: DriftKind::Custom(f), lipschitz_bound }
    }

    pub fn with_lipschitz_bound(mut self, c: f64) -> Self {
        self.lipschitz_bound = c;
        self
    }

    /// Upper bound of `|f(u)|` over the unit ball.
    pub fn ball_bound(&self, dim: usize) -> f64 {
        match &self.kind {
            DriftKind::Affine { damping, forcing } => damping.abs() + forcing.norm(),
            DriftKind::Custom(f) => f(&SpectralVector::zeros(dim)).norm() + self.lipschitz_bound,
        }
    }
}

pub fn eval_f(m: &DriftMap, u: &SpectralVector) -> Result<SpectralVector> {
    let out = match &m.kind {
        DriftKind::Affine { damping, forcing } => {
            if forcing.dim() != u.dim() {
                return Err(Error::DimensionMismatch { expected: forcing.dim(), found: u.dim() });
            }
            let mut out = forcing.clone();
            out.axpy(-damping, u);
            out
        }
        DriftKind::Custom(f) => f(u),
    };
    finite_output(out, u.dim(), "drift f")
}

#[derive(Clone)]
pub enum DiffusionKind {
    Zero,
    Constant(SpectralVector),
    /// `σ(u) = scale · u`.
    Linear(f64),
    /// `σ(u) = (1 - |u|²) · direction`, vanishing on the unit sphere.
    Vanishing(SpectralVector),
    Custom(VectorField),
}

/// Diffusion `σ: H -> H` with its declared constant for Lipschitz continuity
/// and linear growth.
#[derive(Clone)]
pub struct DiffusionMap {
    pub kind: DiffusionKind,
    pub lipschitz_bound: f64,
}

impl fmt::Debug for DiffusionMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match &self.kind {
            DiffusionKind::Zero => "Zero".to_string(),
            DiffusionKind::Constant(c) => format!("Constant({:?})", c.coeffs()),
            DiffusionKind::Linear(s) => format!("Linear({s})"),
            DiffusionKind::Vanishing(d) => format!("Vanishing({:?})", d.coeffs()),
            DiffusionKind::Custom(_) => "Custom".to_string(),
        };
        f.debug_struct("DiffusionMap")
            .field("kind", &name)
            .field("lipschitz_bound", &self.lipschitz_bound)
            .finish()
    }
}

impl DiffusionMap {
    pub fn zero() -> Self {
        Self { kind: DiffusionKind::Zero, lipschitz_bound: 0.0 }
    }

    pub fn constant(c: SpectralVector) -> Self {
        let bound = c.norm();
        Self { kind: DiffusionKind::Constant(c), lipschitz_bound: bound }
    }

    pub fn linear(scale: f64) -> Self {
        Self { kind: DiffusionKind::Linear(scale), lipschitz_bound: scale.abs() }
    }

    /// Declared constant covers the audit ball: `|∇σ| ≤ 2 R |direction|`.
    pub fn vanishing(direction: SpectralVector) -> Self {
        let bound = 2.0 * AUDIT_RADIUS * direction.norm();
        Self { kind: DiffusionKind::Vanishing(direction), lipschitz_bound: bound }
    }

    pub fn custom(f: VectorField, lipschitz_bound: f64) -> Self {
        Self { kind: DiffusionKind::Custom(f), lipschitz_bound }
    }

    pub fn with_lipschitz_bound(mut self, c: f64) -> Self {
        self.lipschitz_bound = c;
        self
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.kind, DiffusionKind::Zero)
    }

    /// Upper bound of `|σ(u)|` over the unit ball.
    pub fn ball_bound(&self) -> f64 {
        match &self.kind {
            DiffusionKind::Zero => 0.0,
            DiffusionKind::Constant(c) => c.norm(),
            DiffusionKind::Linear(s) => s.abs(),
            DiffusionKind::Vanishing(d) => d.norm(),
            DiffusionKind::Custom(_) => 2.0 * self.lipschitz_bound,
        }
    }
}

pub fn eval_sigma(m: &DiffusionMap, u: &SpectralVector) -> Result<SpectralVector> {
    let dim_of = |v: &SpectralVector| -> Result<()> {
        if v.dim() == u.dim() {
            Ok(())
        } else {
            Err(Error::DimensionMismatch { expected: v.dim(), found: u.dim() })
        }
    };
    let out = match &m.kind {
        DiffusionKind::Zero => SpectralVector::zeros(u.dim()),
        DiffusionKind::Constant(c) => {
            dim_of(c)?;
            c.clone()
        }
        DiffusionKind::Linear(s) => u.scaled(*s),
        DiffusionKind::Vanishing(d) => {
            dim_of(d)?;
            d.scaled(1.0 - u.norm_sq())
        }
        DiffusionKind::Custom(f) => f(u),
    };
    finite_output(out, u.dim(), "diffusion sigma")
}

fn finite_output(out: SpectralVector, dim: usize, what: &'static str) -> Result<SpectralVector> {
    if out.dim() != dim {
        return Err(Error::DimensionMismatch { expected: dim, found: out.dim() });
    }
    if !out.is_finite() {
        return Err(Error::NonFinite(what));
    }
    Ok(out)
}

/// Sparse coefficient `T[i][j][l]` of `b(u, v, w) = Σ T_ijl u_i v_j w_l`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TensorEntry {
    pub i: usize,
    pub j: usize,
    pub l: usize,
    pub value: f64,
}

/// Trilinear form `b: V × V × V -> ℝ`, antisymmetric in its last two slots,
/// with `B(u, v)` defined by `<B(u, v), w> = b(u, v, w)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrilinearForm {
    dim: usize,
    entries: Vec<TensorEntry>,
    /// Constant `c` in `|b(u,v,w)| ≤ c ||u||^½ |u|^½ ||w||^½ |w|^½ ||v||`.
    pub continuity_constant: f64,
}

impl TrilinearForm {
    pub fn zero(dim: usize) -> Self {
        Self { dim, entries: Vec::new(), continuity_constant: 0.0 }
    }

    /// Builds a form from raw coefficients `raw(i, j, l)`, antisymmetrized in
    /// `(j, l)`. The continuity constant is the rigorous bound
    /// `|T|_F / λ_1`, which follows from `|x| ≤ λ_1^{-1/2} ||x||`.
    pub fn from_coefficients(space: &SpaceConfig, raw: impl Fn(usize, usize, usize) -> f64) -> Self {
        let d = space.dim();
        let mut entries = Vec::new();
        for i in 0..d {
            for j in 0..d {
                for l in 0..d {
                    let value = 0.5 * (raw(i, j, l) - raw(i, l, j));
                    if value.abs() > 1e-15 {
                        entries.push(TensorEntry { i, j, l, value });
                    }
                }
            }
        }
        let frob = entries.iter().map(|e| e.value * e.value).sum::<f64>().sqrt();
        Self { dim: d, entries, continuity_constant: frob / space.lambda_min() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[TensorEntry] {
        &self.entries
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    /// Frobenius norm of the coefficient tensor; bounds `|B(u,u)|` on the unit ball.
    pub fn frobenius(&self) -> f64 {
        self.entries.iter().map(|e| e.value * e.value).sum::<f64>().sqrt()
    }

    pub fn with_continuity_constant(mut self, c: f64) -> Self {
        self.continuity_constant = c;
        self
    }

    fn check(&self, x: &SpectralVector) -> Result<()> {
        if x.dim() == self.dim {
            Ok(())
        } else {
            Err(Error::DimensionMismatch { expected: self.dim, found: x.dim() })
        }
    }

    /// `B(u, v)` as a V* coefficient vector.
    pub fn apply(&self, u: &SpectralVector, v: &SpectralVector) -> Result<SpectralVector> {
        self.check(u)?;
        self.check(v)?;
        let (uc, vc) = (u.coeffs(), v.coeffs());
        let mut out = vec![0.0; self.dim];
        for e in &self.entries {
            out[e.l] += e.value * uc[e.i] * vc[e.j];
        }
        finite_output(SpectralVector::from_vec_unchecked(out), self.dim, "bilinear map B")
    }
}

pub fn eval_b(form: &TrilinearForm, u: &SpectralVector, v: &SpectralVector, w: &SpectralVector) -> Result<f64> {
    form.check(u)?;
    form.check(v)?;
    form.check(w)?;
    let (uc, vc, wc) = (u.coeffs(), v.coeffs(), w.coeffs());
    // Sum over pairs j < l; entry (i, l, j) is the negation of (i, j, l).
    let val: f64 = form
        .entries
        .iter()
        .filter(|e| e.j < e.l)
        .map(|e| e.value * uc[e.i] * (vc[e.j] * wc[e.l] - vc[e.l] * wc[e.j]))
        .sum();
    if val.is_finite() {
        Ok(val)
    } else {
        Err(Error::NonFinite("trilinear form b"))
    }
}

/// One problem instance.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    pub space: SpaceConfig,
    pub drift: DriftMap,
    pub diffusion: DiffusionMap,
    pub form: TrilinearForm,
    pub u0: SpectralVector,
}

impl ModelSpec {
    pub fn new(
        space: SpaceConfig,
        drift: DriftMap,
        diffusion: DiffusionMap,
        form: TrilinearForm,
        u0: SpectralVector,
    ) -> Result<Self> {
        space.check_dim(&u0)?;
        if form.dim() != space.dim() {
            return Err(Error::DimensionMismatch { expected: space.dim(), found: form.dim() });
        }
        if u0.norm() > 1.0 {
            return Err(Error::config(format!("initial state has |u0| = {} > 1", u0.norm())));
        }
        Ok(Self { space, drift, diffusion, form, u0 })
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    /// Declared bound on the deterministic drift over the unit ball, used for
    /// the reflection tolerance of penalized output.
    pub fn drift_bound(&self, control_max: f64) -> f64 {
        self.drift.ball_bound(self.dim()) + self.form.frobenius() + self.diffusion.ball_bound() * control_max
    }
}

/// Uniform point in the ball of the given radius.
pub(crate) fn uniform_in_ball(stream: &mut NormalStream, dim: usize, radius: f64) -> SpectralVector {
    let g: Vec<f64> = (0..dim).map(|_| stream.next_normal()).collect();
    let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    let r = radius * stream.next_uniform().powf(1.0 / dim as f64);
    SpectralVector::from_vec_unchecked(g.into_iter().map(|x| x * r / norm).collect())
}

/// Statistical audit of the Lipschitz, growth and trilinear-form bounds for one instance.
pub fn verify_assumptions(m: &ModelSpec, samples: usize, rng_seed: u64) -> ExperimentReport {
    let mut report = ExperimentReport::new("verify-assumptions");
    report.context("seed", rng_seed);
    report.context("samples", samples);
    let d = m.dim();
    let mut stream = NormalStream::new(derive_seed(rng_seed, 0xA55));

    let mut f_ratio = 0.0f64;
    let mut sigma_ratio = 0.0f64;
    let mut growth_ratio = 0.0f64;
    let mut antisym = 0.0f64;
    let mut interp = 0.0f64;
    let mut b_dual = 0.0f64;
    let mut errors = 0usize;

    for _ in 0..samples.max(1) {
        let u = uniform_in_ball(&mut stream, d, AUDIT_RADIUS);
        let v = uniform_in_ball(&mut stream, d, AUDIT_RADIUS);
        let w = uniform_in_ball(&mut stream, d, AUDIT_RADIUS);
        let duv = (&u - &v).norm();
        if duv == 0.0 {
            continue;
        }
        let step = (|| -> Result<()> {
            let df = &eval_f(&m.drift, &u)? - &eval_f(&m.drift, &v)?;
            f_ratio = f_ratio.max(dual_norm_sq(&df, &m.space)?.sqrt() / duv);
            let su = eval_sigma(&m.diffusion, &u)?;
            let ds = &su - &eval_sigma(&m.diffusion, &v)?;
            sigma_ratio = sigma_ratio.max(ds.norm() / duv);
            growth_ratio = growth_ratio.max(su.norm() / (1.0 + u.norm()));

            let b_uvw = eval_b(&m.form, &u, &v, &w)?;
            let b_uwv = eval_b(&m.form, &u, &w, &v)?;
            antisym = antisym.max((b_uvw + b_uwv).abs() / (1.0 + b_uvw.abs()));
            let (nu, nv, nw) = (
                v_norm_sq(&u, &m.space)?.sqrt(),
                v_norm_sq(&v, &m.space)?.sqrt(),
                v_norm_sq(&w, &m.space)?.sqrt(),
            );
            let rhs = (nu * u.norm() * nw * w.norm()).sqrt() * nv;
            if rhs > 0.0 {
                interp = interp.max(b_uvw.abs() / rhs);
            }
            let buu = m.form.apply(&u, &u)?;
            if nu > 0.0 {
                b_dual = b_dual.max(dual_norm_sq(&buu, &m.space)?.sqrt() / (nu * u.norm()));
            }
            Ok(())
        })();
        if step.is_err() {
            errors += 1;
        }
    }

    let rel = 1e-12;
    report.check("f_lipschitz_ratio", f_ratio, Relation::AtMost, m.drift.lipschitz_bound * (1.0 + rel));
    report.check("sigma_lipschitz_ratio", sigma_ratio, Relation::AtMost, m.diffusion.lipschitz_bound * (1.0 + rel));
    report.check("sigma_growth_ratio", growth_ratio, Relation::AtMost, m.diffusion.lipschitz_bound * (1.0 + rel));
    let slack = 1e-9;
    report.check("b_antisymmetry_defect", antisym, Relation::AtMost, slack);
    report.check("b_interpolation_ratio", interp, Relation::AtMost, m.form.continuity_constant + slack);
    report.check("B_dual_bound_ratio", b_dual, Relation::AtMost, m.form.continuity_constant + slack);
    report.check("u0_norm", m.u0.norm(), Relation::AtMost, 1.0);
    report.check("evaluation_errors", errors as f64, Relation::AtMost, 0.0);
    report
}
