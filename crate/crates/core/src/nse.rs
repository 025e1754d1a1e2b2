//! Divergence-free Fourier Galerkin truncation of the 2D Navier–Stokes
//! nonlinearity on the torus `[0, 2π)²`.
//!
//! Each wavevector `k` of a negation-closed set carries one real mode. With
//! `k⁺` the representative of `{k, -k}` whose first nonzero component is
//! positive and `e(k⁺) = (-k⁺₂, k⁺₁) / |k⁺|`:
//!
//! ```text
//! φ_k(x) = √2 cos(k⁺·x) e(k⁺)   if k = k⁺
//! φ_k(x) = √2 sin(k⁺·x) e(k⁺)   if k = -k⁺
//! ```
//!
//! The modes are orthonormal for the mean over the torus and divergence free,
//! so `b(u, v, w) = mean(((u·∇)v)·w)` is exactly antisymmetric in `(v, w)`.
//! The Stokes eigenvalue of `φ_k` is `|k|²`.

use num_complex::Complex64;

use crate::dynamics::TrilinearForm;
use crate::error::{Error, Result};
use crate::space::SpaceConfig;

pub type Wavevector = (i64, i64);

/// `±(1,0), ±(0,1), ±(1,1), ±(1,-1)`.
pub fn torus_wavenumbers_8() -> Vec<Wavevector> {
    vec![(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (-1, -1), (1, -1), (-1, 1)]
}

/// The 8-mode set plus `±(2,0), ±(0,2), ±(2,1), ±(1,2)`.
pub fn torus_wavenumbers_16() -> Vec<Wavevector> {
    let mut k = torus_wavenumbers_8();
    k.extend([(2, 0), (-2, 0), (0, 2), (0, -2), (2, 1), (-2, -1), (1, 2), (-1, -2)]);
    k
}

fn is_representative(k: Wavevector) -> bool {
    k.0 > 0 || (k.0 == 0 && k.1 > 0)
}

fn norm_sq(k: Wavevector) -> i64 {
    k.0 * k.0 + k.1 * k.1
}

/// Stokes spectrum `|k|²`, in list order. Lists sorted by `|k|²` give a
/// nondecreasing spectrum.
pub fn torus_space(wavenumbers: &[Wavevector]) -> Result<SpaceConfig> {
    SpaceConfig::new(wavenumbers.iter().map(|&k| norm_sq(k) as f64).collect())
}

/// One term `c · exp(i m·x)` of a trigonometric polynomial.
#[derive(Clone, Copy)]
struct Term {
    coef: Complex64,
    m: Wavevector,
}

struct Mode {
    /// Scalar amplitude `a(x)` as exponential terms.
    amplitude: [Term; 2],
    /// Unit direction `e(k⁺)`.
    direction: [f64; 2],
}

impl Mode {
    fn new(k: Wavevector) -> Self {
        let kp = if is_representative(k) { k } else { (-k.0, -k.1) };
        let neg = (-kp.0, -kp.1);
        let h = std::f64::consts::SQRT_2 / 2.0;
        let amplitude = if is_representative(k) {
            [Term { coef: Complex64::new(h, 0.0), m: kp }, Term { coef: Complex64::new(h, 0.0), m: neg }]
        } else {
            // √2 sin θ = (√2 / 2i)(e^{iθ} - e^{-iθ})
            [Term { coef: Complex64::new(0.0, -h), m: kp }, Term { coef: Complex64::new(0.0, h), m: neg }]
        };
        let len = (norm_sq(kp) as f64).sqrt();
        Self { amplitude, direction: [-kp.1 as f64 / len, kp.0 as f64 / len] }
    }

    /// `∂_α a` as exponential terms.
    fn derivative(&self, alpha: usize) -> [Term; 2] {
        self.amplitude.map(|t| {
            let m_alpha = if alpha == 0 { t.m.0 } else { t.m.1 } as f64;
            Term { coef: t.coef * Complex64::new(0.0, m_alpha), m: t.m }
        })
    }
}

/// Mean over the torus of a product of three trigonometric polynomials.
fn triple_mean(a: &[Term], b: &[Term], c: &[Term]) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for x in a {
        for y in b {
            for z in c {
                if x.m.0 + y.m.0 + z.m.0 == 0 && x.m.1 + y.m.1 + z.m.1 == 0 {
                    acc += x.coef * y.coef * z.coef;
                }
            }
        }
    }
    acc
}

pub fn validate_wavenumbers(wavenumbers: &[Wavevector]) -> Result<()> {
    for (idx, &k) in wavenumbers.iter().enumerate() {
        if k == (0, 0) {
            return Err(Error::config("wavevector (0, 0) is not allowed"));
        }
        if wavenumbers[..idx].contains(&k) {
            return Err(Error::config(format!("duplicate wavevector {k:?}")));
        }
        if !wavenumbers.contains(&(-k.0, -k.1)) {
            return Err(Error::config(format!(
                "wavevector set is not closed under negation: {k:?} lacks its negative"
            )));
        }
    }
    Ok(())
}

/// The Galerkin form `b_{ijl} = mean(((φ_i·∇)φ_j)·φ_l)` on the given modes.
pub fn nse_galerkin_form(cfg: &SpaceConfig, wavenumbers: &[Wavevector]) -> Result<TrilinearForm> {
    validate_wavenumbers(wavenumbers)?;
    if wavenumbers.len() != cfg.dim() {
        return Err(Error::DimensionMismatch { expected: cfg.dim(), found: wavenumbers.len() });
    }
    let modes: Vec<Mode> = wavenumbers.iter().map(|&k| Mode::new(k)).collect();
    let grads: Vec<[[Term; 2]; 2]> = modes.iter().map(|m| [m.derivative(0), m.derivative(1)]).collect();
    let d = modes.len();
    let mut raw = vec![0.0; d * d * d];
    for (i, mi) in modes.iter().enumerate() {
        for (j, mj) in modes.iter().enumerate() {
            for (l, ml) in modes.iter().enumerate() {
                let dir = mj.direction[0] * ml.direction[0] + mj.direction[1] * ml.direction[1];
                if dir == 0.0 {
                    continue;
                }
                let mut s = Complex64::new(0.0, 0.0);
                for alpha in 0..2 {
                    let e = mi.direction[alpha];
                    if e != 0.0 {
                        s += e * triple_mean(&mi.amplitude, &grads[j][alpha], &ml.amplitude);
                    }
                }
                raw[(i * d + j) * d + l] = dir * s.re;
            }
        }
    }
    Ok(TrilinearForm::from_coefficients(cfg, |i, j, l| raw[(i * d + j) * d + l]))
}
