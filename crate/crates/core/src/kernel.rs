//! Matérn-5/2 covariance with automatic relevance determination.

use serde::{Deserialize, Serialize};

const SQRT5: f64 = 2.236_067_977_499_79;

/// Matérn-5/2 as a function of distance for a single lengthscale:
/// `σ_f² (1 + √5 r/ℓ + 5 r²/(3ℓ²)) exp(−√5 r/ℓ)`.
pub fn matern52(r: f64, variance: f64, lengthscale: f64) -> f64 {
    let s = r / lengthscale;
    variance * unit_shape(s * s).0
}

/// Returns `(k(s), φ(s))` for unit variance, where `s² = r²/ℓ²` and
/// `φ = (5/3)(1 + √5 s) e^{−√5 s}` so that `∂k/∂(s²) = −φ/2`.
#[inline]
pub(crate) fn unit_shape(s2: f64) -> (f64, f64) {
    let s = s2.max(0.0).sqrt();
    let e = (-SQRT5 * s).exp();
    let k = (1.0 + SQRT5 * s + 5.0 / 3.0 * s2) * e;
    let phi = 5.0 / 3.0 * (1.0 + SQRT5 * s) * e;
    (k, phi)
}

/// ARD Matérn-5/2 kernel `k(a, b)` over `R^Q`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Matern52 {
    pub variance: f64,
    pub lengthscales: Vec<f64>,
}

impl Matern52 {
    pub fn new(variance: f64, lengthscales: Vec<f64>) -> Self {
        Matern52 {
            variance,
            lengthscales,
        }
    }

    pub fn isotropic(variance: f64, lengthscale: f64, dims: usize) -> Self {
        Matern52::new(variance, vec![lengthscale; dims])
    }

    pub fn dims(&self) -> usize {
        self.lengthscales.len()
    }

    #[inline]
    pub fn scaled_dist2(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .zip(&self.lengthscales)
            .map(|((x, y), l)| {
                let d = (x - y) / l;
                d * d
            })
            .sum()
    }

    #[inline]
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        self.variance * unit_shape(self.scaled_dist2(a, b)).0
    }

    /// Kernel value and its gradient with respect to `a`.
    pub fn eval_grad(&self, a: &[f64], b: &[f64], grad_a: &mut [f64]) -> f64 {
        let (k, phi) = unit_shape(self.scaled_dist2(a, b));
        for q in 0..a.len() {
            let l = self.lengthscales[q];
            grad_a[q] = -self.variance * phi * (a[q] - b[q]) / (l * l);
        }
        self.variance * k
    }

    /// Gram matrix between two point sets (row-major, `a.len() × b.len()`).
    pub fn gram(&self, a: &[Vec<f64>], b: &[Vec<f64>]) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_fn(a.len(), b.len(), |i, j| self.eval(&a[i], &b[j]))
    }
}
