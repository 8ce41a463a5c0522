//! Collapsed variational lower bound of the Bayesian GP-LVM and its gradient.
//!
//! Tasks are the GP-LVM's datapoints: task `t` contributes its N standardized
//! targets as an N-dimensional output vector with latent input `h_t`. The
//! kernel expectations (Ψ statistics) under `q(h_t)` are computed with a
//! tensor Gauss–Hermite rule, so the bound is a smooth deterministic function
//! of the parameters and the gradient below is exact for it.

use nalgebra::DMatrix;

use crate::error::Result;
use crate::kernel::unit_shape;
use crate::linalg::{cholesky_jittered, log_det};
use crate::quadrature::GaussHermite;

/// Lengthscales are clamped to `[MIN_LENGTHSCALE, MAX_LENGTHSCALE]`.
pub const MIN_LENGTHSCALE: f64 = 1e-6;
pub const MAX_LENGTHSCALE: f64 = 1e2;

/// Signal variance range; targets are standardized, so this is generous.
/// Without an upper limit near-linear task families drive the kernel towards
/// its linear limit and the bound runs away.
pub const SIGNAL_VARIANCE_RANGE: (f64, f64) = (1e-4, 1e4);

/// Largest noise variance before the floor is added.
pub const MAX_NOISE_VARIANCE: f64 = 10.0;

/// Floor added to the noise variance so exactly duplicated tasks keep the bound finite.
pub const MIN_NOISE_VARIANCE: f64 = 1e-6;

/// Constant diagonal jitter on the inducing covariance.
const KUU_JITTER: f64 = 1e-6;

const LOG_2PI: f64 = 1.837_877_066_409_345_5;

/// Unconstrained encoder parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct EncoderState {
    /// `T × Q` variational means.
    pub means: Vec<Vec<f64>>,
    /// `T × Q` log variational variances.
    pub log_variances: Vec<Vec<f64>>,
    pub log_signal_variance: f64,
    pub log_lengthscales: Vec<f64>,
    pub log_noise_variance: f64,
    /// `M × Q` inducing inputs.
    pub inducing: Vec<Vec<f64>>,
}

impl EncoderState {
    pub fn num_tasks(&self) -> usize {
        self.means.len()
    }

    pub fn latent_dim(&self) -> usize {
        self.log_lengthscales.len()
    }

    pub fn num_inducing(&self) -> usize {
        self.inducing.len()
    }

    pub fn len(&self) -> usize {
        let (t, q, m) = (self.num_tasks(), self.latent_dim(), self.num_inducing());
        2 * t * q + 1 + q + 1 + m * q
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Flat layout: means, log variances, log σ_f², log ℓ, log σ², inducing inputs.
    pub fn pack(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.len());
        v.extend(self.means.iter().flatten());
        v.extend(self.log_variances.iter().flatten());
        v.push(self.log_signal_variance);
        v.extend(&self.log_lengthscales);
        v.push(self.log_noise_variance);
        v.extend(self.inducing.iter().flatten());
        v
    }

    /// Inverse of [`EncoderState::pack`] using `self` for the shape.
    pub fn unpack(&self, v: &[f64]) -> EncoderState {
        let (t, q, m) = (self.num_tasks(), self.latent_dim(), self.num_inducing());
        assert_eq!(v.len(), self.len());
        let rows = |start: usize, n: usize| -> Vec<Vec<f64>> {
            (0..n).map(|i| v[start + i * q..start + (i + 1) * q].to_vec()).collect()
        };
        let mut o = 0;
        let means = rows(o, t);
        o += t * q;
        let log_variances = rows(o, t);
        o += t * q;
        let log_signal_variance = v[o];
        o += 1;
        let log_lengthscales = v[o..o + q].to_vec();
        o += q;
        let log_noise_variance = v[o];
        o += 1;
        let inducing = rows(o, m);
        EncoderState {
            means,
            log_variances,
            log_signal_variance,
            log_lengthscales,
            log_noise_variance,
            inducing,
        }
    }

    /// `σ² = MIN_NOISE_VARIANCE + min(exp(log_noise_variance), MAX_NOISE_VARIANCE)`.
    pub fn noise_variance(&self) -> f64 {
        MIN_NOISE_VARIANCE + self.log_noise_variance.exp().min(MAX_NOISE_VARIANCE)
    }

    pub fn signal_variance(&self) -> f64 {
        let (lo, hi) = SIGNAL_VARIANCE_RANGE;
        self.log_signal_variance.exp().clamp(lo, hi)
    }

    fn signal_variance_clamped(&self) -> bool {
        let (lo, hi) = SIGNAL_VARIANCE_RANGE;
        let v = self.log_signal_variance.exp();
        !(lo..=hi).contains(&v)
    }

    pub(crate) fn lengthscales(&self) -> (Vec<f64>, bool) {
        let mut clamped = false;
        let ls = self
            .log_lengthscales
            .iter()
            .map(|l| {
                let v = l.exp();
                if !(MIN_LENGTHSCALE..=MAX_LENGTHSCALE).contains(&v) {
                    clamped = true;
                }
                v.clamp(MIN_LENGTHSCALE, MAX_LENGTHSCALE)
            })
            .collect();
        (ls, clamped)
    }
}

/// Observed data entering the bound.
#[derive(Clone, Debug)]
pub struct BoundData {
    /// `Y Yᵀ` over tasks (T × T).
    pub(crate) yyt: DMatrix<f64>,
    pub(crate) trace_yy: f64,
    /// Number of output dimensions (grid points).
    pub(crate) outputs: usize,
    pub(crate) quadrature: GaussHermite,
}

impl BoundData {
    pub fn new(targets: &[Vec<f64>], quadrature: GaussHermite) -> Self {
        let t = targets.len();
        let n = targets[0].len();
        let y = DMatrix::from_fn(t, n, |i, j| targets[i][j]);
        let yyt = &y * y.transpose();
        let trace_yy = y.iter().map(|v| v * v).sum();
        BoundData {
            yyt,
            trace_yy,
            outputs: n,
            quadrature,
        }
    }
}

/// Bound value and gradient in the packed layout.
#[derive(Clone, Debug)]
pub struct BoundEval {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub lengthscale_clamped: bool,
}

/// Evaluates the lower bound and its gradient with respect to every packed parameter.
pub fn bound_and_gradients(state: &EncoderState, data: &BoundData) -> Result<BoundEval> {
    let (nt, q, nm) = (state.num_tasks(), state.latent_dim(), state.num_inducing());
    let d = data.outputs as f64;
    let n = nt as f64;
    let quad = &data.quadrature;
    let ng = quad.len();

    let sf2 = state.signal_variance();
    let (ls, clamped) = state.lengthscales();
    let inv_l2: Vec<f64> = ls.iter().map(|l| 1.0 / (l * l)).collect();
    let sigma2 = state.noise_variance();
    let beta = 1.0 / sigma2;
    let z = &state.inducing;
    let s_std: Vec<Vec<f64>> = state
        .log_variances
        .iter()
        .map(|r| r.iter().map(|lv| (0.5 * lv).exp()).collect())
        .collect();

    // Kuu
    let mut kuu = DMatrix::zeros(nm, nm);
    for i in 0..nm {
        for j in 0..=i {
            let s2: f64 = (0..q).map(|k| (z[i][k] - z[j][k]).powi(2) * inv_l2[k]).sum();
            let v = sf2 * unit_shape(s2).0;
            kuu[(i, j)] = v;
            kuu[(j, i)] = v;
        }
        kuu[(i, i)] += KUU_JITTER;
    }
    let (kuu_chol, _) = cholesky_jittered(&kuu)?;

    // Ψ statistics; kernel values at quadrature points are kept for the backward pass.
    let mut psi1 = DMatrix::zeros(nt, nm);
    let mut psi2 = DMatrix::zeros(nm, nm);
    let mut kvals = vec![0.0; nt * ng * nm];
    let mut phis = vec![0.0; nt * ng * nm];
    let mut h = vec![0.0; q];
    for t in 0..nt {
        for g in 0..ng {
            let xi = quad.node(g);
            for k in 0..q {
                h[k] = state.means[t][k] + s_std[t][k] * xi[k];
            }
            let w = quad.weights[g];
            let base = (t * ng + g) * nm;
            for m in 0..nm {
                let s2: f64 = (0..q).map(|k| (h[k] - z[m][k]).powi(2) * inv_l2[k]).sum();
                let (ku, phi) = unit_shape(s2);
                kvals[base + m] = sf2 * ku;
                phis[base + m] = sf2 * phi;
                psi1[(t, m)] += w * sf2 * ku;
            }
            let kv = &kvals[base..base + nm];
            for a in 0..nm {
                let wa = w * kv[a];
                for b in 0..=a {
                    psi2[(a, b)] += wa * kv[b];
                }
            }
        }
    }
    for a in 0..nm {
        for b in 0..a {
            psi2[(b, a)] = psi2[(a, b)];
        }
    }
    let psi0 = n * sf2;

    let a_mat = &kuu + &psi2 * beta;
    let (a_chol, _) = cholesky_jittered(&a_mat)?;
    let a_inv = a_chol.inverse();
    let kuu_inv = kuu_chol.inverse();

    // B = Ψ1ᵀ (Y Yᵀ) Ψ1
    let yy_psi1 = &data.yyt * &psi1;
    let b_mat = psi1.transpose() * &yy_psi1;
    let tr_ainv_b = (&a_inv * &b_mat).trace();
    let kuu_inv_psi2 = &kuu_inv * &psi2;
    let tr_kinv_psi2 = kuu_inv_psi2.trace();

    let kl: f64 = state
        .means
        .iter()
        .zip(&state.log_variances)
        .flat_map(|(m, lv)| m.iter().zip(lv))
        .map(|(m, lv)| 0.5 * (lv.exp() + m * m - 1.0 - lv))
        .sum();

    let value = -0.5 * n * d * LOG_2PI + 0.5 * n * d * beta.ln() - 0.5 * d * log_det(&a_chol)
        + 0.5 * d * log_det(&kuu_chol)
        - 0.5 * beta * data.trace_yy
        + 0.5 * beta * beta * tr_ainv_b
        - 0.5 * d * beta * psi0
        + 0.5 * d * beta * tr_kinv_psi2
        - kl;

    // Matrix-level gradients.
    let p_pt = &a_inv * &b_mat * &a_inv;
    let g_a = &a_inv * (-0.5 * d) - &p_pt * (0.5 * beta * beta);
    let g_psi2 = &g_a * beta + &kuu_inv * (0.5 * d * beta);
    let g_kuu = &g_a + &kuu_inv * (0.5 * d) - &kuu_inv_psi2 * &kuu_inv * (0.5 * d * beta);
    let g_psi1 = &yy_psi1 * &a_inv * (beta * beta);
    let g_beta = 0.5 * n * d / beta - 0.5 * data.trace_yy
        + beta * tr_ainv_b
        + g_a.component_mul(&psi2).sum()
        - 0.5 * d * psi0
        + 0.5 * d * tr_kinv_psi2;
    let g_psi2_sym = &g_psi2 + g_psi2.transpose();

    let mut g_means = vec![vec![0.0; q]; nt];
    let mut g_logvar = vec![vec![0.0; q]; nt];
    let mut g_z = vec![vec![0.0; q]; nm];
    let mut g_log_sf2 = -0.5 * d * beta * psi0;
    let mut g_log_l = vec![0.0; q];

    // Kuu → Z, hypers
    let g_kuu_sym = &g_kuu + g_kuu.transpose();
    for i in 0..nm {
        for j in 0..nm {
            let s2: f64 = (0..q).map(|k| (z[i][k] - z[j][k]).powi(2) * inv_l2[k]).sum();
            let (ku, phi) = unit_shape(s2);
            g_log_sf2 += g_kuu[(i, j)] * sf2 * ku;
            for k in 0..q {
                let diff = z[i][k] - z[j][k];
                g_log_l[k] += g_kuu[(i, j)] * sf2 * phi * diff * diff * inv_l2[k];
                if i != j {
                    g_z[i][k] += g_kuu_sym[(i, j)] * (-sf2 * phi * diff * inv_l2[k]);
                }
            }
        }
    }

    // Ψ1, Ψ2 → quadrature points → means, log variances, Z, hypers
    let mut c = vec![0.0; nm];
    for t in 0..nt {
        for g in 0..ng {
            let xi = quad.node(g);
            for k in 0..q {
                h[k] = state.means[t][k] + s_std[t][k] * xi[k];
            }
            let w = quad.weights[g];
            let base = (t * ng + g) * nm;
            let kv = &kvals[base..base + nm];
            let ph = &phis[base..base + nm];
            for a in 0..nm {
                let mut acc = g_psi1[(t, a)];
                for b in 0..nm {
                    acc += g_psi2_sym[(a, b)] * kv[b];
                }
                c[a] = w * acc;
            }
            for m in 0..nm {
                let cm = c[m];
                if cm == 0.0 {
                    continue;
                }
                g_log_sf2 += cm * kv[m];
                for k in 0..q {
                    let diff = h[k] - z[m][k];
                    let dk_dh = -ph[m] * diff * inv_l2[k];
                    g_means[t][k] += cm * dk_dh;
                    g_logvar[t][k] += cm * dk_dh * 0.5 * s_std[t][k] * xi[k];
                    g_z[m][k] -= cm * dk_dh;
                    g_log_l[k] += cm * ph[m] * diff * diff * inv_l2[k];
                }
            }
        }
    }

    // KL
    for t in 0..nt {
        for k in 0..q {
            g_means[t][k] -= state.means[t][k];
            g_logvar[t][k] -= 0.5 * (state.log_variances[t][k].exp() - 1.0);
        }
    }
    if clamped {
        for (k, l) in state.log_lengthscales.iter().enumerate() {
            if !(MIN_LENGTHSCALE..=MAX_LENGTHSCALE).contains(&l.exp()) {
                g_log_l[k] = 0.0;
            }
        }
    }
    if state.signal_variance_clamped() {
        g_log_sf2 = 0.0;
    }
    let g_log_noise = if state.log_noise_variance.exp() > MAX_NOISE_VARIANCE {
        0.0
    } else {
        -beta * beta * state.log_noise_variance.exp() * g_beta
    };

    let grad_state = EncoderState {
        means: g_means,
        log_variances: g_logvar,
        log_signal_variance: g_log_sf2,
        log_lengthscales: g_log_l,
        log_noise_variance: g_log_noise,
        inducing: g_z,
    };
    Ok(BoundEval {
        value,
        gradient: grad_state.pack(),
        lengthscale_clamped: clamped,
    })
}
