//! Scale-adapted stochastic-gradient Hamiltonian Monte Carlo.
//!
//! Per-parameter preconditioning `1/√v̂` is estimated during burn-in from
//! running gradient moments and frozen afterwards, as in the adaptive sampler
//! used by BOHAMIANN.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parameters larger than this in magnitude count as divergence.
pub const DIVERGENCE_LIMIT: f64 = 1e6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SghmcConfig {
    pub step_size: f64,
    pub burn_in: usize,
    /// Momentum decay α.
    pub friction: f64,
    pub batch_size: usize,
    pub num_samples: usize,
    pub keep_every: usize,
    /// Latent draws per datapoint (meta-model training only).
    pub latent_draws: usize,
    /// Disable for deterministic tests of the update arithmetic.
    pub inject_noise: bool,
}

impl Default for SghmcConfig {
    fn default() -> Self {
        SghmcConfig {
            step_size: 1e-2,
            burn_in: 50_000,
            friction: 0.01,
            batch_size: 32,
            num_samples: 100,
            keep_every: 100,
            latent_draws: 10,
            inject_noise: true,
        }
    }
}

impl SghmcConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_size >= 0.0) || !self.step_size.is_finite() {
            return Err(Error::invalid("step size must be finite and non-negative"));
        }
        if self.num_samples == 0 || self.keep_every == 0 {
            return Err(Error::invalid("num_samples and keep_every must be >= 1"));
        }
        if self.latent_draws == 0 || self.batch_size == 0 {
            return Err(Error::invalid("latent_draws and batch_size must be >= 1"));
        }
        Ok(())
    }

    pub fn total_steps(&self) -> usize {
        self.burn_in + self.num_samples * self.keep_every
    }
}

/// Sampler state: position, momentum and the adaptation statistics.
#[derive(Clone, Debug)]
pub struct SghmcState {
    pub theta: Vec<f64>,
    pub momentum: Vec<f64>,
    tau: Vec<f64>,
    g: Vec<f64>,
    v_hat: Vec<f64>,
    /// `1/√v̂`, refreshed while adapting.
    minv: Vec<f64>,
    noise: Vec<f64>,
}

impl SghmcState {
    pub fn new(theta: Vec<f64>) -> Self {
        let n = theta.len();
        SghmcState {
            theta,
            momentum: vec![0.0; n],
            tau: vec![1.0; n],
            g: vec![1.0; n],
            v_hat: vec![1.0; n],
            minv: vec![1.0; n],
            noise: vec![0.0; n],
        }
    }
}

/// One update with gradient `grad` of the (per-datapoint) potential.
#[derive(Clone, Copy, Debug)]
pub struct Sghmc {
    pub step_size: f64,
    pub friction: f64,
    /// Gradients are multiplied by this (dataset size for minibatch averages).
    pub scale_grad: f64,
    pub inject_noise: bool,
}

impl Sghmc {
    pub fn step<R: Rng + ?Sized>(&self, s: &mut SghmcState, grad: &[f64], adapt: bool, rng: &mut R) {
        if self.inject_noise {
            for z in s.noise.iter_mut() {
                *z = rng.sample(StandardNormal);
            }
        }
        #[cfg(target_arch = "x86_64")]
        {
            if std::is_x86_feature_detected!("avx2") {
                // SAFETY: the CPU supports AVX2.
                unsafe { self.update_avx2(s, grad, adapt) };
                return;
            }
        }
        self.update(s, grad, adapt)
    }

    #[cfg(target_arch = "x86_64")]
    #[target_feature(enable = "avx2")]
    unsafe fn update_avx2(&self, s: &mut SghmcState, grad: &[f64], adapt: bool) {
        self.update(s, grad, adapt)
    }

    #[inline(always)]
    fn update(&self, s: &mut SghmcState, grad: &[f64], adapt: bool) {
        let lr = self.step_size;
        let lr2 = lr * lr;
        let noise_on = if self.inject_noise { 1.0 } else { 0.0 };
        let n = s.theta.len();
        let (theta, momentum) = (&mut s.theta[..n], &mut s.momentum[..n]);
        let (tau, g, v_hat, minv) = (&mut s.tau[..n], &mut s.g[..n], &mut s.v_hat[..n], &mut s.minv[..n]);
        let (noise, grad) = (&s.noise[..n], &grad[..n]);
        if adapt {
            for i in 0..n {
                let gr = grad[i] * self.scale_grad;
                let r = 1.0 / (tau[i] + 1.0);
                tau[i] += 1.0 - tau[i] * g[i] * g[i] / v_hat[i];
                g[i] += r * (gr - g[i]);
                v_hat[i] = (v_hat[i] + r * (gr * gr - v_hat[i])).max(1e-16);
                minv[i] = 1.0 / v_hat[i].sqrt();
            }
        }
        for i in 0..n {
            let gr = grad[i] * self.scale_grad;
            let var = (2.0 * lr2 * self.friction * minv[i] - lr2 * lr2).max(0.0);
            let v = momentum[i] - lr2 * minv[i] * gr - self.friction * momentum[i]
                + noise_on * var.sqrt() * noise[i];
            momentum[i] = v;
            theta[i] += v;
        }
    }
}

/// Runs burn-in then keeps `num_samples` states, one every `keep_every` steps.
///
/// `grad_fn` returns the gradient of the potential `U(θ)` (a minibatch
/// estimate is fine); it receives the sampler's rng for minibatch selection.
pub fn sghmc_sample<F>(
    theta0: Vec<f64>,
    mut grad_fn: F,
    config: &SghmcConfig,
    scale_grad: f64,
    seed: u64,
) -> Result<Vec<Vec<f64>>>
where
    F: FnMut(&[f64], &mut ChaCha8Rng) -> Result<Vec<f64>>,
{
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Injected noise comes from a separate, cheaper stream.
    let mut noise_rng = Xoshiro256PlusPlus::seed_from_u64(rng.random());
    let sampler = Sghmc {
        step_size: config.step_size,
        friction: config.friction,
        scale_grad,
        inject_noise: config.inject_noise,
    };
    let mut state = SghmcState::new(theta0);
    let mut samples = Vec::with_capacity(config.num_samples);
    for step in 0..config.total_steps() {
        let grad = grad_fn(&state.theta, &mut rng).map_err(|e| match e {
            Error::NonFinite { index } => Error::Divergence {
                iteration: step,
                message: format!("non-finite likelihood at datapoint {index}"),
            },
            other => other,
        })?;
        sampler.step(&mut state, &grad, step < config.burn_in, &mut noise_rng);
        if state
            .theta
            .iter()
            .any(|t| !t.is_finite() || t.abs() > DIVERGENCE_LIMIT)
        {
            return Err(Error::Divergence {
                iteration: step,
                message: format!("parameter magnitude exceeded {DIVERGENCE_LIMIT:e}"),
            });
        }
        if step >= config.burn_in && (step - config.burn_in + 1) % config.keep_every == 0 {
            samples.push(state.theta.clone());
        }
    }
    Ok(samples)
}
