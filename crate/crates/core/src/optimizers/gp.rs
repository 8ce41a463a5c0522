use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{expected_improvement, local_and_uniform_candidates, uniform_point, Evaluator, MODEL_STARTUP};
use crate::error::Result;
use crate::kernel::Matern52;
use crate::linalg::{cholesky_jittered, log_det};

/// Noise variance used when the objective is treated as noiseless.
pub const GP_NOISE_FLOOR: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GpBoOptions {
    pub burn_in: usize,
    pub samples: usize,
    /// Metropolis steps between kept hyperparameter samples.
    pub thin: usize,
    pub candidates: usize,
    pub local_std: f64,
    /// Learn the noise variance instead of fixing it at the floor.
    pub noisy: bool,
}

impl Default for GpBoOptions {
    fn default() -> Self {
        GpBoOptions {
            burn_in: 200,
            samples: 20,
            thin: 5,
            candidates: 500,
            local_std: 0.1,
            noisy: false,
        }
    }
}

/// Zero-mean GP regression with a Matérn-5/2 kernel and Gaussian noise.
#[derive(Clone, Debug)]
pub struct GaussianProcess {
    pub kernel: Matern52,
    pub noise: f64,
    xs: Vec<Vec<f64>>,
    chol: Cholesky<f64, Dyn>,
    alpha: DVector<f64>,
    ys: DVector<f64>,
}

impl GaussianProcess {
    pub fn fit(xs: &[Vec<f64>], ys: &[f64], kernel: Matern52, noise: f64) -> Result<Self> {
        let mut k = kernel.gram(xs, xs);
        for i in 0..xs.len() {
            k[(i, i)] += noise;
        }
        let (chol, _) = cholesky_jittered(&k)?;
        let y = DVector::from_column_slice(ys);
        let alpha = chol.solve(&y);
        Ok(GaussianProcess {
            kernel,
            noise,
            xs: xs.to_vec(),
            chol,
            alpha,
            ys: y,
        })
    }

    pub fn log_marginal_likelihood(&self) -> f64 {
        let n = self.ys.len() as f64;
        -0.5 * self.ys.dot(&self.alpha) - 0.5 * log_det(&self.chol) - 0.5 * n * (2.0 * std::f64::consts::PI).ln()
    }

    /// Posterior mean and variance of the latent function at `x`.
    pub fn predict(&self, x: &[f64]) -> (f64, f64) {
        let ks = DVector::from_iterator(self.xs.len(), self.xs.iter().map(|xi| self.kernel.eval(x, xi)));
        let mean = ks.dot(&self.alpha);
        let v = self.chol.l().solve_lower_triangular(&ks).expect("triangular factor");
        let var = (self.kernel.variance - v.dot(&v)).max(0.0);
        (mean, var)
    }

    /// Batched [`GaussianProcess::predict`].
    pub fn predict_many(&self, xs: &[Vec<f64>]) -> Vec<(f64, f64)> {
        let ks: DMatrix<f64> = self.kernel.gram(&self.xs, xs);
        let means = ks.tr_mul(&self.alpha);
        let v = self.chol.l().solve_lower_triangular(&ks).expect("triangular factor");
        (0..xs.len())
            .map(|j| {
                let c = v.column(j);
                (means[j], (self.kernel.variance - c.dot(&c)).max(0.0))
            })
            .collect()
    }
}

/// Log-hyperparameters `[ln σ_f², ln ℓ_1..ℓ_D, (ln σ_n²)]`.
#[derive(Clone, Debug)]
struct Hypers {
    theta: Vec<f64>,
    dims: usize,
    noisy: bool,
}

const NOISE_PRIOR_MEAN: f64 = -4.0;

impl Hypers {
    fn initial(dims: usize, noisy: bool) -> Self {
        let mut theta = vec![0.0; dims + 1];
        if noisy {
            theta.push(NOISE_PRIOR_MEAN);
        }
        Hypers { theta, dims, noisy }
    }

    fn kernel(&self, theta: &[f64]) -> (Matern52, f64) {
        let kernel = Matern52::new(theta[0].exp(), theta[1..=self.dims].iter().map(|v| v.exp()).collect());
        let noise = if self.noisy {
            GP_NOISE_FLOOR + theta[self.dims + 1].exp()
        } else {
            GP_NOISE_FLOOR
        };
        (kernel, noise)
    }

    fn log_posterior(&self, theta: &[f64], xs: &[Vec<f64>], ys: &[f64]) -> f64 {
        if theta.iter().any(|t| !t.is_finite() || t.abs() > 20.0) {
            return f64::NEG_INFINITY;
        }
        let mut prior = -0.5 * theta[..=self.dims].iter().map(|t| t * t).sum::<f64>();
        if self.noisy {
            prior -= 0.5 * (theta[self.dims + 1] - NOISE_PRIOR_MEAN).powi(2);
        }
        let (kernel, noise) = self.kernel(theta);
        match GaussianProcess::fit(xs, ys, kernel, noise) {
            Ok(gp) => prior + gp.log_marginal_likelihood(),
            Err(_) => f64::NEG_INFINITY,
        }
    }
}

/// Adaptive random-walk Metropolis over the log-hyperparameters.
struct Chain {
    hypers: Hypers,
    step: f64,
}

impl Chain {
    fn sample<R: Rng>(&mut self, xs: &[Vec<f64>], ys: &[f64], opts: &GpBoOptions, rng: &mut R) -> Vec<Vec<f64>> {
        let mut current = self.hypers.theta.clone();
        let mut lp = self.hypers.log_posterior(&current, xs, ys);
        let mut accepted = 0usize;
        let mut out = Vec::with_capacity(opts.samples);
        let total = opts.burn_in + opts.samples * opts.thin.max(1);
        for it in 0..total {
            let prop: Vec<f64> = current
                .iter()
                .map(|t| t + self.step * rng.sample::<f64, _>(StandardNormal))
                .collect();
            let lp_prop = self.hypers.log_posterior(&prop, xs, ys);
            if lp_prop - lp >= rng.random::<f64>().ln() {
                current = prop;
                lp = lp_prop;
                accepted += 1;
            }
            if it < opts.burn_in {
                if (it + 1) % 20 == 0 {
                    let rate = accepted as f64 / 20.0;
                    if rate > 0.35 {
                        self.step *= 1.3;
                    } else if rate < 0.2 {
                        self.step /= 1.3;
                    }
                    self.step = self.step.clamp(1e-3, 2.0);
                    accepted = 0;
                }
            } else if (it - opts.burn_in + 1) % opts.thin.max(1) == 0 {
                out.push(current.clone());
            }
        }
        self.hypers.theta = current;
        out
    }
}

/// GP-based BO with EI averaged over MCMC samples of the hyperparameters.
pub fn run_gp_bo(ev: &mut Evaluator, rng: &mut ChaCha8Rng, opts: &GpBoOptions) -> Result<()> {
    let d = ev.dims();
    let mut chain = Chain {
        hypers: Hypers::initial(d, opts.noisy),
        step: 0.3,
    };
    while !ev.done() {
        if ev.ys.len() < MODEL_STARTUP {
            let u = uniform_point(d, rng);
            ev.eval(&u)?;
            continue;
        }
        let n = ev.ys.len() as f64;
        let mean = ev.ys.iter().sum::<f64>() / n;
        let sd = (ev.ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / n).sqrt();
        let sd = if sd > 0.0 { sd } else { 1.0 };
        let ys: Vec<f64> = ev.ys.iter().map(|y| (y - mean) / sd).collect();
        let y_best = ys.iter().copied().fold(f64::INFINITY, f64::min);

        let samples = chain.sample(&ev.us, &ys, opts, rng);
        let mut gps = Vec::with_capacity(samples.len());
        for theta in &samples {
            let (kernel, noise) = chain.hypers.kernel(theta);
            gps.push(GaussianProcess::fit(&ev.us, &ys, kernel, noise)?);
        }
        let incumbent = ev.best_index().expect("startup evaluated");
        let cands = local_and_uniform_candidates(&ev.us[incumbent], opts.candidates, opts.local_std, rng);
        let mut ei = vec![0.0; cands.len()];
        for gp in &gps {
            for (e, (m, v)) in ei.iter_mut().zip(gp.predict_many(&cands)) {
                *e += expected_improvement(m, v.sqrt(), y_best) / gps.len() as f64;
            }
        }
        let best = (0..cands.len())
            .max_by(|&a, &b| ei[a].total_cmp(&ei[b]))
            .expect("candidates nonempty");
        ev.eval(&cands[best])?;
    }
    Ok(())
}
