use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{expected_improvement, local_and_uniform_candidates, uniform_point, Evaluator, MODEL_STARTUP};
use crate::bnn::network::{log_posterior_and_grad, NetArchitecture, Network, Prior, Rows};
use crate::bnn::sghmc::{sghmc_sample, SghmcConfig};
use crate::bnn::ensemble_moments;
use crate::error::Result;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BnnBoOptions {
    pub step_size: f64,
    /// Burn-in steps per observed point.
    pub burn_in_per_point: usize,
    /// Sampling steps after burn-in.
    pub sample_steps: usize,
    pub samples: usize,
    pub batch_size: usize,
    pub candidates: usize,
    pub local_std: f64,
    /// Divide burn-in and sampling steps by ten.
    pub fast: bool,
}

impl Default for BnnBoOptions {
    fn default() -> Self {
        BnnBoOptions {
            step_size: 1e-2,
            burn_in_per_point: 100,
            sample_steps: 10_000,
            samples: 100,
            batch_size: 20,
            candidates: 500,
            local_std: 0.1,
            fast: false,
        }
    }
}

impl BnnBoOptions {
    /// Sampler settings after `observations` evaluations.
    pub fn schedule(&self, observations: usize) -> SghmcConfig {
        let div = if self.fast { 10 } else { 1 };
        let samples = self.samples.max(1);
        SghmcConfig {
            step_size: self.step_size,
            burn_in: self.burn_in_per_point * observations / div,
            batch_size: self.batch_size.max(1),
            num_samples: samples,
            keep_every: (self.sample_steps / div / samples).max(1),
            latent_draws: 1,
            ..SghmcConfig::default()
        }
    }
}

fn train(
    arch: &NetArchitecture,
    us: &[Vec<f64>],
    ys: &[f64],
    config: &SghmcConfig,
    seed: u64,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Vec<f64>>> {
    let n = ys.len();
    let d = us[0].len();
    let batch = config.batch_size.min(n);
    let mut order: Vec<usize> = (0..n).collect();
    let mut cursor = n;
    let theta0 = arch.init(rng);
    let grad_fn = |theta: &[f64], rng: &mut ChaCha8Rng| -> Result<Vec<f64>> {
        if cursor + batch > n {
            order.shuffle(rng);
            cursor = 0;
        }
        let idx = &order[cursor..cursor + batch];
        cursor += batch;
        let inputs = DMatrix::from_fn(d, batch, |r, c| us[idx[c]][r]);
        let rows = Rows {
            inputs,
            targets: idx.iter().map(|&i| ys[i]).collect(),
            draws_per_point: 1,
        };
        let net = Network::new(arch, theta)?;
        let (_, g) = log_posterior_and_grad(&net, &rows, Prior::default(), n)?;
        Ok(g.into_iter().map(|v| -v).collect())
    };
    sghmc_sample(theta0, grad_fn, config, n as f64, seed)
}

/// BO with a 3×50 Bayesian neural network sampled by SGHMC, retrained from
/// scratch after every evaluation.
pub fn run_bnn_bo(ev: &mut Evaluator, rng: &mut ChaCha8Rng, opts: &BnnBoOptions) -> Result<()> {
    let d = ev.dims();
    let arch = NetArchitecture::small(d);
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

        let config = opts.schedule(ys.len());
        let seed = rng.random::<u64>();
        let samples = train(&arch, &ev.us, &ys, &config, seed, rng)?;

        let incumbent = ev.best_index().expect("startup evaluated");
        let cands = local_and_uniform_candidates(&ev.us[incumbent], opts.candidates, opts.local_std, rng);
        let inputs = DMatrix::from_fn(d, cands.len(), |r, c| cands[c][r]);
        let mut outputs = vec![Vec::with_capacity(samples.len()); cands.len()];
        for theta in &samples {
            let net = Network::new(&arch, theta)?;
            let s2 = net.noise_variance();
            for (o, m) in outputs.iter_mut().zip(net.mean_batch(&inputs)) {
                o.push((m, s2));
            }
        }
        let best = outputs
            .iter()
            .map(|o| {
                let (m, v) = ensemble_moments(o);
                expected_improvement(m, v.max(0.0).sqrt(), y_best)
            })
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(i, _)| i)
            .expect("candidates nonempty");
        ev.eval(&cands[best])?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimizers::{run_method, Method, OptimizerOptions};
    use crate::tasks::FnObjective;

    #[test]
    fn surrogate_is_three_by_fifty() {
        assert_eq!(NetArchitecture::small(4).hidden, vec![50, 50, 50]);
    }

    #[test]
    fn burn_in_scales_with_observations() {
        let o = BnnBoOptions::default();
        let c = o.schedule(20);
        assert_eq!(c.burn_in, 2000);
        assert_eq!(c.num_samples, 100);
        assert_eq!(c.num_samples * c.keep_every, 10_000);
        let fast = BnnBoOptions { fast: true, ..o };
        assert_eq!(fast.schedule(20).burn_in, 200);
        assert_eq!(fast.schedule(20).num_samples * fast.schedule(20).keep_every, 1000);
    }

    #[test]
    fn fast_profile_runs_and_is_deterministic() {
        let f = FnObjective::new(1, |x| (x[0] - 0.7).powi(2));
        let mut opts = OptimizerOptions::default();
        opts.bnn.fast = true;
        let a = run_method(Method::BnnBo, &f, 8, 3, &opts).unwrap();
        let b = run_method(Method::BnnBo, &f, 8, 3, &opts).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 8);
    }
}
