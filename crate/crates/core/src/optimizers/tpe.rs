use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::{uniform_point, Evaluator};
use crate::error::Result;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TpeOptions {
    pub gamma: f64,
    pub candidates: usize,
    pub startup: usize,
}

impl Default for TpeOptions {
    fn default() -> Self {
        TpeOptions {
            gamma: 0.25,
            candidates: 24,
            startup: 20,
        }
    }
}

/// `⌈γ n⌉`, at least one.
pub fn good_set_size(gamma: f64, n: usize) -> usize {
    ((gamma * n as f64).ceil() as usize).clamp(1, n.max(1))
}

/// One-dimensional mixture of normals truncated to `[0, 1]`, with a broad prior
/// component at the centre.
struct Parzen {
    mus: Vec<f64>,
    sigmas: Vec<f64>,
    log_norm: Vec<f64>,
    log_weight: f64,
}

const PRIOR_MU: f64 = 0.5;
const PRIOR_SIGMA: f64 = 1.0;

impl Parzen {
    fn new(obs: &[f64]) -> Self {
        let mut comps: Vec<(f64, bool)> = obs.iter().map(|&m| (m, false)).collect();
        comps.push((PRIOR_MU, true));
        comps.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mus: Vec<f64> = comps.iter().map(|c| c.0).collect();
        let n = mus.len();
        let min_sigma = PRIOR_SIGMA / (n as f64).min(100.0);
        let sigmas: Vec<f64> = (0..n)
            .map(|i| {
                if comps[i].1 {
                    return PRIOR_SIGMA;
                }
                let left = if i > 0 { mus[i] - mus[i - 1] } else { mus[i] };
                let right = if i + 1 < n { mus[i + 1] - mus[i] } else { 1.0 - mus[i] };
                left.max(right).clamp(min_sigma, PRIOR_SIGMA)
            })
            .collect();
        let std = Normal::standard();
        let log_norm = mus
            .iter()
            .zip(&sigmas)
            .map(|(m, s)| (std.cdf((1.0 - m) / s) - std.cdf(-m / s)).max(1e-300).ln())
            .collect();
        Parzen {
            log_weight: -(n as f64).ln(),
            mus,
            sigmas,
            log_norm,
        }
    }

    fn log_pdf(&self, x: f64) -> f64 {
        let terms: Vec<f64> = self
            .mus
            .iter()
            .zip(&self.sigmas)
            .zip(&self.log_norm)
            .map(|((m, s), z)| {
                let t = (x - m) / s;
                self.log_weight - 0.5 * t * t - s.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln() - z
            })
            .collect();
        let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let k = rng.random_range(0..self.mus.len());
        loop {
            let x = self.mus[k] + self.sigmas[k] * rng.sample::<f64, _>(StandardNormal);
            if (0.0..=1.0).contains(&x) {
                return x;
            }
        }
    }
}

/// Next point from observations `(us, ys)`: the best of `opts.candidates` draws
/// from the good-set density by `l(x)/g(x)`.
pub fn tpe_propose<R: Rng + ?Sized>(us: &[Vec<f64>], ys: &[f64], opts: &TpeOptions, rng: &mut R) -> Vec<f64> {
    let d = us[0].len();
    let mut order: Vec<usize> = (0..ys.len()).collect();
    order.sort_by(|&a, &b| ys[a].total_cmp(&ys[b]));
    let n_good = good_set_size(opts.gamma, ys.len());
    let (good, bad) = order.split_at(n_good);
    let models: Vec<(Parzen, Parzen)> = (0..d)
        .map(|j| {
            let g: Vec<f64> = good.iter().map(|&i| us[i][j]).collect();
            let b: Vec<f64> = bad.iter().map(|&i| us[i][j]).collect();
            (Parzen::new(&g), Parzen::new(&b))
        })
        .collect();
    let mut best = (f64::NEG_INFINITY, vec![0.5; d]);
    for _ in 0..opts.candidates.max(1) {
        let x: Vec<f64> = models.iter().map(|(l, _)| l.sample(rng)).collect();
        let score: f64 = models
            .iter()
            .zip(&x)
            .map(|((l, g), &v)| l.log_pdf(v) - g.log_pdf(v))
            .sum();
        if score > best.0 {
            best = (score, x);
        }
    }
    best.1
}

pub fn run_tpe(ev: &mut Evaluator, rng: &mut ChaCha8Rng, opts: &TpeOptions) -> Result<()> {
    let d = ev.dims();
    while !ev.done() {
        let u = if ev.ys.len() < opts.startup.max(1) {
            uniform_point(d, rng)
        } else {
            tpe_propose(&ev.us, &ev.ys, opts, rng)
        };
        ev.eval(&u)?;
    }
    Ok(())
}
