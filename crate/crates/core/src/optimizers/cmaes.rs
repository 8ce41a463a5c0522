use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{uniform_point, Evaluator};
use crate::error::{Error, Result};

const SIGMA0: f64 = 0.6;
const MAX_RESAMPLES: usize = 100;

/// `λ = 4 + ⌊3 ln D⌋`.
pub fn cmaes_population_size(dims: usize) -> usize {
    4 + (3.0 * (dims as f64).ln()).floor() as usize
}

struct Params {
    lambda: usize,
    mu: usize,
    weights: Vec<f64>,
    mu_eff: f64,
    c_sigma: f64,
    d_sigma: f64,
    c_c: f64,
    c_1: f64,
    c_mu: f64,
    chi_n: f64,
}

impl Params {
    fn new(n: usize) -> Self {
        let nf = n as f64;
        let lambda = cmaes_population_size(n);
        let mu = lambda / 2;
        let raw: Vec<f64> = (1..=mu)
            .map(|i| ((lambda as f64 + 1.0) / 2.0).ln() - (i as f64).ln())
            .collect();
        let sum: f64 = raw.iter().sum();
        let weights: Vec<f64> = raw.iter().map(|w| w / sum).collect();
        let mu_eff = 1.0 / weights.iter().map(|w| w * w).sum::<f64>();
        let c_sigma = (mu_eff + 2.0) / (nf + mu_eff + 5.0);
        let d_sigma = 1.0 + 2.0 * (((mu_eff - 1.0) / (nf + 1.0)).sqrt() - 1.0).max(0.0) + c_sigma;
        let c_c = (4.0 + mu_eff / nf) / (nf + 4.0 + 2.0 * mu_eff / nf);
        let c_1 = 2.0 / ((nf + 1.3).powi(2) + mu_eff);
        let c_mu = (1.0 - c_1).min(2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) / ((nf + 2.0).powi(2) + mu_eff));
        let chi_n = nf.sqrt() * (1.0 - 1.0 / (4.0 * nf) + 1.0 / (21.0 * nf * nf));
        Params {
            lambda,
            mu,
            weights,
            mu_eff,
            c_sigma,
            d_sigma,
            c_c,
            c_1,
            c_mu,
            chi_n,
        }
    }
}

/// (μ/μ_w, λ)-CMA-ES started at the centre of the cube with `σ₀ = 0.6`.
pub fn run_cmaes(ev: &mut Evaluator, rng: &mut ChaCha8Rng) -> Result<()> {
    let n = ev.dims();
    if n < 2 {
        return Err(Error::UnsupportedDimension {
            dim: n,
            reason: "CMA-ES needs at least two dimensions".into(),
        });
    }
    let p = Params::new(n);
    let first = uniform_point(n, rng);
    ev.eval(&first)?;

    let mut mean = DVector::from_element(n, 0.5);
    let mut sigma = SIGMA0;
    let mut cov = DMatrix::<f64>::identity(n, n);
    let mut p_sigma = DVector::<f64>::zeros(n);
    let mut p_c = DVector::<f64>::zeros(n);
    let mut generation = 0usize;

    while !ev.done() {
        let eig = SymmetricEigen::new(cov.clone());
        let d: DVector<f64> = eig.eigenvalues.map(|v| v.max(1e-20).sqrt());
        let b = eig.eigenvectors;
        let bd = &b * DMatrix::from_diagonal(&d);
        let inv_sqrt = &b * DMatrix::from_diagonal(&d.map(|v| 1.0 / v)) * b.transpose();

        let mut offspring: Vec<(f64, DVector<f64>)> = Vec::with_capacity(p.lambda);
        for _ in 0..p.lambda {
            if ev.done() {
                break;
            }
            let mut x = None;
            for _ in 0..MAX_RESAMPLES {
                let z = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
                let cand = &mean + sigma * (&bd * z);
                if cand.iter().all(|v| (0.0..=1.0).contains(v)) {
                    x = Some(cand);
                    break;
                }
                x = Some(cand);
            }
            let x = x.expect("at least one sample").map(|v| v.clamp(0.0, 1.0));
            let y = ev.eval(x.as_slice())?;
            offspring.push((y, x));
        }
        if offspring.len() < p.lambda {
            break;
        }
        offspring.sort_by(|a, b| a.0.total_cmp(&b.0));
        generation += 1;

        let old = mean.clone();
        let steps: Vec<DVector<f64>> = offspring[..p.mu].iter().map(|(_, x)| (x - &old) / sigma).collect();
        let y_w = steps
            .iter()
            .zip(&p.weights)
            .fold(DVector::zeros(n), |acc, (y, w)| acc + y * *w);
        mean = &old + sigma * &y_w;

        p_sigma = (1.0 - p.c_sigma) * &p_sigma
            + (p.c_sigma * (2.0 - p.c_sigma) * p.mu_eff).sqrt() * (&inv_sqrt * &y_w);
        let ps_norm = p_sigma.norm();
        let h_sigma = ps_norm / (1.0 - (1.0 - p.c_sigma).powi(2 * generation as i32)).sqrt()
            < (1.4 + 2.0 / (n as f64 + 1.0)) * p.chi_n;
        let h = if h_sigma { 1.0 } else { 0.0 };
        p_c = (1.0 - p.c_c) * &p_c + h * (p.c_c * (2.0 - p.c_c) * p.mu_eff).sqrt() * &y_w;

        let rank_mu = steps
            .iter()
            .zip(&p.weights)
            .fold(DMatrix::zeros(n, n), |acc, (y, w)| acc + *w * (y * y.transpose()));
        let decay = 1.0 - p.c_1 - p.c_mu + (1.0 - h) * p.c_1 * p.c_c * (2.0 - p.c_c);
        cov = decay * &cov + p.c_1 * (&p_c * p_c.transpose()) + p.c_mu * rank_mu;
        cov = (&cov + cov.transpose()) * 0.5;

        sigma *= ((p.c_sigma / p.d_sigma) * (ps_norm / p.chi_n - 1.0)).exp();
        if !sigma.is_finite() || cov.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence {
                iteration: generation,
                message: "CMA-ES state became non-finite".into(),
            });
        }
        // Restart the distribution once it has shrunk below float resolution.
        if sigma * d.max() < 1e-13 {
            sigma = SIGMA0;
            cov = DMatrix::identity(n, n);
            p_sigma.fill(0.0);
            p_c.fill(0.0);
        }
    }
    Ok(())
}
