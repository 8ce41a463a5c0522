//! Multi-task Bayesian neural network over `(x, h)` and its ensemble predictive.

pub mod activation;
pub mod compact;
pub mod network;
pub mod sghmc;

use std::sync::Arc;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use crate::dataset::{normalize_targets, EvaluationDataset, NormalizationSpec};
use crate::encoder::{sample_latent, EncoderModel};
use crate::error::{Error, Result};

pub use compact::CompactNet;
pub use network::{log_posterior_and_grad, softplus, NetArchitecture, Network, Prior, Rows};
pub use sghmc::{sghmc_sample, Sghmc, SghmcConfig, SghmcState};

/// Ensemble of `(μ̂_i, σ̂²_i)` pairs reduced to a predictive mean and variance.
///
/// `μ = (1/M) Σ μ̂_i`, `σ² = (1/M) Σ [(μ̂_i − μ)² + σ̂²_i]`.
pub fn ensemble_moments(outputs: &[(f64, f64)]) -> (f64, f64) {
    let m = outputs.len() as f64;
    let mean = outputs.iter().map(|o| o.0).sum::<f64>() / m;
    let var = outputs
        .iter()
        .map(|(mu, s2)| (mu - mean).powi(2) + s2)
        .sum::<f64>()
        / m;
    (mean, var)
}

/// Trained generative meta-model.
#[derive(Clone, Debug, PartialEq)]
pub struct MetaModel {
    pub architecture: NetArchitecture,
    /// Kept SGHMC weight samples, shared with tasks sampled from the model.
    pub samples: Vec<Arc<Vec<f64>>>,
    pub encoder: EncoderModel,
    pub normalization: NormalizationSpec,
    pub seed: u64,
}

impl MetaModel {
    pub fn num_samples(&self) -> usize {
        self.samples.len()
    }

    pub fn latent_dim(&self) -> usize {
        self.encoder.latent_dim()
    }

    pub fn network(&self, i: usize) -> Network<'_> {
        Network {
            arch: &self.architecture,
            theta: &self.samples[i],
        }
    }

    /// Predictive mean and variance in standardized units at a unit-cube input.
    pub fn predict_unit(&self, x_unit: &[f64], h: &[f64]) -> (f64, f64) {
        let input: Vec<f64> = x_unit.iter().chain(h).copied().collect();
        let outputs: Vec<(f64, f64)> = (0..self.num_samples())
            .map(|i| self.network(i).forward(&input))
            .collect();
        ensemble_moments(&outputs)
    }

    /// Predictive mean and variance in raw target units.
    pub fn predict(&self, x: &[f64], h: &[f64]) -> Result<(f64, f64)> {
        if h.len() != self.latent_dim() {
            return Err(Error::DimensionMismatch(format!(
                "latent vector has {} entries, expected {}",
                h.len(),
                self.latent_dim()
            )));
        }
        let u = self.normalization.normalize_input(x)?;
        let (m, v) = self.predict_unit(&u, h);
        let s = self.normalization.targets.std;
        Ok((self.normalization.targets.denormalize(m), v * s * s))
    }
}

/// Trains the BNN on the dataset with SGHMC, drawing fresh latents from the
/// encoder posteriors every epoch.
pub fn train_meta_model(
    dataset: &EvaluationDataset,
    encoder: &EncoderModel,
    arch: &NetArchitecture,
    config: &SghmcConfig,
    seed: u64,
) -> Result<MetaModel> {
    config.validate()?;
    let t = dataset.num_tasks();
    if encoder.posteriors.len() != t {
        return Err(Error::DimensionMismatch(format!(
            "encoder has {} task posteriors, dataset has {t} tasks",
            encoder.posteriors.len()
        )));
    }
    let q = encoder.latent_dim();
    let d = dataset.space.len();
    if arch.input_dim != d + q {
        return Err(Error::DimensionMismatch(format!(
            "network input is {}, expected D + Q = {}",
            arch.input_dim,
            d + q
        )));
    }
    let (z, scaling) = normalize_targets(dataset)?;
    let unit = dataset.unit_grid();
    let n = dataset.num_points();
    let n_data = t * n;
    let h_draws = config.latent_draws;

    let mut init_rng = ChaCha8Rng::seed_from_u64(seed);
    let theta0 = arch.init(&mut init_rng);

    // Minibatch state: latents for the current epoch, a permutation and a cursor.
    let mut latents: Vec<Vec<Vec<f64>>> = Vec::new();
    let mut order: Vec<usize> = (0..n_data).collect();
    let mut cursor = n_data;
    let batch = config.batch_size.min(n_data);

    let grad_fn = |theta: &[f64], rng: &mut ChaCha8Rng| -> Result<Vec<f64>> {
        if cursor + batch > n_data {
            latents = encoder
                .posteriors
                .iter()
                .map(|p| (0..h_draws).map(|_| sample_latent(p, rng)).collect())
                .collect();
            order.shuffle(rng);
            cursor = 0;
        }
        let idx = &order[cursor..cursor + batch];
        cursor += batch;
        let rows = batch * h_draws;
        let mut inputs = DMatrix::zeros(d + q, rows);
        let mut targets = Vec::with_capacity(rows);
        let mut col = 0;
        for &k in idx {
            let (ti, ni) = (k / n, k % n);
            for h in &latents[ti] {
                for (r, v) in unit[ni].iter().chain(h).enumerate() {
                    inputs[(r, col)] = *v;
                }
                targets.push(z[ti][ni]);
                col += 1;
            }
        }
        let rows = Rows {
            inputs,
            targets,
            draws_per_point: h_draws,
        };
        let net = Network { arch, theta };
        let (_, g) = log_posterior_and_grad(&net, &rows, Prior::default(), n_data)?;
        Ok(g.into_iter().map(|v| -v).collect())
    };

    let samples = sghmc_sample(theta0, grad_fn, config, n_data as f64, seed ^ 0x5eed)?;
    Ok(MetaModel {
        architecture: arch.clone(),
        samples: samples.into_iter().map(Arc::new).collect(),
        encoder: encoder.clone(),
        normalization: NormalizationSpec {
            space: dataset.space.clone(),
            targets: scaling,
        },
        seed,
    })
}
