use std::sync::Arc;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::Objective;
use crate::bnn::{CompactNet, MetaModel, NetArchitecture, Network};
use crate::dataset::NormalizationSpec;
use crate::encoder::sample_latent;
use crate::error::{Error, Result};
use crate::space::ConfigSpace;

/// How observations are corrupted.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum NoiseMode {
    Noiseless,
    /// Fresh `ε ~ N(0, 1)` on every evaluation.
    Noisy,
    /// One `ε` drawn when the task is sampled and reused for every evaluation.
    FixedEpsilon { epsilon: f64 },
}

/// Where a new task's latent vector comes from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LatentSampling {
    /// A draw from one uniformly chosen training task's posterior.
    #[default]
    Single,
    /// As `Single`, plus isotropic jitter of 0.05 × the average posterior std.
    Pooled,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplingOptions {
    pub noisy: bool,
    pub fixed_epsilon: bool,
    pub latent: LatentSampling,
}

impl Default for SamplingOptions {
    fn default() -> Self {
        SamplingOptions {
            noisy: false,
            fixed_epsilon: false,
            latent: LatentSampling::Single,
        }
    }
}

/// One objective `f(x) = μ̂(x, h* | θ_i)` drawn from a meta-model.
#[derive(Clone, Debug)]
pub struct SurrogateTask {
    pub id: usize,
    pub seed: u64,
    pub latent: Vec<f64>,
    /// Posterior the latent was drawn from.
    pub source_task: usize,
    pub weight_index: usize,
    pub architecture: NetArchitecture,
    pub weights: Arc<Vec<f64>>,
    pub noise: NoiseMode,
    pub normalization: NormalizationSpec,
    net: CompactNet,
}

impl PartialEq for SurrogateTask {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id
            && self.seed == other.seed
            && self.latent == other.latent
            && self.source_task == other.source_task
            && self.weight_index == other.weight_index
            && self.architecture == other.architecture
            && self.weights == other.weights
            && self.noise == other.noise
            && self.normalization == other.normalization
    }
}

impl SurrogateTask {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        id: usize,
        seed: u64,
        latent: Vec<f64>,
        source_task: usize,
        weight_index: usize,
        architecture: NetArchitecture,
        weights: Arc<Vec<f64>>,
        noise: NoiseMode,
        normalization: NormalizationSpec,
    ) -> Result<Self> {
        Network::new(&architecture, &weights)?;
        if architecture.input_dim != normalization.space.len() + latent.len() {
            return Err(Error::DimensionMismatch(format!(
                "network input {} != D {} + Q {}",
                architecture.input_dim,
                normalization.space.len(),
                latent.len()
            )));
        }
        let net = CompactNet::new(&architecture, &weights);
        Ok(SurrogateTask {
            id,
            seed,
            latent,
            source_task,
            weight_index,
            architecture,
            weights,
            noise,
            normalization,
            net,
        })
    }

    /// `σ̂²` of the chosen weight sample in standardized units.
    pub fn noise_variance(&self) -> f64 {
        self.net.noise_variance()
    }

    /// Noise variance in raw target units.
    pub fn raw_noise_variance(&self) -> f64 {
        let s = self.normalization.targets.std;
        self.noise_variance() * s * s
    }

    fn standardized_mean(&self, x: &[f64]) -> Result<f64> {
        let mut input = self.normalization.normalize_input(x)?;
        input.extend_from_slice(&self.latent);
        Ok(self.net.mean(&input))
    }

    pub fn with_noise(&self, noise: NoiseMode) -> Self {
        SurrogateTask {
            noise,
            ..self.clone()
        }
    }
}

impl Objective for SurrogateTask {
    fn space(&self) -> &ConfigSpace {
        &self.normalization.space
    }

    fn evaluate(&self, x: &[f64], rng: &mut dyn RngCore) -> Result<f64> {
        let m = self.standardized_mean(x)?;
        let eps = match self.noise {
            NoiseMode::Noiseless => 0.0,
            NoiseMode::Noisy => rng.sample::<f64, _>(StandardNormal),
            NoiseMode::FixedEpsilon { epsilon } => epsilon,
        };
        let z = m + eps * self.noise_variance().sqrt();
        Ok(self.normalization.targets.denormalize(z))
    }

    fn evaluate_noiseless(&self, x: &[f64]) -> Result<f64> {
        Ok(self.normalization.targets.denormalize(self.standardized_mean(x)?))
    }
}

/// Draws a new task: a training-task posterior and a weight sample, each uniformly.
pub fn sample_task(model: &MetaModel, options: &SamplingOptions, id: usize, seed: u64) -> Result<SurrogateTask> {
    let posteriors = &model.encoder.posteriors;
    if posteriors.is_empty() || model.samples.is_empty() {
        return Err(Error::invalid("model needs at least one posterior and one weight sample"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let source = rng.random_range(0..posteriors.len());
    let mut latent = sample_latent(&posteriors[source], &mut rng);
    if options.latent == LatentSampling::Pooled {
        let q = model.latent_dim() as f64;
        let avg_std = posteriors
            .iter()
            .flat_map(|p| p.variance.iter().map(|v| v.sqrt()))
            .sum::<f64>()
            / (posteriors.len() as f64 * q);
        for h in latent.iter_mut() {
            *h += 0.05 * avg_std * rng.sample::<f64, _>(StandardNormal);
        }
    }
    let weight_index = rng.random_range(0..model.samples.len());
    let noise = match (options.noisy, options.fixed_epsilon) {
        (false, _) => NoiseMode::Noiseless,
        (true, false) => NoiseMode::Noisy,
        (true, true) => NoiseMode::FixedEpsilon {
            epsilon: rng.sample(StandardNormal),
        },
    };
    SurrogateTask::new(
        id,
        seed,
        latent,
        source,
        weight_index,
        model.architecture.clone(),
        model.samples[weight_index].clone(),
        noise,
        model.normalization.clone(),
    )
}
