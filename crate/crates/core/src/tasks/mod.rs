//! Benchmark objectives: tasks sampled from a meta-model and the Forrester family.

mod file;
mod forrester;
mod surrogate;

use rand::RngCore;

use crate::error::Result;
use crate::space::ConfigSpace;

pub(crate) use file::{decode_f64s, encode_f64s};
pub use file::{load_task, save_task, Task, TASK_FILE_VERSION};
pub use forrester::{forrester_family, ForresterTask};
#[cfg(test)]
pub(crate) use surrogate::tests as surrogate_tests;
pub use surrogate::{sample_task, LatentSampling, NoiseMode, SamplingOptions, SurrogateTask};

/// A black-box function to be minimized.
pub trait Objective: Send + Sync {
    fn space(&self) -> &ConfigSpace;

    /// Observation at `x` (native units). Noisy objectives draw from `rng`.
    fn evaluate(&self, x: &[f64], rng: &mut dyn RngCore) -> Result<f64>;

    /// Noise-free value at `x`; equals [`Objective::evaluate`] for noiseless objectives.
    fn evaluate_noiseless(&self, x: &[f64]) -> Result<f64>;

    fn dims(&self) -> usize {
        self.space().len()
    }
}

/// Wraps a closure over the unit cube as an objective.
pub struct FnObjective<F> {
    space: ConfigSpace,
    f: F,
}

impl<F> FnObjective<F>
where
    F: Fn(&[f64]) -> f64 + Send + Sync,
{
    pub fn new(dims: usize, f: F) -> Self {
        FnObjective {
            space: ConfigSpace::unit(dims),
            f,
        }
    }
}

impl<F> Objective for FnObjective<F>
where
    F: Fn(&[f64]) -> f64 + Send + Sync,
{
    fn space(&self) -> &ConfigSpace {
        &self.space
    }

    fn evaluate(&self, x: &[f64], _rng: &mut dyn RngCore) -> Result<f64> {
        self.evaluate_noiseless(x)
    }

    fn evaluate_noiseless(&self, x: &[f64]) -> Result<f64> {
        self.space.check(x)?;
        Ok((self.f)(x))
    }
}
