//! The benchmarked HPO methods. All of them search the unit cube and map
//! points through the objective's configuration space.

mod acquisition;
mod bnn_bo;
mod cmaes;
mod de;
mod forest;
mod gp;
mod random_search;
mod tpe;

use std::fmt;
use std::str::FromStr;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tasks::Objective;

pub use acquisition::{expected_improvement, local_and_uniform_candidates};
pub use bnn_bo::{run_bnn_bo, BnnBoOptions};
pub use cmaes::{cmaes_population_size, run_cmaes};
pub use de::{de_mutation, de_select, run_de, DeOptions};
pub use forest::{run_smac_lite, RandomForest};
pub use gp::{run_gp_bo, GaussianProcess, GpBoOptions};
pub use random_search::run_random_search;
pub use tpe::{good_set_size, run_tpe, tpe_propose, TpeOptions};

/// Method tags accepted on the command line.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "rs")]
    RandomSearch,
    #[serde(rename = "de")]
    DifferentialEvolution,
    #[serde(rename = "cmaes")]
    CmaEs,
    #[serde(rename = "tpe")]
    Tpe,
    #[serde(rename = "smac")]
    SmacLite,
    #[serde(rename = "gp-bo")]
    GpBo,
    #[serde(rename = "bnn-bo")]
    BnnBo,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::RandomSearch,
        Method::DifferentialEvolution,
        Method::CmaEs,
        Method::Tpe,
        Method::SmacLite,
        Method::GpBo,
        Method::BnnBo,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Method::RandomSearch => "rs",
            Method::DifferentialEvolution => "de",
            Method::CmaEs => "cmaes",
            Method::Tpe => "tpe",
            Method::SmacLite => "smac",
            Method::GpBo => "gp-bo",
            Method::BnnBo => "bnn-bo",
        }
    }

    /// Evaluation budget used in the benchmarking protocol.
    pub fn default_budget(self) -> usize {
        match self {
            Method::GpBo | Method::BnnBo => 100,
            _ => 200,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.tag() == s)
            .ok_or_else(|| Error::invalid(format!("unknown method `{s}`")))
    }
}

/// Method-specific settings.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OptimizerOptions {
    pub de: DeOptions,
    pub tpe: TpeOptions,
    pub gp: GpBoOptions,
    pub bnn: BnnBoOptions,
}

/// Evaluated points and the incumbent curve of one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub method: Method,
    pub task: String,
    pub seed: u64,
    /// Evaluated configurations in native units.
    pub xs: Vec<Vec<f64>>,
    pub ys: Vec<f64>,
    /// Best observed value after each evaluation.
    pub incumbent: Vec<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.ys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ys.is_empty()
    }

    pub fn best(&self) -> f64 {
        self.incumbent.last().copied().unwrap_or(f64::INFINITY)
    }
}

/// Budgeted access to an objective in unit-cube coordinates.
pub struct Evaluator<'a> {
    objective: &'a dyn Objective,
    budget: usize,
    noise_rng: ChaCha8Rng,
    /// Unit-cube points evaluated so far.
    pub us: Vec<Vec<f64>>,
    pub ys: Vec<f64>,
    xs: Vec<Vec<f64>>,
}

impl<'a> Evaluator<'a> {
    pub fn new(objective: &'a dyn Objective, budget: usize, seed: u64) -> Self {
        Evaluator {
            objective,
            budget,
            noise_rng: ChaCha8Rng::seed_from_u64(seed ^ 0x6e6f_6973_6521),
            us: Vec::new(),
            ys: Vec::new(),
            xs: Vec::new(),
        }
    }

    pub fn dims(&self) -> usize {
        self.objective.dims()
    }

    pub fn remaining(&self) -> usize {
        self.budget - self.ys.len()
    }

    pub fn done(&self) -> bool {
        self.remaining() == 0
    }

    /// Evaluates a unit-cube point (clamped into the cube).
    pub fn eval(&mut self, u: &[f64]) -> Result<f64> {
        if self.done() {
            return Err(Error::invalid("evaluation budget exhausted"));
        }
        let u: Vec<f64> = u.iter().map(|v| v.clamp(0.0, 1.0)).collect();
        let x = self.objective.space().from_unit(&u);
        let y = self.objective.evaluate(&x, &mut self.noise_rng as &mut dyn RngCore)?;
        if !y.is_finite() {
            return Err(Error::NonFinite { index: self.ys.len() });
        }
        self.us.push(u);
        self.xs.push(x.0);
        self.ys.push(y);
        Ok(y)
    }

    /// Index of the best observation so far.
    pub fn best_index(&self) -> Option<usize> {
        (0..self.ys.len()).min_by(|&a, &b| self.ys[a].total_cmp(&self.ys[b]))
    }

    pub fn into_trajectory(self, method: Method, task: &str, seed: u64) -> Trajectory {
        let mut best = f64::INFINITY;
        let incumbent = self
            .ys
            .iter()
            .map(|&y| {
                best = best.min(y);
                best
            })
            .collect();
        Trajectory {
            method,
            task: task.to_string(),
            seed,
            xs: self.xs,
            ys: self.ys,
            incumbent,
        }
    }
}

/// Uniform point in the unit cube. Every method draws its first point this way
/// from a fresh `ChaCha8Rng` seeded with the run seed.
pub fn uniform_point<R: Rng + ?Sized>(dims: usize, rng: &mut R) -> Vec<f64> {
    (0..dims).map(|_| rng.random::<f64>()).collect()
}

/// Number of random points model-based methods evaluate before fitting a model.
pub const MODEL_STARTUP: usize = 2;

/// Runs `method` on `objective` for `budget` evaluations.
pub fn run_method(
    method: Method,
    objective: &dyn Objective,
    budget: usize,
    seed: u64,
    options: &OptimizerOptions,
) -> Result<Trajectory> {
    if budget == 0 {
        return Err(Error::invalid("budget must be >= 1"));
    }
    let mut ev = Evaluator::new(objective, budget, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match method {
        Method::RandomSearch => run_random_search(&mut ev, &mut rng)?,
        Method::DifferentialEvolution => run_de(&mut ev, &mut rng, &options.de)?,
        Method::CmaEs => run_cmaes(&mut ev, &mut rng)?,
        Method::Tpe => run_tpe(&mut ev, &mut rng, &options.tpe)?,
        Method::SmacLite => run_smac_lite(&mut ev, &mut rng)?,
        Method::GpBo => run_gp_bo(&mut ev, &mut rng, &options.gp)?,
        Method::BnnBo => run_bnn_bo(&mut ev, &mut rng, &options.bnn)?,
    }
    Ok(ev.into_trajectory(method, "", seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tasks::FnObjective;

    #[test]
    fn tags_roundtrip() {
        for m in Method::ALL {
            assert_eq!(m.tag().parse::<Method>().unwrap(), m);
            assert_eq!(serde_json::to_string(&m).unwrap(), format!("\"{}\"", m.tag()));
        }
        assert!("sgd".parse::<Method>().is_err());
        assert_eq!(Method::GpBo.default_budget(), 100);
        assert_eq!(Method::Tpe.default_budget(), 200);
    }

    #[test]
    fn evaluator_enforces_budget() {
        let f = FnObjective::new(1, |x| x[0]);
        let mut ev = Evaluator::new(&f, 2, 0);
        ev.eval(&[0.5]).unwrap();
        ev.eval(&[1.5]).unwrap();
        assert_eq!(ev.us[1], vec![1.0]);
        assert!(ev.eval(&[0.1]).is_err());
    }
}
