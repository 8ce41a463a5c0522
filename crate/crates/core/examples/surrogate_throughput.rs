//! Measures how fast a sampled surrogate task answers queries.
//!
//! Trains a throwaway 3x500 meta-model on random smooth functions, samples
//! one task from it and times noiseless evaluations and a random-search run.
//!
//! cargo run --release --example surrogate_throughput -- [evaluations]

use std::time::Instant;

use metabench::bnn::SghmcConfig;
use metabench::dataset::EvaluationDataset;
use metabench::encoder::LatentSpaceConfig;
use metabench::optimizers::{run_method, Method, OptimizerOptions};
use metabench::pipeline::{train_model, TrainOptions};
use metabench::sobol::sobol_grid;
use metabench::space::{ConfigSpace, Dimension};
use metabench::synthetic::RandomSmooth;
use metabench::tasks::{sample_task, Objective, SamplingOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> metabench::Result<()> {
    let n: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(100_000);
    let space = ConfigSpace::new(vec![Dimension::log("C", 1e-3, 1e3), Dimension::log("gamma", 1e-4, 1e1)])?;
    let grid = sobol_grid(&space, 40, true)?;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let fns: Vec<RandomSmooth> = (0..3).map(|_| RandomSmooth::new(2, &mut rng)).collect();
    let targets = fns
        .iter()
        .map(|f| grid.iter().map(|x| Ok(f.eval(&space.to_unit(&x.0)?))).collect())
        .collect::<metabench::Result<_>>()?;
    let names = (0..3).map(|i| format!("t{i}")).collect();
    let ds = EvaluationDataset::new(space.clone(), grid, names, targets)?;

    // The weights only need to be a valid sample; throughput does not depend on them.
    let opts = TrainOptions {
        latent: LatentSpaceConfig {
            max_iters: 50,
            ..LatentSpaceConfig::default()
        },
        sghmc: SghmcConfig {
            burn_in: 2,
            num_samples: 2,
            keep_every: 1,
            ..SghmcConfig::default()
        },
        hidden: vec![500; 3],
        seed: 1,
    };
    let stored = train_model(&ds, &opts)?;
    let task = sample_task(&stored.model, &SamplingOptions::default(), 0, 5)?;

    let points: Vec<Vec<f64>> = (0..n).map(|_| space.from_unit(&[rng.random(), rng.random()]).0).collect();
    let start = Instant::now();
    let mut sink = 0.0;
    for x in &points {
        sink += task.evaluate_noiseless(x)?;
    }
    let secs = start.elapsed().as_secs_f64();
    std::hint::black_box(sink);
    println!("{n} evaluations in {secs:.3} s: {:.0} per second", n as f64 / secs);

    let start = Instant::now();
    let traj = run_method(Method::RandomSearch, &task, 100, 3, &OptimizerOptions::default())?;
    println!(
        "random search, 100 evaluations: best {:.4} in {:.4} s",
        traj.best(),
        start.elapsed().as_secs_f64()
    );
    Ok(())
}
