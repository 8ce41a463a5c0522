//! Trains a meta-model on nine Forrester tasks evaluated on a Sobol grid,
//! samples new tasks from it and compares their value ranges and minimizers
//! with the originals.
//!
//! cargo run --release --example forrester_meta_model -- [burn_in] [hidden_width]

use std::time::Instant;

use metabench::bnn::SghmcConfig;
use metabench::dataset::EvaluationDataset;
use metabench::encoder::LatentSpaceConfig;
use metabench::pipeline::{train_model, TrainOptions};
use metabench::sobol::sobol_grid;
use metabench::space::ConfigSpace;
use metabench::tasks::{forrester_family, sample_task, Objective, SamplingOptions};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Minimum, its location and maximum on a fine grid.
fn summary(f: &dyn Objective) -> metabench::Result<(f64, f64, f64)> {
    let mut best = (f64::INFINITY, 0.0);
    let mut top = f64::NEG_INFINITY;
    for i in 0..=200 {
        let x = i as f64 / 200.0;
        let y = f.evaluate_noiseless(&[x])?;
        if y < best.0 {
            best = (y, x);
        }
        top = top.max(y);
    }
    Ok((best.0, best.1, top))
}

fn main() -> metabench::Result<()> {
    let args: Vec<usize> = std::env::args().skip(1).filter_map(|s| s.parse().ok()).collect();
    let burn_in = args.first().copied().unwrap_or(5_000);
    let width = args.get(1).copied().unwrap_or(50);

    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let tasks = forrester_family(9, &mut rng)?;
    let space = ConfigSpace::unit(1);
    let grid = sobol_grid(&space, 100, true)?;
    let targets = tasks
        .iter()
        .map(|t| grid.iter().map(|x| t.value(x.0[0])).collect())
        .collect::<metabench::Result<Vec<Vec<f64>>>>()?;
    let names = (0..tasks.len()).map(|i| format!("f{i}")).collect();
    let dataset = EvaluationDataset::new(space, grid, names, targets)?;

    let opts = TrainOptions {
        latent: LatentSpaceConfig::with_latent_dim(2),
        sghmc: SghmcConfig {
            burn_in,
            num_samples: 50,
            keep_every: 50,
            ..SghmcConfig::default()
        },
        hidden: vec![width; 3],
        seed: 1,
    };
    let start = Instant::now();
    let stored = train_model(&dataset, &opts)?;
    println!("trained in {:.1} s", start.elapsed().as_secs_f64());

    println!("{:<10} {:>10} {:>8} {:>10}", "task", "min", "argmin", "max");
    for (i, t) in tasks.iter().enumerate() {
        let (lo, at, hi) = summary(t)?;
        println!("{:<10} {lo:>10.3} {at:>8.3} {hi:>10.3}", format!("f{i}"));
    }
    for i in 0..9 {
        let t = sample_task(&stored.model, &SamplingOptions::default(), i, 100 + i as u64)?;
        let (lo, at, hi) = summary(&t)?;
        println!("{:<10} {lo:>10.3} {at:>8.3} {hi:>10.3}", format!("sample{i}"));
    }
    Ok(())
}
