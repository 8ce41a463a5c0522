use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{uniform_point, Evaluator};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeOptions {
    pub population: usize,
    /// Differential weight.
    pub f: f64,
    /// Crossover probability.
    pub cr: f64,
}

impl Default for DeOptions {
    fn default() -> Self {
        DeOptions {
            population: 10,
            f: 0.5,
            cr: 0.5,
        }
    }
}

/// `x1 + F (x2 − x3)`, clipped to the unit cube.
pub fn de_mutation(x1: &[f64], x2: &[f64], x3: &[f64], f: f64) -> Vec<f64> {
    x1.iter()
        .zip(x2)
        .zip(x3)
        .map(|((a, b), c)| (a + f * (b - c)).clamp(0.0, 1.0))
        .collect()
}

/// Greedy selection: the trial replaces the parent unless it is worse.
pub fn de_select(trial_y: f64, parent_y: f64) -> bool {
    trial_y <= parent_y
}

fn distinct<R: Rng + ?Sized>(n: usize, exclude: usize, rng: &mut R) -> [usize; 3] {
    let mut out = [usize::MAX; 3];
    let mut k = 0;
    while k < 3 {
        let r = rng.random_range(0..n);
        if r != exclude && !out[..k].contains(&r) {
            out[k] = r;
            k += 1;
        }
    }
    out
}

/// rand/1/bin differential evolution with immediate replacement.
pub fn run_de(ev: &mut Evaluator, rng: &mut ChaCha8Rng, opts: &DeOptions) -> Result<()> {
    let np = opts.population;
    if np < 4 {
        return Err(Error::invalid("DE needs a population of at least 4"));
    }
    if ev.remaining() < np {
        return Err(Error::invalid(format!(
            "DE budget {} is smaller than the population {np}",
            ev.remaining()
        )));
    }
    let d = ev.dims();
    let mut pop = Vec::with_capacity(np);
    let mut fit = Vec::with_capacity(np);
    for _ in 0..np {
        let u = uniform_point(d, rng);
        fit.push(ev.eval(&u)?);
        pop.push(u);
    }
    'outer: loop {
        for i in 0..np {
            if ev.done() {
                break 'outer;
            }
            let [r1, r2, r3] = distinct(np, i, rng);
            let v = de_mutation(&pop[r1], &pop[r2], &pop[r3], opts.f);
            let forced = rng.random_range(0..d);
            let trial: Vec<f64> = (0..d)
                .map(|j| {
                    if j == forced || rng.random::<f64>() < opts.cr {
                        v[j]
                    } else {
                        pop[i][j]
                    }
                })
                .collect();
            let y = ev.eval(&trial)?;
            if de_select(y, fit[i]) {
                pop[i] = trial;
                fit[i] = y;
            }
        }
    }
    Ok(())
}
