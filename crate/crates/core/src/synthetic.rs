//! Synthetic task families for exercising the encoder without real HPO data.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::dataset::EvaluationDataset;
use crate::error::{Error, Result};
use crate::sobol::sobol_grid;
use crate::space::ConfigSpace;

/// Random smooth function on the unit cube: a sum of random sinusoids plus a bowl.
#[derive(Clone, Debug)]
pub struct RandomSmooth {
    freqs: Vec<Vec<f64>>,
    phases: Vec<f64>,
    amps: Vec<f64>,
    center: Vec<f64>,
}

impl RandomSmooth {
    pub fn new<R: Rng + ?Sized>(dims: usize, rng: &mut R) -> Self {
        let k = 4;
        RandomSmooth {
            freqs: (0..k)
                .map(|_| (0..dims).map(|_| 3.0 * rng.sample::<f64, _>(StandardNormal)).collect())
                .collect(),
            phases: (0..k).map(|_| rng.random_range(0.0..std::f64::consts::TAU)).collect(),
            amps: (0..k).map(|_| rng.sample(StandardNormal)).collect(),
            center: (0..dims).map(|_| rng.random()).collect(),
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let waves: f64 = self
            .freqs
            .iter()
            .zip(&self.phases)
            .zip(&self.amps)
            .map(|((w, p), a)| a * (w.iter().zip(x).map(|(w, x)| w * x).sum::<f64>() + p).sin())
            .sum();
        let bowl: f64 = x.iter().zip(&self.center).map(|(x, c)| (x - c).powi(2)).sum();
        waves + 2.0 * bowl
    }
}

/// A dataset where some tasks come in sibling pairs.
#[derive(Clone, Debug)]
pub struct SplitFamily {
    pub dataset: EvaluationDataset,
    /// `sibling[t]` is the other half of task `t`, if it was split.
    pub sibling: Vec<Option<usize>>,
}

/// Builds `pairs` split tasks and `singles` unsplit ones on a shared Sobol grid.
///
/// Each split task is observed twice with independent noise of standard
/// deviation `noise` (relative to the base function's spread over the grid),
/// mimicking two evaluations of one HPO problem on random halves of its data.
pub fn split_family(
    space: &ConfigSpace,
    grid_size: usize,
    pairs: usize,
    singles: usize,
    noise: f64,
    seed: u64,
) -> Result<SplitFamily> {
    if pairs + singles < 2 {
        return Err(Error::invalid("need at least two tasks"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = sobol_grid(space, grid_size, true)?;
    let unit: Vec<Vec<f64>> = grid
        .iter()
        .map(|c| space.to_unit(c))
        .collect::<Result<_>>()?;
    let mut targets = Vec::new();
    let mut names = Vec::new();
    let mut sibling = Vec::new();
    for p in 0..pairs + singles {
        let f = RandomSmooth::new(space.len(), &mut rng);
        let base: Vec<f64> = unit.iter().map(|x| f.eval(x)).collect();
        let mean = base.iter().sum::<f64>() / base.len() as f64;
        let sd = (base.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / base.len() as f64).sqrt();
        let copies = if p < pairs { 2 } else { 1 };
        let first = targets.len();
        for c in 0..copies {
            targets.push(
                base.iter()
                    .map(|v| v + noise * sd * rng.sample::<f64, _>(StandardNormal))
                    .collect(),
            );
            names.push(if copies == 2 {
                format!("task{p:02}{}", ['a', 'b'][c])
            } else {
                format!("task{p:02}")
            });
        }
        if copies == 2 {
            sibling.push(Some(first + 1));
            sibling.push(Some(first));
        } else {
            sibling.push(None);
        }
    }
    Ok(SplitFamily {
        dataset: EvaluationDataset::new(space.clone(), grid, names, targets)?,
        sibling,
    })
}

/// Fraction of split tasks whose nearest other task (Euclidean, in `points`) is their sibling.
pub fn sibling_recovery(points: &[Vec<f64>], sibling: &[Option<usize>]) -> f64 {
    let dist = |a: &[f64], b: &[f64]| -> f64 { a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum() };
    let mut hits = 0;
    let mut total = 0;
    for (i, s) in sibling.iter().enumerate() {
        let Some(s) = s else { continue };
        total += 1;
        let nearest = (0..points.len())
            .filter(|&j| j != i)
            .min_by(|&a, &b| dist(&points[i], &points[a]).total_cmp(&dist(&points[i], &points[b])));
        if nearest == Some(*s) {
            hits += 1;
        }
    }
    if total == 0 {
        0.0
    } else {
        hits as f64 / total as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn family_shape() {
        let space = ConfigSpace::unit(2);
        let fam = split_family(&space, 50, 3, 2, 0.1, 1).unwrap();
        assert_eq!(fam.dataset.num_tasks(), 8);
        assert_eq!(fam.dataset.num_points(), 50);
        assert_eq!(fam.sibling[0], Some(1));
        assert_eq!(fam.sibling[5], Some(4));
        assert_eq!(fam.sibling[6], None);
    }

    #[test]
    fn recovery_counts_only_split_tasks() {
        let pts = vec![vec![0.0], vec![0.1], vec![5.0], vec![5.05]];
        let sib = vec![Some(1), Some(0), None, None];
        assert_eq!(sibling_recovery(&pts, &sib), 1.0);
        let sib = vec![Some(2), Some(3), Some(0), Some(1)];
        assert_eq!(sibling_recovery(&pts, &sib), 0.0);
    }
}
