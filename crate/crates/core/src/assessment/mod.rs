//! Runtime-to-target metrics, ECDFs, bootstrap rankings, U tests and score estimates.

mod ranking;
mod runtime;
mod utest;

use serde::{Deserialize, Serialize};

pub use ranking::{bootstrap_ranking, fractional_ranks, RankTable};
pub use runtime::{ecdf, make_targets, quantiles, runtime_to_target, EcdfCurve, RuntimeRecord};
pub use utest::{group_means, mann_whitney_u, pairwise_utest_matrix, u_statistic, UTestMatrix, ORIENTATION};

/// Monte-Carlo estimate of a method's expected metric over the task distribution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreEstimate {
    pub mean: f64,
    /// `None` with a single task.
    pub se: Option<f64>,
    pub tasks: usize,
}

/// Mean and standard error of per-task values. `None` for an empty slice.
pub fn score_estimate(values: &[f64]) -> Option<ScoreEstimate> {
    let n = values.len();
    if n == 0 {
        return None;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let se = (n > 1).then(|| {
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        (var / n as f64).sqrt()
    });
    Some(ScoreEstimate { mean, se, tasks: n })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Exp};

    #[test]
    fn two_values() {
        let s = score_estimate(&[2.0, 4.0]).unwrap();
        assert_eq!(s.mean, 3.0);
        assert!((s.se.unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn single_task_has_no_standard_error() {
        assert_eq!(score_estimate(&[7.0]).unwrap().se, None);
        assert!(score_estimate(&[]).is_none());
    }

    #[test]
    fn monte_carlo_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let d = Exp::new(0.5).unwrap();
        let v: Vec<f64> = (0..1000).map(|_| d.sample(&mut rng)).collect();
        let s = score_estimate(&v).unwrap();
        assert!((s.mean - 2.0).abs() <= 4.0 * s.se.unwrap());
    }
}
