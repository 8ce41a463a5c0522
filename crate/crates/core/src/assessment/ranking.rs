use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ascending fractional ranks; tied values share the average of their ordinal ranks.
pub fn fractional_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && values[order[j]] == values[order[i]] {
            j += 1;
        }
        // Ordinal ranks i+1..=j averaged.
        let r = (i + 1 + j) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = r;
        }
        i = j;
    }
    ranks
}

/// Average fractional rank of each method after each evaluation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankTable {
    pub methods: Vec<String>,
    /// `ranks[k][i]`: method `k` after `i + 1` evaluations.
    pub ranks: Vec<Vec<f64>>,
    pub bootstrap: usize,
}

impl RankTable {
    pub fn iterations(&self) -> usize {
        self.ranks.first().map_or(0, Vec::len)
    }
}

/// Value of a curve at iteration `i`, carrying the last value forward when
/// the run used a smaller budget.
fn at(curve: &[f64], i: usize) -> f64 {
    curve[i.min(curve.len() - 1)]
}

/// Bootstrap average ranking.
///
/// `curves[t][k]` holds the incumbent curves of method `k` on task `t`, one
/// per run. For each task, `draws` times one run per method is picked
/// uniformly and the methods are ranked at every iteration; the ranks are
/// averaged over draws and then over tasks.
pub fn bootstrap_ranking<R: Rng + ?Sized>(
    methods: &[String],
    curves: &[Vec<Vec<Vec<f64>>>],
    draws: usize,
    rng: &mut R,
) -> Result<RankTable> {
    let k = methods.len();
    if k < 2 {
        return Err(Error::invalid("ranking needs at least two methods"));
    }
    if curves.is_empty() || draws == 0 {
        return Err(Error::invalid("ranking needs at least one task and one bootstrap draw"));
    }
    let mut iterations = 0;
    for (t, per_task) in curves.iter().enumerate() {
        if per_task.len() != k {
            return Err(Error::Incomplete(format!(
                "task {t} has curves for {} methods, expected {k}",
                per_task.len()
            )));
        }
        for (m, runs) in per_task.iter().enumerate() {
            if runs.is_empty() || runs.iter().any(Vec::is_empty) {
                return Err(Error::Incomplete(format!("task {t}, method {}: missing runs", methods[m])));
            }
            iterations = iterations.max(runs.iter().map(Vec::len).max().unwrap_or(0));
        }
    }
    let mut total = vec![vec![0.0; iterations]; k];
    let mut values = vec![0.0; k];
    for per_task in curves {
        let mut acc = vec![vec![0.0; iterations]; k];
        for _ in 0..draws {
            let pick: Vec<&Vec<f64>> = per_task.iter().map(|runs| &runs[rng.random_range(0..runs.len())]).collect();
            for i in 0..iterations {
                for (v, c) in values.iter_mut().zip(&pick) {
                    *v = at(c, i);
                }
                for (a, r) in acc.iter_mut().zip(fractional_ranks(&values)) {
                    a[i] += r;
                }
            }
        }
        for (t, a) in total.iter_mut().zip(&acc) {
            for (x, y) in t.iter_mut().zip(a) {
                *x += y / draws as f64;
            }
        }
    }
    for row in &mut total {
        for v in row.iter_mut() {
            *v /= curves.len() as f64;
        }
    }
    Ok(RankTable {
        methods: methods.to_vec(),
        ranks: total,
        bootstrap: draws,
    })
}
