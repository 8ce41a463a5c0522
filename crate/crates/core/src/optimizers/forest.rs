use rand::seq::index::sample;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{expected_improvement, uniform_point, Evaluator, MODEL_STARTUP};
use crate::error::Result;

#[derive(Clone, Debug)]
enum Node {
    Leaf(f64),
    Split {
        dim: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Clone, Debug)]
struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf(v) => return v,
                Node::Split {
                    dim,
                    threshold,
                    left,
                    right,
                } => i = if x[dim] <= threshold { left } else { right },
            }
        }
    }
}

struct Builder<'a, R> {
    xs: &'a [Vec<f64>],
    ys: &'a [f64],
    min_leaf: usize,
    features: usize,
    rng: &'a mut R,
    nodes: Vec<Node>,
}

impl<R: Rng> Builder<'_, R> {
    fn build(&mut self, idx: Vec<usize>) -> usize {
        let id = self.nodes.len();
        let mean = idx.iter().map(|&i| self.ys[i]).sum::<f64>() / idx.len() as f64;
        self.nodes.push(Node::Leaf(mean));
        if idx.len() < 2 * self.min_leaf {
            return id;
        }
        let d = self.xs[0].len();
        let dims = sample(self.rng, d, self.features).into_vec();
        let total: f64 = idx.iter().map(|&i| self.ys[i]).sum();
        let n = idx.len() as f64;
        let mut best: Option<(f64, usize, f64)> = None;
        for dim in dims {
            let mut sorted = idx.clone();
            sorted.sort_by(|&a, &b| self.xs[a][dim].total_cmp(&self.xs[b][dim]));
            let mut left_sum = 0.0;
            for k in 0..sorted.len() - 1 {
                left_sum += self.ys[sorted[k]];
                let nl = k + 1;
                let (lo, hi) = (self.xs[sorted[k]][dim], self.xs[sorted[k + 1]][dim]);
                if nl < self.min_leaf || sorted.len() - nl < self.min_leaf || lo == hi {
                    continue;
                }
                let nr = n - nl as f64;
                let right_sum = total - left_sum;
                // Maximizing this is minimizing the within-child sum of squares.
                let gain = left_sum * left_sum / nl as f64 + right_sum * right_sum / nr;
                if best.is_none_or(|b| gain > b.0) {
                    best = Some((gain, dim, 0.5 * (lo + hi)));
                }
            }
        }
        let Some((gain, dim, threshold)) = best else {
            return id;
        };
        if gain <= total * total / n + 1e-12 * total.abs().max(1.0) {
            return id;
        }
        let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| self.xs[i][dim] <= threshold);
        let left = self.build(l);
        let right = self.build(r);
        self.nodes[id] = Node::Split {
            dim,
            threshold,
            left,
            right,
        };
        id
    }
}

/// Bagged regression trees; the prediction is the across-tree mean and variance.
#[derive(Clone, Debug)]
pub struct RandomForest {
    trees: Vec<Tree>,
}

impl RandomForest {
    pub const TREES: usize = 10;
    pub const MIN_LEAF: usize = 3;

    pub fn fit<R: Rng>(xs: &[Vec<f64>], ys: &[f64], trees: usize, min_leaf: usize, rng: &mut R) -> Self {
        let n = ys.len();
        let d = xs[0].len();
        let features = ((5 * d).div_ceil(6)).max(1);
        let trees = (0..trees)
            .map(|_| {
                let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
                let mut b = Builder {
                    xs,
                    ys,
                    min_leaf,
                    features,
                    rng: &mut *rng,
                    nodes: Vec::new(),
                };
                b.build(idx);
                Tree { nodes: b.nodes }
            })
            .collect();
        RandomForest { trees }
    }

    pub fn num_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn tree_predictions(&self, x: &[f64]) -> Vec<f64> {
        self.trees.iter().map(|t| t.predict(x)).collect()
    }

    pub fn predict(&self, x: &[f64]) -> (f64, f64) {
        let p = self.tree_predictions(x);
        let m = p.iter().sum::<f64>() / p.len() as f64;
        let v = p.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / p.len() as f64;
        (m, v)
    }
}

const RANDOM_CANDIDATES: usize = 500;
const LOCAL_STARTS: usize = 10;
const LOCAL_STEPS: usize = 20;
const NEIGHBOUR_STD: f64 = 0.1;

fn ei(forest: &RandomForest, x: &[f64], y_best: f64) -> f64 {
    let (m, v) = forest.predict(x);
    expected_improvement(m, v.sqrt(), y_best)
}

/// Local search starts from the best evaluated points and the best random
/// candidates (by EI), `LOCAL_STARTS` of each.
fn maximize_ei<R: Rng>(forest: &RandomForest, observed: &[Vec<f64>], ys: &[f64], rng: &mut R) -> Vec<f64> {
    let d = observed[0].len();
    let y_best = ys.iter().copied().fold(f64::INFINITY, f64::min);
    let mut scored: Vec<(f64, Vec<f64>)> = (0..RANDOM_CANDIDATES)
        .map(|_| {
            let x = uniform_point(d, rng);
            (ei(forest, &x, y_best), x)
        })
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));
    scored.truncate(LOCAL_STARTS);
    let mut order: Vec<usize> = (0..ys.len()).collect();
    order.sort_by(|&a, &b| ys[a].total_cmp(&ys[b]));
    for &i in order.iter().take(LOCAL_STARTS) {
        scored.push((ei(forest, &observed[i], y_best), observed[i].clone()));
    }
    let mut best = scored[0].clone();
    for (mut score, mut x) in scored {
        for _ in 0..LOCAL_STEPS {
            let mut moved = false;
            for j in 0..d {
                let mut nb = x.clone();
                nb[j] = (nb[j] + NEIGHBOUR_STD * rng.sample::<f64, _>(StandardNormal)).clamp(0.0, 1.0);
                let s = ei(forest, &nb, y_best);
                if s > score {
                    score = s;
                    x = nb;
                    moved = true;
                }
            }
            if !moved {
                break;
            }
        }
        if score > best.0 {
            best = (score, x);
        }
    }
    best.1
}

/// Random-forest Bayesian optimization with stochastic local search and
/// interleaved random points.
pub fn run_smac_lite(ev: &mut Evaluator, rng: &mut ChaCha8Rng) -> Result<()> {
    let d = ev.dims();
    let mut iteration = 0usize;
    while !ev.done() {
        let u = if ev.ys.len() < MODEL_STARTUP || iteration % 2 == 1 {
            uniform_point(d, rng)
        } else {
            let forest = RandomForest::fit(&ev.us, &ev.ys, RandomForest::TREES, RandomForest::MIN_LEAF, rng);
            maximize_ei(&forest, &ev.us, &ev.ys, rng)
        };
        if ev.ys.len() >= MODEL_STARTUP {
            iteration += 1;
        }
        ev.eval(&u)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimizers::{run_method, Method, OptimizerOptions};
    use crate::tasks::FnObjective;
    use rand::SeedableRng;

    fn data(n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let xs: Vec<Vec<f64>> = (0..n).map(|_| uniform_point(2, &mut rng)).collect();
        let ys = xs.iter().map(|x| (6.0 * x[0]).sin() + x[1]).collect();
        (xs, ys)
    }

    #[test]
    fn constant_targets_give_zero_variance() {
        let (xs, _) = data(30, 1);
        let ys = vec![2.5; 30];
        let f = RandomForest::fit(&xs, &ys, 10, 3, &mut ChaCha8Rng::seed_from_u64(0));
        let (m, v) = f.predict(&[0.3, 0.3]);
        assert_eq!((m, v), (2.5, 0.0));
        assert_eq!(ei(&f, &[0.3, 0.3], 3.0), 0.5);
        assert_eq!(ei(&f, &[0.3, 0.3], 2.0), 0.0);
    }

    #[test]
    fn forest_size_is_exact() {
        let (xs, ys) = data(20, 2);
        let f = RandomForest::fit(&xs, &ys, 10, 3, &mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(f.num_trees(), 10);
    }

    #[test]
    fn mean_is_the_average_tree_prediction() {
        let (xs, ys) = data(40, 3);
        let f = RandomForest::fit(&xs, &ys, 10, 3, &mut ChaCha8Rng::seed_from_u64(4));
        for x in [[0.1, 0.9], [0.5, 0.5], [0.77, 0.01]] {
            let per = f.tree_predictions(&x);
            let mut sum = 0.0;
            for p in &per {
                sum += p;
            }
            let mean = sum / 10.0;
            let mut var = 0.0;
            for p in &per {
                var += (p - mean) * (p - mean);
            }
            let (m, v) = f.predict(&x);
            assert!((m - mean).abs() < 1e-12 && (v - var / 10.0).abs() < 1e-12);
        }
    }

    #[test]
    fn leaves_respect_min_size() {
        // Each leaf mean is an average over >= 3 bootstrap rows, so with
        // distinct integer targets no leaf can reproduce a single target.
        let xs: Vec<Vec<f64>> = (0..12).map(|i| vec![i as f64 / 12.0]).collect();
        let ys: Vec<f64> = (0..12).map(|i| (i * i) as f64).collect();
        let f = RandomForest::fit(&xs, &ys, 1, 3, &mut ChaCha8Rng::seed_from_u64(0));
        for t in &f.trees {
            let leaves = t.nodes.iter().filter(|n| matches!(n, Node::Leaf(_))).count();
            let splits = t.nodes.len() - leaves;
            assert_eq!(leaves, splits + 1);
            assert!(leaves <= 4);
        }
    }

    #[test]
    fn improves_on_a_quadratic() {
        let f = FnObjective::new(2, |x| (x[0] - 0.7).powi(2) + (x[1] - 0.2).powi(2));
        let opts = OptimizerOptions::default();
        let mut best: Vec<f64> = (0..11)
            .map(|s| run_method(Method::SmacLite, &f, 60, s, &opts).unwrap().best())
            .collect();
        best.sort_by(f64::total_cmp);
        assert!(best[5] < 1e-2, "{best:?}");
    }
}
