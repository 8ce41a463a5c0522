//! Probabilistic task encoder: a Bayesian GP-LVM over the task × grid target matrix.
//!
//! Each task's standardized target vector is treated as one GP-LVM observation
//! with a latent input `h_t ∈ R^Q` and a Gaussian variational posterior
//! `q(h_t) = N(m_t, diag(Σ_t))`. Training maximizes the sparse collapsed lower
//! bound (see [`bound`]) with L-BFGS.

pub mod bound;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::Matern52;
use crate::lbfgs::{maximize, LbfgsOptions};
use crate::quadrature::GaussHermite;

pub use bound::{
    bound_and_gradients, BoundData, BoundEval, EncoderState, MAX_LENGTHSCALE, MAX_NOISE_VARIANCE, MIN_LENGTHSCALE,
    MIN_NOISE_VARIANCE, SIGNAL_VARIANCE_RANGE,
};

/// Encoder hyperparameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatentSpaceConfig {
    pub latent_dim: usize,
    /// Number of inducing inputs; `None` means `min(T, 32)`.
    pub inducing_count: Option<usize>,
    pub max_iters: usize,
    pub rel_tol: f64,
    /// Upper bound on the number of Gauss–Hermite nodes per task.
    pub quadrature_budget: usize,
}

impl Default for LatentSpaceConfig {
    fn default() -> Self {
        LatentSpaceConfig {
            latent_dim: 5,
            inducing_count: None,
            max_iters: 1000,
            rel_tol: 1e-6,
            quadrature_budget: 600,
        }
    }
}

impl LatentSpaceConfig {
    pub fn with_latent_dim(latent_dim: usize) -> Self {
        LatentSpaceConfig {
            latent_dim,
            ..Default::default()
        }
    }

    fn inducing_for(&self, tasks: usize) -> usize {
        self.inducing_count.unwrap_or(tasks.min(32))
    }

    fn quadrature(&self) -> GaussHermite {
        GaussHermite::with_budget(self.latent_dim, self.quadrature_budget, 20)
    }
}

/// Variational posterior `N(mean, diag(variance))` of one task's latent vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskPosterior {
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
}

impl TaskPosterior {
    pub fn dims(&self) -> usize {
        self.mean.len()
    }
}

/// Trained encoder.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncoderModel {
    pub config: LatentSpaceConfig,
    pub posteriors: Vec<TaskPosterior>,
    pub kernel: Matern52,
    pub noise_variance: f64,
    pub inducing: Vec<Vec<f64>>,
    /// Final value of the variational lower bound.
    pub bound: f64,
    /// Bound at initialization followed by every accepted optimizer step.
    pub bound_trace: Vec<f64>,
    pub lengthscale_clamped: bool,
}

impl EncoderModel {
    pub fn latent_dim(&self) -> usize {
        self.config.latent_dim
    }

    /// Posterior means as rows.
    pub fn means(&self) -> Vec<Vec<f64>> {
        self.posteriors.iter().map(|p| p.mean.clone()).collect()
    }
}

/// Draws `h ~ N(m_t, diag(Σ_t))`.
pub fn sample_latent<R: Rng + ?Sized>(posterior: &TaskPosterior, rng: &mut R) -> Vec<f64> {
    posterior
        .mean
        .iter()
        .zip(&posterior.variance)
        .map(|(m, v)| {
            let z: f64 = rng.sample(StandardNormal);
            m + v.max(0.0).sqrt() * z
        })
        .collect()
}

/// Principal-component scores of the rows of `targets`, one column per component,
/// each scaled to unit variance. Components beyond the numerical rank are left at 0.
pub fn pca_scores(targets: &[Vec<f64>], components: usize) -> Vec<Vec<f64>> {
    let t = targets.len();
    let n = targets[0].len();
    let mut y = DMatrix::from_fn(t, n, |i, j| targets[i][j]);
    for j in 0..n {
        let mean = y.column(j).mean();
        y.column_mut(j).add_scalar_mut(-mean);
    }
    let gram = &y * y.transpose();
    let eig = SymmetricEigen::new(gram);
    let mut order: Vec<usize> = (0..t).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let top = eig.eigenvalues[order[0]].max(0.0);
    let mut scores = vec![vec![0.0; components]; t];
    for (c, &k) in order.iter().take(components).enumerate() {
        let lambda = eig.eigenvalues[k];
        if !(lambda > 1e-10 * top) || lambda <= 0.0 {
            continue;
        }
        let u = eig.eigenvectors.column(k);
        // sign convention: the largest-magnitude entry is positive
        let pivot = (0..t)
            .max_by(|&a, &b| u[a].abs().total_cmp(&u[b].abs()))
            .unwrap_or(0);
        let sign = if u[pivot] < 0.0 { -1.0 } else { 1.0 };
        let col: Vec<f64> = (0..t).map(|i| sign * u[i]).collect();
        let mean = col.iter().sum::<f64>() / t as f64;
        let sd = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / t as f64).sqrt();
        for i in 0..t {
            scores[i][c] = if sd > 0.0 { (col[i] - mean) / sd } else { 0.0 };
        }
    }
    scores
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(|a, b| a.total_cmp(b));
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Deterministic initial state: PCA means, Σ_t = 0.1, unit signal variance,
/// median-heuristic lengthscales (1 on padded components), inducing inputs on a subset of the means.
pub fn initial_state(targets: &[Vec<f64>], config: &LatentSpaceConfig, seed: u64) -> EncoderState {
    let t = targets.len();
    let q = config.latent_dim;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut means = pca_scores(targets, q);
    // Rank-deficient components get a small random spread so tasks are distinguishable.
    let mut padded = vec![false; q];
    for k in 0..q {
        if means.iter().all(|m| m[k] == 0.0) {
            padded[k] = true;
            for m in means.iter_mut() {
                m[k] = 0.01 * rng.sample::<f64, _>(StandardNormal);
            }
        }
    }
    let lengthscales: Vec<f64> = (0..q)
        .map(|k| {
            if padded[k] {
                return 1.0;
            }
            let mut d = Vec::new();
            for i in 0..t {
                for j in 0..i {
                    d.push((means[i][k] - means[j][k]).abs());
                }
            }
            let med = median(d);
            if med > 1e-3 {
                med
            } else {
                1.0
            }
        })
        .collect();
    let m_ind = config.inducing_for(t).clamp(1, t);
    let mut idx: Vec<usize> = (0..t).collect();
    if m_ind < t {
        // partial Fisher–Yates
        for i in 0..m_ind {
            let j = rng.random_range(i..t);
            idx.swap(i, j);
        }
        idx.truncate(m_ind);
        idx.sort_unstable();
    }
    let inducing = idx
        .iter()
        .map(|&i| {
            means[i]
                .iter()
                .map(|v| v + 1e-3 * rng.sample::<f64, _>(StandardNormal))
                .collect()
        })
        .collect();
    EncoderState {
        log_variances: vec![vec![0.1f64.ln(); q]; t],
        means,
        log_signal_variance: 0.0,
        log_lengthscales: lengthscales.iter().map(|l| l.ln()).collect(),
        log_noise_variance: 0.1f64.ln(),
        inducing,
    }
}

/// Trains the encoder on a standardized T×N target matrix.
pub fn train_encoder(
    targets: &[Vec<f64>],
    config: &LatentSpaceConfig,
    seed: u64,
) -> Result<EncoderModel> {
    let t = targets.len();
    if t < 2 {
        return Err(Error::invalid("the encoder needs at least two tasks"));
    }
    let n = targets[0].len();
    if n < 2 {
        return Err(Error::invalid("the encoder needs at least two grid points"));
    }
    if targets.iter().any(|r| r.len() != n) {
        return Err(Error::DimensionMismatch("ragged target matrix".into()));
    }
    if config.latent_dim == 0 {
        return Err(Error::invalid("latent dimension must be >= 1"));
    }
    if let Some(m) = config.inducing_count {
        if m == 0 || m > t {
            return Err(Error::invalid(format!(
                "inducing_count must be in 1..={t}, got {m}"
            )));
        }
    }

    let data = BoundData::new(targets, config.quadrature());
    let init = initial_state(targets, config, seed);
    let opts = LbfgsOptions {
        max_iters: config.max_iters,
        rel_tol: config.rel_tol,
        ..Default::default()
    };
    let outcome = maximize(
        init.pack(),
        |x| {
            let eval = bound_and_gradients(&init.unpack(x), &data)?;
            Ok((eval.value, eval.gradient))
        },
        &opts,
    )?;
    let state = init.unpack(&outcome.x);
    let (lengthscales, clamped) = state.lengthscales();
    log::debug!(
        "encoder: bound {:.4} -> {:.4} in {} steps",
        outcome.trace[0],
        outcome.value,
        outcome.trace.len() - 1
    );
    Ok(EncoderModel {
        config: config.clone(),
        posteriors: state
            .means
            .iter()
            .zip(&state.log_variances)
            .map(|(m, lv)| TaskPosterior {
                mean: m.clone(),
                variance: lv.iter().map(|v| v.exp()).collect(),
            })
            .collect(),
        kernel: Matern52::new(state.signal_variance(), lengthscales),
        noise_variance: state.noise_variance(),
        inducing: state.inducing.clone(),
        bound: outcome.value,
        bound_trace: outcome.trace,
        lengthscale_clamped: clamped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_targets(t: usize, n: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..t)
            .map(|_| {
                let a: f64 = rng.random_range(-1.0..1.0);
                let b: f64 = rng.random_range(-1.0..1.0);
                (0..n)
                    .map(|j| {
                        let x = j as f64 / n as f64;
                        a * (6.0 * x).sin() + b * x + 0.05 * rng.sample::<f64, _>(StandardNormal)
                    })
                    .collect()
            })
            .collect()
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let y = toy_targets(5, 7, 3);
        let config = LatentSpaceConfig {
            latent_dim: 2,
            inducing_count: Some(3),
            quadrature_budget: 25,
            ..Default::default()
        };
        let data = BoundData::new(&y, config.quadrature());
        let mut state = initial_state(&y, &config, 11);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut x = state.pack();
        for v in x.iter_mut() {
            *v += 0.1 * rng.sample::<f64, _>(StandardNormal);
        }
        state = state.unpack(&x);
        let eval = bound_and_gradients(&state, &data).unwrap();
        let h = 1e-5;
        for i in 0..x.len() {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += h;
            xm[i] -= h;
            let fp = bound_and_gradients(&state.unpack(&xp), &data).unwrap().value;
            let fm = bound_and_gradients(&state.unpack(&xm), &data).unwrap().value;
            let fd = (fp - fm) / (2.0 * h);
            let an = eval.gradient[i];
            let rel = (fd - an).abs() / an.abs().max(1.0);
            assert!(rel < 1e-4, "coordinate {i}: analytic {an}, fd {fd}");
        }
    }

    #[test]
    fn initial_bound_is_finite() {
        let y = toy_targets(6, 10, 1);
        let config = LatentSpaceConfig::with_latent_dim(2);
        let data = BoundData::new(&y, config.quadrature());
        let e = bound_and_gradients(&initial_state(&y, &config, 0), &data).unwrap();
        assert!(e.value.is_finite());
        assert!(!e.lengthscale_clamped);
    }

    #[test]
    fn tiny_lengthscale_is_clamped_and_flagged() {
        let y = toy_targets(4, 6, 2);
        let config = LatentSpaceConfig::with_latent_dim(1);
        let data = BoundData::new(&y, config.quadrature());
        let mut s = initial_state(&y, &config, 0);
        s.log_lengthscales[0] = (1e-9f64).ln();
        let e = bound_and_gradients(&s, &data).unwrap();
        assert!(e.lengthscale_clamped);
        assert!(e.value.is_finite());
    }

    #[test]
    fn hyperparameters_beyond_range_have_zero_gradient() {
        let y = toy_targets(4, 6, 2);
        let config = LatentSpaceConfig::with_latent_dim(1);
        let data = BoundData::new(&y, config.quadrature());
        let mut s = initial_state(&y, &config, 0);
        s.log_signal_variance = 20.0;
        s.log_lengthscales[0] = 10.0;
        s.log_noise_variance = 5.0;
        let e = bound_and_gradients(&s, &data).unwrap();
        let g = s.unpack(&e.gradient);
        assert_eq!(g.log_signal_variance, 0.0);
        assert_eq!(g.log_lengthscales[0], 0.0);
        assert_eq!(g.log_noise_variance, 0.0);
        let mut edge = s.clone();
        edge.log_signal_variance = SIGNAL_VARIANCE_RANGE.1.ln();
        edge.log_lengthscales[0] = MAX_LENGTHSCALE.ln();
        edge.log_noise_variance = MAX_NOISE_VARIANCE.ln();
        let at_edge = bound_and_gradients(&edge, &data).unwrap().value;
        assert!((e.value - at_edge).abs() <= 1e-9 * at_edge.abs());
    }

    #[test]
    fn near_linear_task_family_stays_finite() {
        // Tasks are linear in (a², a, 1): the kernel is drawn towards its linear limit.
        let grid: Vec<f64> = (0..24).map(|i| (i as f64 + 0.5) / 24.0).collect();
        let rows: Vec<Vec<f64>> = (0..4)
            .map(|t| {
                let f = crate::tasks::ForresterTask::new(0.1 + 0.2 * t as f64, 0.3).unwrap();
                grid.iter().map(|&x| f.value(x).unwrap()).collect()
            })
            .collect();
        let all: Vec<f64> = rows.iter().flatten().copied().collect();
        let mean = all.iter().sum::<f64>() / all.len() as f64;
        let sd = (all.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / all.len() as f64).sqrt();
        let rows: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|v| (v - mean) / sd).collect()).collect();
        let c = LatentSpaceConfig {
            max_iters: 40,
            ..LatentSpaceConfig::with_latent_dim(2)
        };
        for seed in 0..6 {
            let m = train_encoder(&rows, &c, seed).unwrap();
            assert!(m.bound.is_finite() && m.bound < 1e3, "seed {seed}: {}", m.bound);
        }
    }

    #[test]
    fn training_improves_bound() {
        let y = toy_targets(8, 12, 4);
        let model = train_encoder(&y, &LatentSpaceConfig::with_latent_dim(2), 9).unwrap();
        assert!(model.bound >= model.bound_trace[0]);
        assert!(model.bound_trace.windows(2).all(|w| w[1] >= w[0]));
        assert_eq!(model.posteriors.len(), 8);
        assert!(model
            .posteriors
            .iter()
            .all(|p| p.variance.iter().all(|v| *v > 0.0)));
    }

    #[test]
    fn training_is_deterministic() {
        let y = toy_targets(5, 8, 6);
        let c = LatentSpaceConfig::with_latent_dim(2);
        assert_eq!(train_encoder(&y, &c, 3).unwrap(), train_encoder(&y, &c, 3).unwrap());
    }

    #[test]
    fn rejects_single_task() {
        let y = toy_targets(1, 8, 6);
        assert!(train_encoder(&y, &LatentSpaceConfig::default(), 0).is_err());
    }

    #[test]
    fn degenerate_posterior_returns_mean() {
        let p = TaskPosterior {
            mean: vec![0.3, -1.0],
            variance: vec![0.0, 0.0],
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(sample_latent(&p, &mut rng), p.mean);
    }

    #[test]
    fn latent_draw_moments() {
        let p = TaskPosterior {
            mean: vec![0.5, -2.0],
            variance: vec![0.25, 4.0],
        };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 100_000;
        let mut sum = [0.0; 2];
        for _ in 0..n {
            let h = sample_latent(&p, &mut rng);
            sum[0] += h[0];
            sum[1] += h[1];
        }
        for k in 0..2 {
            let se = (p.variance[k] / n as f64).sqrt();
            assert!((sum[k] / n as f64 - p.mean[k]).abs() < 4.0 * se);
        }
        let mut a = ChaCha8Rng::seed_from_u64(7);
        let mut b = ChaCha8Rng::seed_from_u64(7);
        assert_eq!(sample_latent(&p, &mut a), sample_latent(&p, &mut b));
    }

    fn dist(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
    }

    fn nearest(means: &[Vec<f64>], i: usize) -> usize {
        (0..means.len())
            .filter(|&j| j != i)
            .min_by(|&a, &b| dist(&means[i], &means[a]).total_cmp(&dist(&means[i], &means[b])))
            .unwrap()
    }

    #[test]
    fn duplicated_tasks_are_mutual_nearest_neighbours() {
        let mut y = toy_targets(7, 12, 21);
        y.push(y[2].clone());
        let model = train_encoder(&y, &LatentSpaceConfig::with_latent_dim(2), 4).unwrap();
        let m = model.means();
        assert_eq!(nearest(&m, 2), 7);
        assert_eq!(nearest(&m, 7), 2);
    }

    /// Distance in lengthscale units, the scale the kernel sees.
    fn kernel_dist(model: &EncoderModel, i: usize, j: usize) -> f64 {
        let (a, b) = (&model.posteriors[i].mean, &model.posteriors[j].mean);
        a.iter()
            .zip(b)
            .zip(&model.kernel.lengthscales)
            .map(|((x, y), l)| ((x - y) / l).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    #[test]
    fn identical_pair_collapses() {
        let c = LatentSpaceConfig::with_latent_dim(2);
        for seed in 0..4 {
            let row = toy_targets(1, 10, 8 + seed).remove(0);
            let flipped: Vec<f64> = row.iter().map(|v| -v).collect();
            let model = train_encoder(&[row.clone(), row, flipped], &c, seed).unwrap();
            let (same, other) = (kernel_dist(&model, 0, 1), kernel_dist(&model, 0, 2));
            assert!(same <= 0.1 * other, "seed {seed}: {same} vs {other}");
        }
    }

    #[test]
    fn bound_below_exact_marginal_likelihood() {
        let y = toy_targets(4, 6, 13);
        let config = LatentSpaceConfig {
            latent_dim: 1,
            inducing_count: Some(4),
            ..Default::default()
        };
        let model = train_encoder(&y, &config, 2).unwrap();
        // Dense GP over tasks with latents fixed at the posterior means.
        let means = model.means();
        let t = y.len();
        let n = y[0].len();
        let mut c = DMatrix::zeros(t, t);
        for i in 0..t {
            for j in 0..t {
                let r = (means[i][0] - means[j][0]).abs();
                c[(i, j)] = crate::kernel::matern52(
                    r,
                    model.kernel.variance,
                    model.kernel.lengthscales[0],
                );
            }
            c[(i, i)] += model.noise_variance;
        }
        let chol = c.clone().cholesky().unwrap();
        let logdet: f64 = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        let ymat = DMatrix::from_fn(t, n, |i, j| y[i][j]);
        let quad = (ymat.transpose() * chol.solve(&ymat)).trace();
        let exact = -0.5 * (n as f64) * logdet
            - 0.5 * quad
            - 0.5 * (t * n) as f64 * (2.0 * std::f64::consts::PI).ln();
        assert!(model.bound <= exact, "bound {} exact {}", model.bound, exact);
    }

    #[test]
    fn permuting_tasks_permutes_posteriors() {
        let y = toy_targets(6, 10, 31);
        let perm = [3, 0, 5, 1, 4, 2];
        let yp: Vec<Vec<f64>> = perm.iter().map(|&i| y[i].clone()).collect();
        let c = LatentSpaceConfig::with_latent_dim(2);
        let a = train_encoder(&y, &c, 5).unwrap().means();
        let b = train_encoder(&yp, &c, 5).unwrap().means();
        // Compare pairwise distances, which are invariant to latent rotations.
        let scale = (0..6)
            .flat_map(|i| (0..i).map(move |j| (i, j)))
            .map(|(i, j)| dist(&a[i], &a[j]))
            .fold(0.0, f64::max);
        for i in 0..6 {
            for j in 0..6 {
                let da = dist(&a[perm[i]], &a[perm[j]]);
                let db = dist(&b[i], &b[j]);
                assert!((da - db).abs() <= 0.05 * scale, "({i},{j}): {da} vs {db}");
            }
        }
    }
}
