//! Fully connected tanh network with a mean head and a homoscedastic noise scalar.
//!
//! Parameters live in one flat vector. Each layer stores its `out × in` weight
//! matrix column-major followed by its `out` biases; the last entry is `ρ`,
//! with noise variance `σ̂² = softplus(ρ)`.

use nalgebra::{DMatrix, DMatrixView, DVector, DVectorView};
use serde::{Deserialize, Serialize};

use super::activation::tanh_in_place;
use crate::error::{Error, Result};

const LOG_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetArchitecture {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
}

impl NetArchitecture {
    pub fn new(input_dim: usize, hidden: Vec<usize>) -> Result<Self> {
        if input_dim == 0 || hidden.iter().any(|&h| h == 0) {
            return Err(Error::invalid("layer sizes must be positive"));
        }
        Ok(NetArchitecture { input_dim, hidden })
    }

    /// Three hidden layers of 500 units: the meta-model network.
    pub fn meta(input_dim: usize) -> Self {
        NetArchitecture {
            input_dim,
            hidden: vec![500; 3],
        }
    }

    /// Three hidden layers of 50 units: the BNN-BO surrogate.
    pub fn small(input_dim: usize) -> Self {
        NetArchitecture {
            input_dim,
            hidden: vec![50; 3],
        }
    }

    /// `(in, out)` for every affine layer including the output layer.
    pub fn layers(&self) -> Vec<(usize, usize)> {
        let mut sizes = vec![self.input_dim];
        sizes.extend(&self.hidden);
        sizes.push(1);
        sizes.windows(2).map(|w| (w[0], w[1])).collect()
    }

    /// Total parameter count including `ρ`.
    pub fn num_params(&self) -> usize {
        self.layers().iter().map(|(i, o)| i * o + o).sum::<usize>() + 1
    }

    pub fn rho_index(&self) -> usize {
        self.num_params() - 1
    }

    /// Random initialization: weights ~ N(0, 1/fan_in), zero biases, `ρ` giving σ̂² = 1e-3.
    pub fn init<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut theta = Vec::with_capacity(self.num_params());
        for (i, o) in self.layers() {
            let sd = (1.0 / i as f64).sqrt();
            for _ in 0..i * o {
                theta.push(sd * rng.sample::<f64, _>(rand_distr::StandardNormal));
            }
            theta.extend(std::iter::repeat_n(0.0, o));
        }
        theta.push(inverse_softplus(1e-3));
        theta
    }
}

pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

pub fn inverse_softplus(y: f64) -> f64 {
    if y > 30.0 {
        y
    } else {
        y.exp_m1().ln()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// A network bound to one parameter vector.
#[derive(Clone, Copy, Debug)]
pub struct Network<'a> {
    pub arch: &'a NetArchitecture,
    pub theta: &'a [f64],
}

impl<'a> Network<'a> {
    pub fn new(arch: &'a NetArchitecture, theta: &'a [f64]) -> Result<Self> {
        if theta.len() != arch.num_params() {
            return Err(Error::DimensionMismatch(format!(
                "weight vector has {} entries, architecture needs {}",
                theta.len(),
                arch.num_params()
            )));
        }
        Ok(Network { arch, theta })
    }

    fn layer_views(&self) -> Vec<(DMatrixView<'a, f64>, DVectorView<'a, f64>)> {
        let mut o = 0;
        self.arch
            .layers()
            .into_iter()
            .map(|(i, out)| {
                let w = DMatrixView::from_slice(&self.theta[o..o + i * out], out, i);
                o += i * out;
                let b = DVectorView::from_slice(&self.theta[o..o + out], out);
                o += out;
                (w, b)
            })
            .collect()
    }

    pub fn noise_variance(&self) -> f64 {
        softplus(self.theta[self.arch.rho_index()])
    }

    /// Mean prediction for one input vector `[x_norm, h]`.
    pub fn mean(&self, input: &[f64]) -> f64 {
        let layers = self.layer_views();
        let mut a = DVector::from_column_slice(input);
        let last = layers.len() - 1;
        for (k, (w, b)) in layers.into_iter().enumerate() {
            let mut z = b.clone_owned();
            z.gemv(1.0, &w, &a, 1.0);
            if k < last {
                tanh_in_place(z.as_mut_slice());
            }
            a = z;
        }
        a[0]
    }

    /// `(μ̂, σ̂²)` for one input.
    pub fn forward(&self, input: &[f64]) -> (f64, f64) {
        (self.mean(input), self.noise_variance())
    }

    /// Mean predictions for the columns of `inputs` (`input_dim × R`).
    pub fn mean_batch(&self, inputs: &DMatrix<f64>) -> Vec<f64> {
        let layers = self.layer_views();
        let last = layers.len() - 1;
        let mut a = inputs.clone();
        for (k, (w, b)) in layers.into_iter().enumerate() {
            let mut z = &w * &a;
            for mut col in z.column_iter_mut() {
                col += &b;
            }
            if k < last {
                tanh_in_place(z.as_mut_slice());
            }
            a = z;
        }
        a.row(0).iter().copied().collect()
    }
}

/// Rows of training data: each column of `inputs` is `[x_norm, h]`.
///
/// When every datapoint appears with `H` latent draws, the mean over rows
/// equals the per-datapoint average over draws.
#[derive(Clone, Debug)]
pub struct Rows {
    pub inputs: DMatrix<f64>,
    pub targets: Vec<f64>,
    /// Rows per datapoint; only used to report the offending datapoint.
    pub draws_per_point: usize,
}

/// Gaussian prior `N(0, prior_var)` on every parameter.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Prior {
    pub variance: f64,
}

impl Default for Prior {
    fn default() -> Self {
        Prior { variance: 1.0 }
    }
}

/// Mean Gaussian log-likelihood over `rows` plus `log prior / n_data`, with its gradient.
pub fn log_posterior_and_grad(
    net: &Network,
    rows: &Rows,
    prior: Prior,
    n_data: usize,
) -> Result<(f64, Vec<f64>)> {
    let layers = net.layer_views();
    let nl = layers.len();
    let r = rows.targets.len();
    let rho = net.theta[net.arch.rho_index()];
    let s2 = softplus(rho);

    let mut acts = Vec::with_capacity(nl);
    acts.push(rows.inputs.clone());
    for (k, (w, b)) in layers.iter().enumerate() {
        let mut z = w * &acts[k];
        for mut col in z.column_iter_mut() {
            col += b;
        }
        if k + 1 < nl {
            tanh_in_place(z.as_mut_slice());
        }
        acts.push(z);
    }
    let mu = &acts[nl];

    let c = 1.0 / r as f64;
    let mut value = 0.0;
    let mut delta = DMatrix::zeros(1, r);
    let mut g_s2 = 0.0;
    for i in 0..r {
        let m = mu[(0, i)];
        if !m.is_finite() {
            return Err(Error::NonFinite {
                index: i / rows.draws_per_point.max(1),
            });
        }
        let e = rows.targets[i] - m;
        value += c * (-0.5 * LOG_2PI - 0.5 * s2.ln() - 0.5 * e * e / s2);
        delta[(0, i)] = c * e / s2;
        g_s2 += c * (-0.5 / s2 + 0.5 * e * e / (s2 * s2));
    }

    let mut grad = vec![0.0; net.theta.len()];
    let offsets: Vec<usize> = net
        .arch
        .layers()
        .iter()
        .scan(0, |o, (i, out)| {
            let here = *o;
            *o += i * out + out;
            Some(here)
        })
        .collect();
    for k in (0..nl).rev() {
        let (w, _) = &layers[k];
        let (out, inp) = w.shape();
        let gw = &delta * acts[k].transpose();
        let o = offsets[k];
        grad[o..o + inp * out].copy_from_slice(gw.as_slice());
        for j in 0..out {
            grad[o + inp * out + j] = delta.row(j).sum();
        }
        if k > 0 {
            let mut d = w.transpose() * &delta;
            d.zip_apply(&acts[k], |dv, a| *dv *= 1.0 - a * a);
            delta = d;
        }
    }
    grad[net.arch.rho_index()] = g_s2 * sigmoid(rho);

    let inv_n = 1.0 / n_data.max(1) as f64;
    let p = net.theta.len() as f64;
    let sq: f64 = net.theta.iter().map(|t| t * t).sum();
    value += inv_n * (-0.5 * sq / prior.variance - 0.5 * p * (LOG_2PI + prior.variance.ln()));
    for (g, t) in grad.iter_mut().zip(net.theta) {
        *g -= inv_n * t / prior.variance;
    }
    if !value.is_finite() {
        return Err(Error::NonFinite { index: 0 });
    }
    Ok((value, grad))
}
