//! Limited-memory BFGS ascent with a backtracking (Armijo) line search.
//!
//! Only steps that increase the objective are accepted, so the returned trace
//! is non-decreasing.

use std::collections::VecDeque;

use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct LbfgsOptions {
    pub max_iters: usize,
    /// Stop once an accepted step improves the objective by less than
    /// `rel_tol * max(|f|, 1)`.
    pub rel_tol: f64,
    pub memory: usize,
    pub max_backtracks: usize,
    /// Largest coordinate change of the first trial point in a line search.
    pub max_step: f64,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        LbfgsOptions {
            max_iters: 1000,
            rel_tol: 1e-6,
            memory: 10,
            max_backtracks: 30,
            max_step: 10.0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct LbfgsOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    /// Objective after initialization and after every accepted step.
    pub trace: Vec<f64>,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Maximizes `f`, which returns the value and its gradient.
pub fn maximize<F>(x0: Vec<f64>, mut f: F, opts: &LbfgsOptions) -> Result<LbfgsOutcome>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    // Internally minimize phi = -f.
    let (v0, g0) = f(&x0)?;
    if !v0.is_finite() || g0.iter().any(|g| !g.is_finite()) {
        return Err(Error::Divergence {
            iteration: 0,
            message: format!("non-finite objective {v0} at initialization"),
        });
    }
    let mut x = x0;
    let mut phi = -v0;
    let mut grad: Vec<f64> = g0.iter().map(|g| -g).collect();
    let mut trace = vec![v0];
    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut converged = false;

    for iter in 1..=opts.max_iters {
        let mut dir = two_loop(&grad, &history);
        let mut slope = dot(&grad, &dir);
        if slope >= 0.0 || !slope.is_finite() {
            history.clear();
            dir = grad.iter().map(|g| -g).collect();
            slope = dot(&grad, &dir);
        }
        if slope.abs() < 1e-300 {
            converged = true;
            break;
        }
        let mut step: f64 = if history.is_empty() {
            (1.0 / dot(&grad, &grad).sqrt()).min(1.0)
        } else {
            1.0
        };
        let largest = dir.iter().fold(0.0_f64, |m, d| m.max(d.abs()));
        step = step.min(opts.max_step / largest);

        let mut accepted = None;
        let mut all_non_finite = true;
        for _ in 0..opts.max_backtracks {
            let trial: Vec<f64> = x.iter().zip(&dir).map(|(xi, di)| xi + step * di).collect();
            if let Ok((v, g)) = f(&trial) {
                if v.is_finite() && g.iter().all(|g| g.is_finite()) {
                    all_non_finite = false;
                    let phi_t = -v;
                    if phi_t <= phi + 1e-4 * step * slope && phi_t < phi {
                        accepted = Some((trial, phi_t, g.iter().map(|g| -g).collect::<Vec<_>>()));
                        break;
                    }
                }
            }
            step *= 0.5;
        }

        let Some((x_new, phi_new, grad_new)) = accepted else {
            if all_non_finite {
                return Err(Error::Divergence {
                    iteration: iter,
                    message: "line search produced only non-finite objectives".into(),
                });
            }
            converged = true;
            break;
        };

        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = grad_new.iter().zip(&grad).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 {
            if history.len() == opts.memory {
                history.pop_front();
            }
            history.push_back((s, y, 1.0 / sy));
        }
        let improvement = phi - phi_new;
        x = x_new;
        phi = phi_new;
        grad = grad_new;
        trace.push(-phi);
        if improvement <= opts.rel_tol * phi.abs().max(1.0) {
            converged = true;
            break;
        }
    }

    Ok(LbfgsOutcome {
        x,
        value: -phi,
        trace,
        converged,
    })
}

fn two_loop(grad: &[f64], history: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mut q = grad.to_vec();
    let mut alphas = Vec::with_capacity(history.len());
    for (s, y, rho) in history.iter().rev() {
        let a = rho * dot(s, &q);
        for (qi, yi) in q.iter_mut().zip(y) {
            *qi -= a * yi;
        }
        alphas.push(a);
    }
    if let Some((s, y, _)) = history.back() {
        let gamma = dot(s, y) / dot(y, y);
        for qi in q.iter_mut() {
            *qi *= gamma;
        }
    }
    for ((s, y, rho), a) in history.iter().zip(alphas.iter().rev()) {
        let b = rho * dot(y, &q);
        for (qi, si) in q.iter_mut().zip(s) {
            *qi += (a - b) * si;
        }
    }
    q.iter().map(|v| -v).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn maximizes_negative_rosenbrock() {
        let f = |x: &[f64]| {
            let (a, b) = (x[0], x[1]);
            let v = -((1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2));
            let g = vec![
                2.0 * (1.0 - a) + 400.0 * a * (b - a * a),
                -200.0 * (b - a * a),
            ];
            Ok((v, g))
        };
        let opts = LbfgsOptions {
            rel_tol: 1e-14,
            ..Default::default()
        };
        let out = maximize(vec![-1.2, 1.0], f, &opts).unwrap();
        assert!((out.x[0] - 1.0).abs() < 1e-4, "{:?}", out.x);
        assert!(out.trace.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn non_finite_start_is_divergence() {
        let f = |_: &[f64]| Ok((f64::NAN, vec![0.0]));
        assert!(matches!(
            maximize(vec![0.0], f, &LbfgsOptions::default()),
            Err(Error::Divergence { iteration: 0, .. })
        ));
    }
}
