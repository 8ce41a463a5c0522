//! Gauss–Hermite rules for expectations under a standard normal.

use nalgebra::{DMatrix, SymmetricEigen};

/// Nodes and weights for `E[f(ξ)]`, `ξ ~ N(0, I_dims)`, as a tensor-product rule.
#[derive(Clone, Debug)]
pub struct GaussHermite {
    pub dims: usize,
    /// Row-major `len × dims` nodes.
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussHermite {
    /// One-dimensional rule with `order` points (Golub–Welsch).
    pub fn univariate(order: usize) -> (Vec<f64>, Vec<f64>) {
        assert!(order >= 1);
        let jacobi = DMatrix::from_fn(order, order, |i, j| {
            if i + 1 == j || j + 1 == i {
                (i.max(j) as f64).sqrt()
            } else {
                0.0
            }
        });
        let eig = SymmetricEigen::new(jacobi);
        let mut pairs: Vec<(f64, f64)> = (0..order)
            .map(|k| (eig.eigenvalues[k], eig.eigenvectors[(0, k)].powi(2)))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let total: f64 = pairs.iter().map(|p| p.1).sum();
        pairs.into_iter().map(|(x, w)| (x, w / total)).unzip()
    }

    /// Tensor-product rule with `order` points per dimension.
    pub fn tensor(dims: usize, order: usize) -> Self {
        let (x1, w1) = Self::univariate(order);
        let len = order.pow(dims as u32);
        let mut nodes = Vec::with_capacity(len * dims);
        let mut weights = Vec::with_capacity(len);
        for idx in 0..len {
            let mut rem = idx;
            let mut w = 1.0;
            for _ in 0..dims {
                let k = rem % order;
                rem /= order;
                nodes.push(x1[k]);
                w *= w1[k];
            }
            weights.push(w);
        }
        GaussHermite {
            dims,
            nodes,
            weights,
        }
    }

    /// Largest per-dimension order whose tensor grid stays within `budget` nodes.
    pub fn with_budget(dims: usize, budget: usize, max_order: usize) -> Self {
        let mut order = 2;
        while order < max_order && (order + 1).pow(dims as u32) <= budget {
            order += 1;
        }
        Self::tensor(dims, order)
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn node(&self, g: usize) -> &[f64] {
        &self.nodes[g * self.dims..(g + 1) * self.dims]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_gaussian_moments() {
        let (x, w) = GaussHermite::univariate(5);
        let m = |p: i32| x.iter().zip(&w).map(|(x, w)| w * x.powi(p)).sum::<f64>();
        assert!((m(0) - 1.0).abs() < 1e-13);
        assert!(m(1).abs() < 1e-13);
        assert!((m(2) - 1.0).abs() < 1e-13);
        assert!((m(4) - 3.0).abs() < 1e-12);
        assert!((m(8) - 105.0).abs() < 1e-9);
    }

    #[test]
    fn tensor_rule_product_moment() {
        let gh = GaussHermite::tensor(2, 4);
        assert_eq!(gh.len(), 16);
        let e: f64 = (0..gh.len())
            .map(|g| gh.weights[g] * gh.node(g)[0].powi(2) * gh.node(g)[1].powi(2))
            .sum();
        assert!((e - 1.0).abs() < 1e-12);
    }

    #[test]
    fn budget_choice() {
        assert_eq!(GaussHermite::with_budget(5, 600, 20).len(), 243);
        assert_eq!(GaussHermite::with_budget(2, 600, 20).len(), 400);
        assert_eq!(GaussHermite::with_budget(1, 600, 20).len(), 20);
    }
}
