//! Dense linear-algebra helpers shared by the Gaussian-process code.

use nalgebra::{Cholesky, DMatrix, Dyn};

use crate::error::{Error, Result};

/// Jitter values tried in order when a Cholesky factorization fails.
pub const JITTER_LADDER: [f64; 5] = [1e-8, 1e-7, 1e-6, 1e-5, 1e-4];

/// Cholesky factorization that adds diagonal jitter on failure.
///
/// Returns the factor and the jitter that was added (0 when none was needed).
pub fn cholesky_jittered(m: &DMatrix<f64>) -> Result<(Cholesky<f64, Dyn>, f64)> {
    if let Some(c) = Cholesky::new(m.clone()) {
        return Ok((c, 0.0));
    }
    let scale = mean_diag(m).max(1e-12);
    for &j in &JITTER_LADDER {
        let mut a = m.clone();
        for i in 0..a.nrows() {
            a[(i, i)] += j * scale;
        }
        if let Some(c) = Cholesky::new(a) {
            return Ok((c, j * scale));
        }
    }
    Err(Error::NotPositiveDefinite {
        jitter: JITTER_LADDER[JITTER_LADDER.len() - 1],
    })
}

fn mean_diag(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows().max(1);
    (0..m.nrows()).map(|i| m[(i, i)].abs()).sum::<f64>() / n as f64
}

/// `log |A|` from its Cholesky factor.
pub fn log_det(c: &Cholesky<f64, Dyn>) -> f64 {
    let l = c.l_dirty();
    2.0 * (0..l.nrows()).map(|i| l[(i, i)].ln()).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jitter_rescues_singular_psd() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let (_, j) = cholesky_jittered(&m).unwrap();
        assert!(j > 0.0);
    }

    #[test]
    fn indefinite_fails() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(matches!(
            cholesky_jittered(&m),
            Err(Error::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn log_det_diagonal() {
        let m = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![2.0, 3.0]));
        let c = Cholesky::new(m).unwrap();
        assert!((log_det(&c) - 6f64.ln()).abs() < 1e-14);
    }
}
