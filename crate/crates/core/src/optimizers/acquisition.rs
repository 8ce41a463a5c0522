use rand::Rng;
use rand_distr::StandardNormal;
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

/// Expected improvement below `y_best` for a Gaussian prediction `N(mu, sigma²)`.
pub fn expected_improvement(mu: f64, sigma: f64, y_best: f64) -> f64 {
    let diff = y_best - mu;
    if !(sigma > 0.0) {
        return diff.max(0.0);
    }
    let z = diff / sigma;
    let n = Normal::standard();
    (diff * n.cdf(z) + sigma * n.pdf(z)).max(0.0)
}

/// `total` candidates: 70% uniform in the unit cube, the rest Gaussian
/// (std `local_std`) around `center`, clipped to the cube.
pub fn local_and_uniform_candidates<R: Rng + ?Sized>(
    center: &[f64],
    total: usize,
    local_std: f64,
    rng: &mut R,
) -> Vec<Vec<f64>> {
    let uniform = total * 7 / 10;
    let d = center.len();
    let mut out = Vec::with_capacity(total);
    for _ in 0..uniform {
        out.push((0..d).map(|_| rng.random::<f64>()).collect());
    }
    for _ in uniform..total {
        out.push(
            center
                .iter()
                .map(|c| (c + local_std * rng.sample::<f64, _>(StandardNormal)).clamp(0.0, 1.0))
                .collect(),
        );
    }
    out
}
