//! Samples a correlated 2-D Gaussian with SGHMC and prints the sample moments.
//!
//! cargo run --release --example sghmc_gaussian -- [rho] [samples]

use metabench::bnn::{sghmc_sample, SghmcConfig};

fn main() -> metabench::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let rho: f64 = args.first().and_then(|s| s.parse().ok()).unwrap_or(0.5);
    let samples: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(100_000);
    let config = SghmcConfig {
        step_size: 0.1,
        burn_in: 2_000,
        friction: 0.05,
        num_samples: samples,
        keep_every: 10,
        ..SghmcConfig::default()
    };
    // Gradient of the negative log density, Σ⁻¹θ.
    let det = 1.0 - rho * rho;
    let grad = |t: &[f64], _: &mut _| Ok(vec![(t[0] - rho * t[1]) / det, (t[1] - rho * t[0]) / det]);
    let out = sghmc_sample(vec![0.0, 0.0], grad, &config, 1.0, 7)?;

    let n = out.len() as f64;
    let mean = [0, 1].map(|k| out.iter().map(|s| s[k]).sum::<f64>() / n);
    let cov = |a: usize, b: usize| out.iter().map(|s| (s[a] - mean[a]) * (s[b] - mean[b])).sum::<f64>() / n;
    println!("mean        [{:.4}, {:.4}]", mean[0], mean[1]);
    println!("covariance  [[{:.4}, {:.4}], [{:.4}, {:.4}]]", cov(0, 0), cov(0, 1), cov(1, 0), cov(1, 1));
    println!("target      [[1, {rho}], [{rho}, 1]]");
    Ok(())
}
