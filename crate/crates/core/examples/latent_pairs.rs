//! Fits the task encoder to a family where some tasks are observed twice and
//! checks whether each half lands next to its sibling in latent space.
//!
//! cargo run --release --example latent_pairs -- [pairs] [singles] [noise]

use metabench::dataset::normalize_targets;
use metabench::encoder::{train_encoder, LatentSpaceConfig};
use metabench::space::ConfigSpace;
use metabench::synthetic::{sibling_recovery, split_family};

fn main() -> metabench::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let pairs: usize = args.first().and_then(|s| s.parse().ok()).unwrap_or(11);
    let singles: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(7);
    let noise: f64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(0.1);

    let fam = split_family(&ConfigSpace::unit(6), 600, pairs, singles, noise, 2024)?;
    let (y, _) = normalize_targets(&fam.dataset)?;
    let model = train_encoder(&y, &LatentSpaceConfig::default(), 7)?;
    println!("lower bound {:.3} after {} steps", model.bound, model.bound_trace.len() - 1);
    for (t, p) in model.posteriors.iter().enumerate() {
        let m: Vec<String> = p.mean.iter().map(|v| format!("{v:+.3}")).collect();
        let sib = fam.sibling[t].map_or("-".to_string(), |s| s.to_string());
        println!("{:>10} sibling {sib:>3}  [{}]", fam.dataset.task_names[t], m.join(", "));
    }
    println!(
        "sibling recovery: {:.0}%",
        100.0 * sibling_recovery(&model.means(), &fam.sibling)
    );
    Ok(())
}
