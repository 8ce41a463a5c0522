//! Runs every optimizer that supports one-dimensional problems on a single
//! Forrester task and prints the final regret and wall-clock time.
//!
//! cargo run --release --example compare_methods -- [a] [b] [seed]

use std::time::Instant;

use metabench::optimizers::{run_method, Method, OptimizerOptions};
use metabench::tasks::ForresterTask;

fn main() -> metabench::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let arg = |i: usize, default: f64| args.get(i).and_then(|s| s.parse().ok()).unwrap_or(default);
    let task = ForresterTask::new(arg(0, 0.7), arg(1, 0.9))?;
    let seed = arg(2, 1.0) as u64;
    let best = task.minimum();

    let mut options = OptimizerOptions::default();
    options.bnn.fast = true;
    println!("Forrester a={} b={}  minimum {best:.6}", task.a, task.b);
    println!("{:<8} {:>12} {:>10}", "method", "regret", "seconds");
    for method in Method::ALL {
        if method == Method::CmaEs {
            continue;
        }
        let start = Instant::now();
        let traj = run_method(method, &task, 50, seed, &options)?;
        println!(
            "{:<8} {:>12.3e} {:>10.3}",
            method.tag(),
            traj.best() - best,
            start.elapsed().as_secs_f64()
        );
    }
    Ok(())
}
