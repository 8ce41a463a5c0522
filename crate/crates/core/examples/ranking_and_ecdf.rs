//! Assessment tools on hand-made incumbent curves: bootstrap ranking,
//! runtime ECDFs and the pairwise U-test matrix.
//!
//! cargo run --release --example ranking_and_ecdf

use metabench::assessment::{
    bootstrap_ranking, ecdf, group_means, pairwise_utest_matrix, runtime_to_target, RuntimeRecord, ORIENTATION,
};
use metabench::optimizers::Method;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Incumbent curve that decays towards zero at `rate`, with multiplicative noise.
fn curve(rate: f64, len: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut best = f64::INFINITY;
    (0..len)
        .map(|i| {
            let y = (-rate * i as f64).exp() * rng.random_range(0.5..1.5);
            best = best.min(y);
            best
        })
        .collect()
}

fn main() -> metabench::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let methods = [(Method::RandomSearch, 0.03), (Method::Tpe, 0.06), (Method::GpBo, 0.1)];
    let names: Vec<String> = methods.iter().map(|(m, _)| m.tag().to_string()).collect();
    let (tasks, runs, len) = (5, 40, 50);

    // curves[task][method][run]
    let curves: Vec<Vec<Vec<Vec<f64>>>> = (0..tasks)
        .map(|_| methods.iter().map(|(_, r)| (0..runs).map(|_| curve(*r, len, &mut rng)).collect()).collect())
        .collect();

    let table = bootstrap_ranking(&names, &curves, 500, &mut rng)?;
    println!("average rank after 10 / 25 / 50 evaluations");
    for (name, r) in names.iter().zip(&table.ranks) {
        println!("  {name:<6} {:.2} {:.2} {:.2}", r[9], r[24], r[49]);
    }

    let budgets: Vec<usize> = (1..=len).collect();
    println!("fraction of runs reaching 0.1 within 20 / 50 evaluations");
    for (k, (m, _)) in methods.iter().enumerate() {
        let records: Vec<RuntimeRecord> = (0..tasks)
            .flat_map(|t| {
                curves[t][k].iter().enumerate().map(move |(s, c)| RuntimeRecord {
                    method: *m,
                    task: t.to_string(),
                    seed: s as u64,
                    target: 0.1,
                    runtime: runtime_to_target(c, 0.1),
                })
            })
            .collect();
        let e = ecdf(&records, &budgets)?;
        println!("  {:<6} {:.2} {:.2}", m.tag(), e.fractions[19], e.fractions[49]);
    }

    let finals: Vec<Vec<f64>> = (0..methods.len())
        .map(|k| {
            let all: Vec<f64> = curves.iter().flat_map(|t| t[k].iter().map(|c| c[len - 1])).collect();
            group_means(&all, 20)
        })
        .collect();
    let m = pairwise_utest_matrix(&names, &finals)?;
    println!("{ORIENTATION}");
    for (row, ps) in names.iter().zip(&m.p) {
        let cells: Vec<String> = ps.iter().map(|p| p.map_or("    -   ".into(), |p| format!("{p:.2e}"))).collect();
        println!("  {row:<6} {}", cells.join(" "));
    }
    Ok(())
}
