//! Turns long-format CSV (`task, x_1.., y`) into an evaluation dataset and
//! prints a per-task summary.
//!
//! cargo run --release --example ingest_csv -- [data.csv space.json]
//!
//! Without arguments, a small SVM-style table is generated in memory.

use metabench::pipeline::parse_csv;
use metabench::space::{ConfigSpace, Dimension};

fn demo_csv() -> String {
    let mut csv = String::from("task,x_1,x_2,y\n");
    for (t, shift) in [("iris", 0.0), ("wine", 0.7), ("digits", -0.4)] {
        for c in [1e-2, 1e-1, 1.0, 1e1, 1e2] {
            for g in [1e-3, 1e-2, 1e-1] {
                let err: f64 = 0.05 + 0.02 * (f64::log10(c) - 1.0 - shift).powi(2) + 0.03 * (f64::log10(g) + 2.0).powi(2);
                csv += &format!("{t},{c},{g},{err}\n");
            }
        }
    }
    csv
}

fn main() -> metabench::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let ds = if let [csv, space] = args.as_slice() {
        let space: ConfigSpace = serde_json::from_str(&std::fs::read_to_string(space)?)?;
        parse_csv(std::fs::File::open(csv)?, &space)?
    } else {
        let space = ConfigSpace::new(vec![Dimension::log("C", 1e-2, 1e2), Dimension::log("gamma", 1e-3, 1e-1)])?;
        parse_csv(demo_csv().as_bytes(), &space)?
    };
    println!("{} tasks on a shared grid of {} configurations", ds.num_tasks(), ds.num_points());
    for (name, y) in ds.task_names.iter().zip(&ds.targets) {
        let (i, best) = y.iter().enumerate().fold((0, f64::INFINITY), |a, (i, v)| if *v < a.1 { (i, *v) } else { a });
        println!("{name:>8}: best {best:.4} at {:?}", ds.grid[i].0);
    }
    Ok(())
}
