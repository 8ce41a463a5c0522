//! Benchmarks a few optimizers on Forrester tasks and writes all reports.
//!
//! cargo run --release --example bench_and_report -- [out_dir] [tasks] [runs]
//!
//! Rerunning with the same directory resumes the archive instead of redoing
//! finished cells.

use std::path::PathBuf;

use metabench::optimizers::Method;
use metabench::pipeline::{
    forrester_tasks, run_bench, worker_count, write_reports, write_task_dir, BenchPlan, ReportOptions,
};

fn main() -> metabench::Result<()> {
    env_logger::init();
    let args: Vec<String> = std::env::args().skip(1).collect();
    let out = PathBuf::from(args.first().map_or("bench-demo", String::as_str));
    let tasks: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(10);
    let runs: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(20);

    let tasks_dir = out.join("tasks");
    if !tasks_dir.exists() {
        write_task_dir(&tasks_dir, &forrester_tasks(tasks, 1)?)?;
    }
    let methods = vec![Method::RandomSearch, Method::DifferentialEvolution, Method::Tpe, Method::SmacLite];
    let mut plan = BenchPlan::new(&tasks_dir, methods, runs, 7);
    plan.budget = Some(50);
    let summary = run_bench(&plan, out.join("archive"), worker_count(None)?)?;
    println!(
        "{} cells: {} ran, {} already archived, {} failed",
        summary.total,
        summary.ran,
        summary.skipped,
        summary.failed.len()
    );

    let opts = ReportOptions {
        tasks_dir: Some(tasks_dir),
        group_size: runs.min(20),
        ..ReportOptions::default()
    };
    for path in write_reports(out.join("archive"), out.join("report"), &opts)? {
        println!("wrote {}", path.display());
    }
    print!("{}", std::fs::read_to_string(out.join("report").join("scores.csv"))?);
    Ok(())
}
