use std::collections::{BTreeMap, BTreeSet};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::panic::AssertUnwindSafe;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{cell_seed, list_task_dir};
use crate::error::{Error, Result};
use crate::optimizers::{run_method, Method, OptimizerOptions, Trajectory};
use crate::tasks::{load_task, NoiseMode, Objective, Task};

/// Name of the plan echo inside an archive directory.
pub const PLAN_FILE: &str = "plan.json";

/// What to run: every method on every task, `runs` times.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchPlan {
    pub tasks_dir: PathBuf,
    pub methods: Vec<Method>,
    pub runs: usize,
    /// Budget for every method; `None` uses each method's default.
    pub budget: Option<usize>,
    pub master_seed: u64,
    pub options: OptimizerOptions,
}

impl BenchPlan {
    pub fn new(tasks_dir: impl Into<PathBuf>, methods: Vec<Method>, runs: usize, master_seed: u64) -> Self {
        BenchPlan {
            tasks_dir: tasks_dir.into(),
            methods,
            runs,
            budget: None,
            master_seed,
            options: OptimizerOptions::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            return Err(Error::invalid("runs must be >= 1"));
        }
        if self.methods.is_empty() {
            return Err(Error::invalid("at least one method is required"));
        }
        if self.budget == Some(0) {
            return Err(Error::invalid("budget must be >= 1"));
        }
        let unique: BTreeSet<_> = self.methods.iter().collect();
        if unique.len() != self.methods.len() {
            return Err(Error::invalid("methods must not repeat"));
        }
        Ok(())
    }

    pub fn budget_for(&self, method: Method) -> usize {
        self.budget.unwrap_or_else(|| method.default_budget())
    }
}

#[derive(Serialize, Deserialize)]
struct PlanEcho {
    tool_version: String,
    plan: BenchPlan,
    tasks: Vec<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellStatus {
    Ok,
    Failed,
}

/// One line of a results file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub method: Method,
    pub task: String,
    pub run: usize,
    pub seed: u64,
    pub status: CellStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// True when the failure was numerical (divergence, lost definiteness).
    #[serde(default)]
    pub numerical: bool,
    pub xs: Vec<Vec<f64>>,
    pub ys: Vec<f64>,
    pub incumbent: Vec<f64>,
    /// Noise-free value of the incumbent configuration after each evaluation.
    pub true_incumbent: Vec<f64>,
    pub wall_clock_s: f64,
}

impl CellRecord {
    pub fn key(&self) -> (Method, String, usize) {
        (self.method, self.task.clone(), self.run)
    }

    fn failed(method: Method, task: &str, run: usize, seed: u64, err: String, numerical: bool, secs: f64) -> Self {
        CellRecord {
            method,
            task: task.to_string(),
            run,
            seed,
            status: CellStatus::Failed,
            error: Some(err),
            numerical,
            xs: vec![],
            ys: vec![],
            incumbent: vec![],
            true_incumbent: vec![],
            wall_clock_s: secs,
        }
    }

    /// Checks the record against its task: bounds, lengths, monotone
    /// incumbents and, for noiseless tasks, a reproducible first evaluation.
    pub fn verify(&self, task: &Task) -> Result<()> {
        let n = self.ys.len();
        if self.xs.len() != n || self.incumbent.len() != n || self.true_incumbent.len() != n {
            return Err(Error::Corrupt {
                path: format!("{}/{}/{}", self.method, self.task, self.run),
                message: "trajectory fields have different lengths".into(),
            });
        }
        for x in &self.xs {
            task.space().check(x)?;
        }
        if self.incumbent.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::invalid("incumbent curve increases"));
        }
        let noiseless = match task {
            Task::Forrester(_) => true,
            Task::Surrogate(t) => t.noise == NoiseMode::Noiseless,
        };
        if noiseless && n > 0 && task.evaluate_noiseless(&self.xs[0])? != self.ys[0] {
            return Err(Error::invalid(format!(
                "first evaluation of {}/{}/{} does not reproduce",
                self.method, self.task, self.run
            )));
        }
        Ok(())
    }
}

/// Noise-free value of the observed incumbent after each evaluation.
fn true_incumbent(task: &dyn Objective, traj: &Trajectory) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(traj.len());
    let mut best: Option<(f64, f64)> = None;
    for (x, &y) in traj.xs.iter().zip(&traj.ys) {
        if best.is_none_or(|(b, _)| y < b) {
            best = Some((y, task.evaluate_noiseless(x)?));
        }
        out.push(best.expect("set above").1);
    }
    Ok(out)
}

fn run_cell(plan: &BenchPlan, task: &Task, method: Method, task_id: &str, run: usize) -> CellRecord {
    let seed = cell_seed(plan.master_seed, method.tag(), task_id, run);
    let start = Instant::now();
    let outcome = std::panic::catch_unwind(AssertUnwindSafe(|| -> Result<CellRecord> {
        let mut traj = run_method(method, task, plan.budget_for(method), seed, &plan.options)?;
        traj.task = task_id.to_string();
        let true_inc = true_incumbent(task, &traj)?;
        Ok(CellRecord {
            method,
            task: task_id.to_string(),
            run,
            seed,
            status: CellStatus::Ok,
            error: None,
            numerical: false,
            xs: traj.xs,
            ys: traj.ys,
            incumbent: traj.incumbent,
            true_incumbent: true_inc,
            wall_clock_s: 0.0,
        })
    }));
    let secs = start.elapsed().as_secs_f64();
    match outcome {
        Ok(Ok(mut rec)) => {
            rec.wall_clock_s = secs;
            rec
        }
        Ok(Err(e)) => CellRecord::failed(method, task_id, run, seed, e.to_string(), e.is_numerical(), secs),
        Err(panic) => {
            let msg = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            CellRecord::failed(method, task_id, run, seed, format!("panic: {msg}"), false, secs)
        }
    }
}

pub(crate) fn results_path(dir: &Path, method: Method) -> PathBuf {
    dir.join(format!("{}.jsonl", method.tag()))
}

/// Reads a results file. An unparsable final line (an interrupted write) is skipped.
pub(crate) fn read_results(path: &Path) -> Result<Vec<CellRecord>> {
    if !path.exists() {
        return Ok(vec![]);
    }
    let lines: Vec<String> = BufReader::new(File::open(path)?).lines().collect::<std::io::Result<_>>()?;
    let mut out = Vec::with_capacity(lines.len());
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<CellRecord>(line) {
            Ok(r) => out.push(r),
            Err(e) if i + 1 == lines.len() => {
                log::warn!("{}: dropping truncated last line ({e})", path.display());
            }
            Err(e) => {
                return Err(Error::Corrupt {
                    path: path.display().to_string(),
                    message: format!("line {}: {e}", i + 1),
                })
            }
        }
    }
    Ok(out)
}

/// Latest record per cell, preferring successful ones.
pub(crate) fn merge_records(records: Vec<CellRecord>) -> BTreeMap<(Method, String, usize), CellRecord> {
    let mut map: BTreeMap<_, CellRecord> = BTreeMap::new();
    for r in records {
        let keep_old = map
            .get(&r.key())
            .is_some_and(|old| old.status == CellStatus::Ok && r.status != CellStatus::Ok);
        if !keep_old {
            map.insert(r.key(), r);
        }
    }
    map
}

/// Cuts a partial final line left by an interrupted append.
fn truncate_torn_tail(path: &Path) -> Result<()> {
    if !path.exists() {
        return Ok(());
    }
    let bytes = std::fs::read(path)?;
    if bytes.last().is_some_and(|&b| b != b'\n') {
        let keep = bytes.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
        log::warn!("{}: dropping {} bytes of a torn final line", path.display(), bytes.len() - keep);
        OpenOptions::new().write(true).open(path)?.set_len(keep as u64)?;
    }
    Ok(())
}

pub(crate) fn read_plan(dir: &Path) -> Result<(BenchPlan, Vec<String>)> {
    let path = dir.join(PLAN_FILE);
    let text = std::fs::read_to_string(&path).map_err(|e| {
        Error::Incomplete(format!("{} is not a results archive ({e})", dir.display()))
    })?;
    let echo: PlanEcho = serde_json::from_str(&text).map_err(|e| Error::Corrupt {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    Ok((echo.plan, echo.tasks))
}

/// Outcome of [`run_bench`].
#[derive(Clone, Debug, Default, PartialEq)]
pub struct BenchSummary {
    pub total: usize,
    pub ran: usize,
    /// Cells already complete in the archive.
    pub skipped: usize,
    pub failed: Vec<CellRecord>,
}

impl BenchSummary {
    pub fn any_numerical_failure(&self) -> bool {
        self.failed.iter().any(|r| r.numerical)
    }
}

/// Runs every pending cell of the plan on `workers` threads, appending to
/// `out/<method>.jsonl`. Cells already recorded as successful are skipped, so
/// an interrupted benchmark resumes where it stopped. The files are rewritten
/// sorted by task and run at the end.
pub fn run_bench(plan: &BenchPlan, out: impl AsRef<Path>, workers: usize) -> Result<BenchSummary> {
    plan.validate()?;
    let out = out.as_ref();
    let tasks = list_task_dir(&plan.tasks_dir)?;
    let task_ids: Vec<String> = tasks.iter().map(|(id, _)| id.clone()).collect();
    std::fs::create_dir_all(out)?;

    let plan_path = out.join(PLAN_FILE);
    if plan_path.exists() {
        let (old, old_tasks) = read_plan(out)?;
        if old != *plan || old_tasks != task_ids {
            return Err(Error::invalid(format!(
                "{} holds results of a different plan; use a fresh output directory",
                out.display()
            )));
        }
    } else {
        let echo = PlanEcho {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            plan: plan.clone(),
            tasks: task_ids.clone(),
        };
        std::fs::write(&plan_path, serde_json::to_string_pretty(&echo)?)?;
    }

    let mut done = BTreeSet::new();
    for &m in &plan.methods {
        for r in read_results(&results_path(out, m))? {
            if r.status == CellStatus::Ok {
                done.insert(r.key());
            }
        }
    }

    let mut summary = BenchSummary {
        total: plan.methods.len() * tasks.len() * plan.runs,
        ..Default::default()
    };
    // Pending cells grouped by task so each task file is loaded once.
    let mut pending: Vec<(&str, &Path, Vec<(Method, usize)>)> = Vec::new();
    for (id, path) in &tasks {
        let cells: Vec<(Method, usize)> = plan
            .methods
            .iter()
            .flat_map(|&m| (0..plan.runs).map(move |r| (m, r)))
            .filter(|(m, r)| !done.contains(&(*m, id.clone(), *r)))
            .collect();
        summary.skipped += plan.methods.len() * plan.runs - cells.len();
        if !cells.is_empty() {
            pending.push((id, path, cells));
        }
    }

    let files: BTreeMap<Method, Mutex<File>> = plan
        .methods
        .iter()
        .map(|&m| {
            truncate_torn_tail(&results_path(out, m))?;
            let f = OpenOptions::new().create(true).append(true).open(results_path(out, m))?;
            Ok((m, Mutex::new(f)))
        })
        .collect::<Result<_>>()?;
    let write = |rec: &CellRecord| -> Result<()> {
        let line = serde_json::to_string(rec)?;
        let mut f = files[&rec.method].lock().expect("results file lock");
        writeln!(f, "{line}")?;
        f.flush()?;
        Ok(())
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::invalid(format!("cannot start worker pool: {e}")))?;
    let ran = pool.install(|| {
        pending
            .par_iter()
            .map(|(id, path, cells)| -> Result<usize> {
                let task = match load_task(path) {
                    Ok(t) => t,
                    Err(e) => {
                        for &(m, r) in cells {
                            let seed = cell_seed(plan.master_seed, m.tag(), id, r);
                            write(&CellRecord::failed(m, id, r, seed, format!("loading task: {e}"), false, 0.0))?;
                        }
                        return Ok(cells.len());
                    }
                };
                cells
                    .par_iter()
                    .map(|&(m, r)| {
                        let rec = run_cell(plan, &task, m, id, r);
                        log::debug!(
                            "{m} task {id} run {r}: {}",
                            rec.error.as_deref().unwrap_or("ok")
                        );
                        write(&rec).map(|_| 1)
                    })
                    .sum::<Result<usize>>()
            })
            .sum::<Result<usize>>()
    })?;
    summary.ran = ran;
    drop(files);

    // Compact: one record per cell, in a stable order.
    for &m in &plan.methods {
        let path = results_path(out, m);
        let merged = merge_records(read_results(&path)?);
        let tmp = path.with_extension("jsonl.tmp");
        {
            let mut f = std::io::BufWriter::new(File::create(&tmp)?);
            for rec in merged.values() {
                writeln!(f, "{}", serde_json::to_string(rec)?)?;
            }
            f.flush()?;
        }
        std::fs::rename(&tmp, &path)?;
        summary
            .failed
            .extend(merged.into_values().filter(|r| r.status == CellStatus::Failed));
    }
    Ok(summary)
}
