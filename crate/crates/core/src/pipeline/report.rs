use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::bench::{merge_records, read_plan, read_results, results_path};
use super::model_file::csv_error;
use super::{BenchPlan, CellRecord, CellStatus};
use crate::assessment::{
    bootstrap_ranking, ecdf, group_means, make_targets, pairwise_utest_matrix, runtime_to_target, score_estimate,
    RuntimeRecord,
};
use crate::error::{Error, Result};
use crate::optimizers::Method;
use crate::sobol::{default_grid_size, sobol_grid};
use crate::tasks::{load_task, Objective, Task};

/// Which reports to write.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ReportSelection {
    pub ecdf: bool,
    pub ranks: bool,
    pub utest: bool,
    pub scores: bool,
}

impl ReportSelection {
    pub const ALL: ReportSelection = ReportSelection {
        ecdf: true,
        ranks: true,
        utest: true,
        scores: true,
    };
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReportOptions {
    pub selection: ReportSelection,
    /// Runs averaged into one U-test sample (within a task).
    pub group_size: usize,
    /// Reduce each task's targets to this many quantiles.
    pub target_quantiles: Option<usize>,
    pub bootstrap: usize,
    pub seed: u64,
    /// Overrides the task directory recorded in the plan.
    pub tasks_dir: Option<PathBuf>,
}

impl Default for ReportOptions {
    fn default() -> Self {
        ReportOptions {
            selection: ReportSelection::ALL,
            group_size: 20,
            target_quantiles: None,
            bootstrap: 1000,
            seed: 0,
            tasks_dir: None,
        }
    }
}

/// A loaded results archive.
#[derive(Clone, Debug)]
pub struct ArchiveView {
    pub plan: BenchPlan,
    pub tasks: Vec<String>,
    pub records: BTreeMap<(Method, String, usize), CellRecord>,
}

impl ArchiveView {
    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let (plan, tasks) = read_plan(dir)?;
        let mut all = Vec::new();
        for &m in &plan.methods {
            all.extend(read_results(&results_path(dir, m))?);
        }
        Ok(ArchiveView {
            plan,
            tasks,
            records: merge_records(all),
        })
    }

    /// Errors unless every (method, task, run) cell has a successful record.
    pub fn check_complete(&self) -> Result<()> {
        if self.records.is_empty() {
            return Err(Error::Incomplete("archive holds no results".into()));
        }
        let mut missing = 0;
        let mut failed = 0;
        let mut example = None;
        for &m in &self.plan.methods {
            for t in &self.tasks {
                for r in 0..self.plan.runs {
                    match self.records.get(&(m, t.clone(), r)) {
                        Some(rec) if rec.status == CellStatus::Ok => {}
                        Some(_) => {
                            failed += 1;
                            example.get_or_insert(format!("{m}/{t}/{r}"));
                        }
                        None => {
                            missing += 1;
                            example.get_or_insert(format!("{m}/{t}/{r}"));
                        }
                    }
                }
            }
        }
        if missing + failed > 0 {
            return Err(Error::Incomplete(format!(
                "{missing} cells missing and {failed} failed (first: {})",
                example.expect("set when counting")
            )));
        }
        Ok(())
    }

    fn runs<'a>(&'a self, m: Method, task: &'a str) -> impl Iterator<Item = &'a CellRecord> + 'a {
        (0..self.plan.runs).map(move |r| &self.records[&(m, task.to_string(), r)])
    }
}

/// Best known value of a task: the analytic minimum for Forrester tasks,
/// otherwise the lowest of the probe grid and every incumbent in the archive.
fn reference_minimum(task: &Task, probe: &[f64], incumbents: impl Iterator<Item = f64>) -> f64 {
    match task {
        Task::Forrester(f) => f.minimum(),
        Task::Surrogate(_) => probe.iter().copied().chain(incumbents).fold(f64::INFINITY, f64::min),
    }
}

fn write_csv(path: &Path, header: &[&str], rows: Vec<Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_error)?;
    w.write_record(header).map_err(csv_error)?;
    for row in rows {
        w.write_record(&row).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

/// Computes the selected reports from a complete archive and writes
/// `ecdf.csv`, `ranks.csv`, `utest.csv` and `scores.csv` into `out`.
///
/// Errors are measured as regret of the noise-free incumbent against the
/// task's reference minimum.
pub fn write_reports(archive: impl AsRef<Path>, out: impl AsRef<Path>, opts: &ReportOptions) -> Result<Vec<PathBuf>> {
    let view = ArchiveView::load(archive)?;
    view.check_complete()?;
    let out = out.as_ref();
    std::fs::create_dir_all(out)?;
    let methods = &view.plan.methods;
    let names: Vec<String> = methods.iter().map(|m| m.tag().to_string()).collect();
    let tasks_dir = opts.tasks_dir.clone().unwrap_or_else(|| view.plan.tasks_dir.clone());
    let sel = opts.selection;

    let mut runtimes: Vec<Vec<RuntimeRecord>> = vec![Vec::new(); methods.len()];
    let mut curves: Vec<Vec<Vec<Vec<f64>>>> = Vec::with_capacity(view.tasks.len());
    let mut finals: Vec<Vec<Vec<f64>>> = vec![Vec::new(); methods.len()];
    for id in &view.tasks {
        let task = load_task(tasks_dir.join(format!("{id}.json")))?;
        let grid: Vec<Vec<f64>> = sobol_grid(task.space(), default_grid_size(task.space()), true)?
            .into_iter()
            .map(|c| c.0)
            .collect();
        let probe = make_targets(&task, &grid, None)?;
        let reference = reference_minimum(
            &task,
            &probe,
            methods
                .iter()
                .flat_map(|&m| view.runs(m, id).filter_map(|r| r.true_incumbent.last().copied())),
        );
        if sel.ecdf {
            let targets = match opts.target_quantiles {
                None => probe,
                Some(_) => make_targets(&task, &grid, opts.target_quantiles)?,
            };
            for (k, &m) in methods.iter().enumerate() {
                for rec in view.runs(m, id) {
                    for &target in &targets {
                        runtimes[k].push(RuntimeRecord {
                            method: m,
                            task: id.clone(),
                            seed: rec.seed,
                            target,
                            runtime: runtime_to_target(&rec.true_incumbent, target),
                        });
                    }
                }
            }
        }
        if sel.ranks {
            curves.push(
                methods
                    .iter()
                    .map(|&m| view.runs(m, id).map(|r| r.true_incumbent.clone()).collect())
                    .collect(),
            );
        }
        for (k, &m) in methods.iter().enumerate() {
            finals[k].push(
                view.runs(m, id)
                    .map(|r| r.true_incumbent.last().copied().unwrap_or(f64::INFINITY) - reference)
                    .collect(),
            );
        }
    }

    let mut written = Vec::new();
    if sel.ecdf {
        let max_budget = methods.iter().map(|&m| view.plan.budget_for(m)).max().unwrap_or(1);
        let budgets: Vec<usize> = (1..=max_budget).collect();
        let mut rows = Vec::new();
        for (k, recs) in runtimes.iter().enumerate() {
            let curve = ecdf(recs, &budgets)?;
            for (b, f) in curve.budgets.iter().zip(&curve.fractions) {
                rows.push(vec![names[k].clone(), b.to_string(), f.to_string()]);
            }
        }
        let path = out.join("ecdf.csv");
        write_csv(&path, &["method", "budget", "fraction"], rows)?;
        written.push(path);
    }
    if sel.ranks {
        let mut rows = Vec::new();
        if methods.len() >= 2 {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            let table = bootstrap_ranking(&names, &curves, opts.bootstrap, &mut rng)?;
            for (k, ranks) in table.ranks.iter().enumerate() {
                for (i, r) in ranks.iter().enumerate() {
                    rows.push(vec![names[k].clone(), (i + 1).to_string(), r.to_string()]);
                }
            }
        } else {
            log::warn!("ranking needs two methods; ranks.csv left empty");
        }
        let path = out.join("ranks.csv");
        write_csv(&path, &["method", "iteration", "avg_rank"], rows)?;
        written.push(path);
    }
    if sel.utest {
        if opts.group_size == 0 || opts.group_size > view.plan.runs {
            return Err(Error::invalid(format!(
                "group size {} must be in 1..={} (runs per task)",
                opts.group_size, view.plan.runs
            )));
        }
        let samples: Vec<Vec<f64>> = finals
            .iter()
            .map(|per_task| per_task.iter().flat_map(|v| group_means(v, opts.group_size)).collect())
            .collect();
        let mut rows = Vec::new();
        if methods.len() >= 2 {
            let m = pairwise_utest_matrix(&names, &samples)?;
            for (r, row) in m.p.iter().enumerate() {
                for (c, p) in row.iter().enumerate() {
                    if let Some(p) = p {
                        rows.push(vec![names[r].clone(), names[c].clone(), p.to_string(), m.orientation.clone()]);
                    }
                }
            }
        }
        let path = out.join("utest.csv");
        write_csv(&path, &["row_method", "col_method", "p_value", "orientation"], rows)?;
        written.push(path);
    }
    if sel.scores {
        let mut rows = Vec::new();
        for (k, per_task) in finals.iter().enumerate() {
            let values: Vec<f64> = per_task.iter().map(|v| v.iter().sum::<f64>() / v.len() as f64).collect();
            let s = score_estimate(&values).ok_or_else(|| Error::Incomplete("no tasks".into()))?;
            rows.push(vec![
                names[k].clone(),
                s.mean.to_string(),
                s.se.map_or(String::new(), |v| v.to_string()),
            ]);
        }
        let path = out.join("scores.csv");
        write_csv(&path, &["method", "mean", "se"], rows)?;
        written.push(path);
    }
    Ok(written)
}

/// Reads `utest.csv` back as `(row, col) → p`.
pub fn read_utest_csv(path: impl AsRef<Path>) -> Result<BTreeMap<(String, String), f64>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_error)?;
    let mut out = BTreeMap::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_error)?;
        let p: f64 = rec[2]
            .parse()
            .map_err(|_| Error::schema("p_value", format!("`{}` is not a number", &rec[2])))?;
        out.insert((rec[0].to_string(), rec[1].to_string()), p);
    }
    Ok(out)
}
