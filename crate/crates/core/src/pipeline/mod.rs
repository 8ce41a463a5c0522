//! File formats and the end-to-end pipeline behind the command-line tool:
//! ingest, train, sample, bench and report.

mod bench;
mod ingest;
mod model_file;
mod report;

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::bnn::{train_meta_model, NetArchitecture, SghmcConfig};
use crate::dataset::{normalize_targets, EvaluationDataset};
use crate::encoder::{train_encoder, LatentSpaceConfig};
use crate::error::{Error, Result};
use crate::tasks::{forrester_family, sample_task, save_task, SamplingOptions, Task};

pub use bench::{run_bench, BenchPlan, BenchSummary, CellRecord, CellStatus, PLAN_FILE};
pub use ingest::{ingest_csv, parse_csv};
pub use model_file::{load_model, save_model, write_latent_csv, StoredModel, MODEL_FILE_VERSION};
pub use report::{read_utest_csv, write_reports, ArchiveView, ReportOptions, ReportSelection};

/// Environment variable that overrides the benchmark worker count.
pub const WORKERS_ENV: &str = "METABENCH_WORKERS";

/// Stable child seed: the first 8 bytes (little endian) of SHA-256 over
/// `"{master}|{label}"`.
pub fn child_seed(master: u64, label: &str) -> u64 {
    let digest = Sha256::digest(format!("{master}|{label}").as_bytes());
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

/// Seed of one benchmark cell.
pub fn cell_seed(master: u64, method: &str, task: &str, run: usize) -> u64 {
    child_seed(master, &format!("{method}|{task}|{run}"))
}

/// Worker count: `METABENCH_WORKERS` if set, else `requested`, else the
/// number of available cores.
pub fn worker_count(requested: Option<usize>) -> Result<usize> {
    if let Ok(v) = std::env::var(WORKERS_ENV) {
        return match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => Err(Error::invalid(format!("{WORKERS_ENV} must be a positive integer, got `{v}`"))),
        };
    }
    match requested {
        Some(0) => Err(Error::invalid("worker count must be >= 1")),
        Some(n) => Ok(n),
        None => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

/// Settings for training a meta-model from a dataset.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainOptions {
    pub latent: LatentSpaceConfig,
    pub sghmc: SghmcConfig,
    /// Hidden layer widths of the BNN.
    pub hidden: Vec<usize>,
    pub seed: u64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            latent: LatentSpaceConfig::default(),
            sghmc: SghmcConfig::default(),
            hidden: vec![500; 3],
            seed: 0,
        }
    }
}

/// Trains the task encoder on the standardized targets, then the BNN on
/// `(x, h)` inputs.
pub fn train_model(dataset: &EvaluationDataset, opts: &TrainOptions) -> Result<StoredModel> {
    dataset.validate()?;
    let (z, _) = normalize_targets(dataset)?;
    let encoder = train_encoder(&z, &opts.latent, opts.seed)?;
    log::info!(
        "encoder: lower bound {:.4} after {} iterations{}",
        encoder.bound,
        encoder.bound_trace.len().saturating_sub(1),
        if encoder.lengthscale_clamped { " (lengthscale clamped)" } else { "" }
    );
    let arch = NetArchitecture::new(dataset.space.len() + opts.latent.latent_dim, opts.hidden.clone())?;
    let model = train_meta_model(dataset, &encoder, &arch, &opts.sghmc, opts.seed)?;
    let noise: Vec<f64> = (0..model.num_samples()).map(|i| model.network(i).noise_variance()).collect();
    log::info!(
        "sghmc: {} steps, {} samples kept, mean noise variance {:.4e}",
        opts.sghmc.total_steps(),
        model.num_samples(),
        noise.iter().sum::<f64>() / noise.len() as f64
    );
    Ok(StoredModel {
        model,
        task_names: dataset.task_names.clone(),
        sghmc: opts.sghmc.clone(),
    })
}

/// Samples `num` tasks into `dir`; task `i` uses the child seed `"task|i"`.
pub fn sample_task_dir(
    dir: impl AsRef<Path>,
    stored: &StoredModel,
    num: usize,
    options: &SamplingOptions,
    seed: u64,
) -> Result<Vec<PathBuf>> {
    if num == 0 {
        return Err(Error::invalid("number of tasks must be >= 1"));
    }
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    (0..num)
        .map(|i| {
            let task = sample_task(&stored.model, options, i, child_seed(seed, &format!("task|{i}")))?;
            let path = dir.join(task_file_name(i, num));
            save_task(&Task::Surrogate(task), &path)?;
            Ok(path)
        })
        .collect()
}

/// `num` Forrester tasks drawn with `ChaCha8Rng::seed_from_u64(seed)`.
pub fn forrester_tasks(num: usize, seed: u64) -> Result<Vec<Task>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(forrester_family(num, &mut rng)?.into_iter().map(Task::Forrester).collect())
}

fn task_file_name(index: usize, total: usize) -> String {
    let width = total.saturating_sub(1).to_string().len().max(4);
    format!("{index:0width$}.json")
}

/// Writes `tasks` as `dir/NNNN.json`, creating `dir` if needed.
pub fn write_task_dir(dir: impl AsRef<Path>, tasks: &[Task]) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    tasks
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let path = dir.join(task_file_name(i, tasks.len()));
            save_task(t, &path)?;
            Ok(path)
        })
        .collect()
}

/// Task files of a directory as `(id, path)`, sorted by id. The id is the file stem.
pub fn list_task_dir(dir: impl AsRef<Path>) -> Result<Vec<(String, PathBuf)>> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir.as_ref())? {
        let path = entry?.path();
        if path.extension().is_some_and(|e| e == "json") {
            let id = path
                .file_stem()
                .and_then(|s| s.to_str())
                .ok_or_else(|| Error::invalid(format!("non-UTF-8 task file name {}", path.display())))?
                .to_string();
            out.push((id, path));
        }
    }
    out.sort();
    if out.is_empty() {
        return Err(Error::invalid(format!("no task files in {}", dir.as_ref().display())));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tasks::{load_task, ForresterTask};

    #[test]
    fn child_seeds_are_stable_and_distinct() {
        // sha256("7|rs|0003|1") = dbba9a5199b0e90c..., read little endian.
        let s = cell_seed(7, "rs", "0003", 1);
        assert_eq!(s, 930_468_970_574_297_819);
        assert_eq!(s, child_seed(7, "rs|0003|1"));
        assert_ne!(s, cell_seed(7, "rs", "0003", 2));
        assert_ne!(s, cell_seed(7, "de", "0003", 1));
        assert_ne!(s, cell_seed(8, "rs", "0003", 1));
    }

    #[test]
    fn file_names_pad_to_four() {
        assert_eq!(task_file_name(3, 9), "0003.json");
        assert_eq!(task_file_name(3, 1000), "0003.json");
        assert_eq!(task_file_name(12, 20000), "00012.json");
    }

    #[test]
    fn task_dir_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let tasks: Vec<Task> = (0..3)
            .map(|i| Task::Forrester(ForresterTask::new(i as f64 / 4.0, 0.5).unwrap()))
            .collect();
        write_task_dir(dir.path(), &tasks).unwrap();
        let listed = list_task_dir(dir.path()).unwrap();
        assert_eq!(listed.iter().map(|(id, _)| id.as_str()).collect::<Vec<_>>(), ["0000", "0001", "0002"]);
        assert_eq!(load_task(&listed[2].1).unwrap(), tasks[2]);
    }

    #[test]
    fn empty_task_dir_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(list_task_dir(dir.path()).is_err());
    }
}
