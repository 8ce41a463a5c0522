use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use metabench::bnn::SghmcConfig;
use metabench::dataset::EvaluationDataset;
use metabench::encoder::LatentSpaceConfig;
use metabench::optimizers::{Method, OptimizerOptions};
use metabench::pipeline::{
    forrester_tasks, ingest_csv, load_model, run_bench, sample_task_dir, save_model, train_model, worker_count,
    write_latent_csv, write_reports, write_task_dir, BenchPlan, ReportOptions, ReportSelection, TrainOptions,
};
use metabench::tasks::{LatentSampling, SamplingOptions};
use metabench::Error;

const EXIT_USAGE: u8 = 1;
const EXIT_DIVERGENCE: u8 = 2;
const EXIT_PARTIAL: u8 = 3;

#[derive(Parser)]
#[command(name = "metabench", version, about = "Benchmark HPO methods on tasks sampled from a meta-model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a dataset from a long-format CSV (task, x_1..x_D, y) and a space JSON.
    Ingest {
        #[arg(long)]
        csv: PathBuf,
        #[arg(long)]
        space: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the task encoder and the Bayesian neural network.
    Train(TrainArgs),
    /// Sample surrogate tasks from a trained model.
    Sample(SampleArgs),
    /// Write Forrester tasks with a, b ~ U[0, 1].
    Forrester {
        #[arg(long, default_value_t = 1000)]
        num: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run methods on every task of a task directory.
    Bench(BenchArgs),
    /// Compute ECDF, rank, U-test and score reports from a results archive.
    Report(ReportArgs),
    /// Export per-task latent posteriors as CSV.
    Latent {
        #[arg(long)]
        model: PathBuf,
        /// Output file; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 5)]
    latent_dim: usize,
    /// Number of kept weight samples.
    #[arg(long, default_value_t = 100)]
    ensemble: usize,
    #[arg(long, default_value_t = 50_000)]
    burnin: usize,
    #[arg(long, default_value_t = 1e-2)]
    step: f64,
    /// SGHMC steps between kept samples.
    #[arg(long, default_value_t = 100)]
    keep_every: usize,
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
    /// Latent draws per datapoint in each minibatch.
    #[arg(long, default_value_t = 10)]
    latent_draws: usize,
    /// Hidden layer widths, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = [500, 500, 500])]
    hidden: Vec<usize>,
    #[arg(long, default_value_t = 1000)]
    encoder_iters: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct SampleArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1000)]
    num: usize,
    /// Add homoscedastic observation noise.
    #[arg(long, conflicts_with = "noiseless")]
    noise: bool,
    /// Deterministic tasks (the default).
    #[arg(long)]
    noiseless: bool,
    /// Draw one noise value per task and reuse it.
    #[arg(long, requires = "noise")]
    fixed_epsilon: bool,
    /// Jitter latents drawn from the training posteriors.
    #[arg(long)]
    pooled: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    tasks: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Method tags, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "rs,de,cmaes,tpe,smac,gp-bo,bnn-bo")]
    methods: Vec<Method>,
    #[arg(long, default_value_t = 20)]
    runs: usize,
    /// Budget for every method (default: 200, or 100 for gp-bo and bnn-bo).
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads; METABENCH_WORKERS takes precedence.
    #[arg(long)]
    workers: Option<usize>,
    /// Shrink the BNN-BO sampler budget tenfold.
    #[arg(long)]
    fast: bool,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    archive: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Task directory, if it moved since the benchmark ran.
    #[arg(long)]
    tasks: Option<PathBuf>,
    #[arg(long)]
    ecdf: bool,
    #[arg(long)]
    ranks: bool,
    #[arg(long)]
    utest: bool,
    #[arg(long)]
    scores: bool,
    #[arg(long, default_value_t = 20)]
    group_size: usize,
    /// Reduce targets to this many quantiles per task.
    #[arg(long)]
    target_quantiles: Option<usize>,
    #[arg(long, default_value_t = 1000)]
    bootstrap: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

enum Failure {
    Error(Error),
    Partial(usize),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Error(e)
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Ingest { csv, space, out } => {
            let ds = ingest_csv(&csv, &space, &out)?;
            log::info!("{} tasks x {} configurations -> {}", ds.num_tasks(), ds.num_points(), out.display());
        }
        Command::Train(a) => {
            let ds = EvaluationDataset::load(&a.dataset)?;
            let opts = TrainOptions {
                latent: LatentSpaceConfig {
                    max_iters: a.encoder_iters,
                    ..LatentSpaceConfig::with_latent_dim(a.latent_dim)
                },
                sghmc: SghmcConfig {
                    step_size: a.step,
                    burn_in: a.burnin,
                    batch_size: a.batch_size,
                    num_samples: a.ensemble,
                    keep_every: a.keep_every,
                    latent_draws: a.latent_draws,
                    ..SghmcConfig::default()
                },
                hidden: a.hidden,
                seed: a.seed,
            };
            log::info!(
                "training: latent-dim {}, burn-in {}, step {:e}, ensemble {}",
                a.latent_dim,
                a.burnin,
                a.step,
                a.ensemble
            );
            let stored = train_model(&ds, &opts)?;
            save_model(&stored, &a.out)?;
        }
        Command::Sample(a) => {
            let stored = load_model(&a.model)?;
            let options = SamplingOptions {
                noisy: a.noise,
                fixed_epsilon: a.fixed_epsilon,
                latent: if a.pooled { LatentSampling::Pooled } else { LatentSampling::Single },
            };
            let files = sample_task_dir(&a.out, &stored, a.num, &options, a.seed)?;
            log::info!("{} tasks -> {}", files.len(), a.out.display());
        }
        Command::Forrester { num, seed, out } => {
            let files = write_task_dir(&out, &forrester_tasks(num, seed)?)?;
            log::info!("{} tasks -> {}", files.len(), out.display());
        }
        Command::Bench(a) => {
            let mut options = OptimizerOptions::default();
            options.bnn.fast = a.fast;
            let plan = BenchPlan {
                budget: a.budget,
                options,
                ..BenchPlan::new(&a.tasks, a.methods, a.runs, a.seed)
            };
            let workers = worker_count(a.workers)?;
            let s = run_bench(&plan, &a.out, workers)?;
            log::info!(
                "{} cells: {} ran, {} already done, {} failed",
                s.total,
                s.ran,
                s.skipped,
                s.failed.len()
            );
            if !s.failed.is_empty() {
                for r in s.failed.iter().take(10) {
                    eprintln!("failed: {} {} run {}: {}", r.method, r.task, r.run, r.error.as_deref().unwrap_or(""));
                }
                return Err(Failure::Partial(s.failed.len()));
            }
        }
        Command::Report(a) => {
            let any = a.ecdf || a.ranks || a.utest || a.scores;
            let selection = if any {
                ReportSelection {
                    ecdf: a.ecdf,
                    ranks: a.ranks,
                    utest: a.utest,
                    scores: a.scores,
                }
            } else {
                ReportSelection::ALL
            };
            let opts = ReportOptions {
                selection,
                group_size: a.group_size,
                target_quantiles: a.target_quantiles,
                bootstrap: a.bootstrap,
                seed: a.seed,
                tasks_dir: a.tasks,
            };
            for f in write_reports(&a.archive, &a.out, &opts)? {
                log::info!("wrote {}", f.display());
            }
        }
        Command::Latent { model, out } => {
            let stored = load_model(&model)?;
            match out {
                Some(p) => write_latent_csv(&stored, std::fs::File::create(p).map_err(Error::from)?)?,
                None => write_latent_csv(&stored, std::io::stdout().lock())?,
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Partial(n)) => {
            eprintln!("error: {n} benchmark cells failed");
            ExitCode::from(EXIT_PARTIAL)
        }
        Err(Failure::Error(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { EXIT_DIVERGENCE } else { EXIT_USAGE })
        }
    }
}
