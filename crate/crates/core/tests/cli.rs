use std::path::Path;
use std::process::{Command, Output};

use metabench::sobol::sobol_unit;
use metabench::tasks::ForresterTask;

fn metabench(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_metabench"))
        .args(args)
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .env_remove("METABENCH_WORKERS")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

/// Long-format CSV of `tasks` Forrester functions on a shared Sobol grid.
fn write_forrester_csv(dir: &Path, tasks: usize) {
    let grid = sobol_unit(1, 24, true).unwrap();
    let mut csv = String::from("task,x_1,y\n");
    for t in 0..tasks {
        let f = ForresterTask::new(0.1 + 0.8 * t as f64 / tasks as f64, 0.3).unwrap();
        for x in &grid {
            csv += &format!("t{t},{},{}\n", x[0], f.value(x[0]).unwrap());
        }
    }
    std::fs::write(dir.join("data.csv"), csv).unwrap();
    std::fs::write(
        dir.join("space.json"),
        r#"{"dims":[{"name":"x","lower":0,"upper":1,"log":false}]}"#,
    )
    .unwrap();
}

const TINY_TRAIN: &[&str] = &[
    "--latent-dim",
    "2",
    "--ensemble",
    "3",
    "--burnin",
    "60",
    "--keep-every",
    "5",
    "--hidden",
    "8,8",
    "--encoder-iters",
    "40",
    "--batch-size",
    "8",
    "--latent-draws",
    "2",
    "--seed",
    "4",
];

#[test]
fn model_pipeline_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write_forrester_csv(d, 4);
    let out = metabench(d, &["ingest", "--csv", "data.csv", "--space", "space.json", "--out", "ds.json"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    for name in ["m1.json", "m2.json"] {
        let mut args = vec!["train", "--dataset", "ds.json", "--out", name];
        args.extend_from_slice(TINY_TRAIN);
        let out = metabench(d, &args);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    }
    assert_eq!(std::fs::read(d.join("m1.json")).unwrap(), std::fs::read(d.join("m2.json")).unwrap());

    let out = metabench(d, &["latent", "--model", "m1.json"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("task,m_1,m_2,v_1,v_2\n"));
    assert_eq!(text.lines().count(), 5);

    for dir_name in ["s1", "s2"] {
        let out = metabench(d, &["sample", "--model", "m1.json", "--out", dir_name, "--num", "5", "--seed", "2"]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    }
    for i in 0..5 {
        let f = format!("{i:04}.json");
        assert_eq!(
            std::fs::read(d.join("s1").join(&f)).unwrap(),
            std::fs::read(d.join("s2").join(&f)).unwrap()
        );
    }
}

#[test]
fn single_task_dataset_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write_forrester_csv(d, 1);
    metabench(d, &["ingest", "--csv", "data.csv", "--space", "space.json", "--out", "ds.json"]);
    let mut args = vec!["train", "--dataset", "ds.json", "--out", "m.json"];
    args.extend_from_slice(TINY_TRAIN);
    let out = metabench(d, &args);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("two tasks"));
}

#[test]
fn divergent_training_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write_forrester_csv(d, 3);
    metabench(d, &["ingest", "--csv", "data.csv", "--space", "space.json", "--out", "ds.json"]);
    let mut args = vec!["train", "--dataset", "ds.json", "--out", "m.json"];
    args.extend_from_slice(TINY_TRAIN);
    args.extend_from_slice(&["--step", "1e4"]);
    let out = metabench(d, &args);
    assert_eq!(code(&out), 2, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn usage_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(&metabench(d, &["bench", "--tasks", "t", "--out", "a", "--methods", "sgd"])), 1);
    assert_eq!(code(&metabench(d, &["frobnicate"])), 1);
    assert_eq!(code(&metabench(d, &["report", "--archive", "nowhere", "--out", "r"])), 1);
    assert_eq!(code(&metabench(d, &["--help"])), 0);
    std::fs::write(d.join("empty.csv"), "task,x_1,y\n").unwrap();
    std::fs::write(d.join("space.json"), r#"{"dims":[{"name":"x","lower":0,"upper":1}]}"#).unwrap();
    assert_eq!(
        code(&metabench(d, &["ingest", "--csv", "empty.csv", "--space", "space.json", "--out", "x.json"])),
        1
    );
}

#[test]
fn partial_failure_exits_with_three_and_resumes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(&metabench(d, &["forrester", "--num", "2", "--out", "tasks"])), 0);
    // CMA-ES cannot run in one dimension; the other cells still complete.
    let args = ["bench", "--tasks", "tasks", "--out", "arch", "--methods", "rs,cmaes", "--runs", "2", "--budget", "5"];
    assert_eq!(code(&metabench(d, &args)), 3);
    let rs = std::fs::read_to_string(d.join("arch/rs.jsonl")).unwrap();
    assert_eq!(rs.lines().count(), 4);
    assert_eq!(code(&metabench(d, &args)), 3);
    assert_eq!(std::fs::read_to_string(d.join("arch/rs.jsonl")).unwrap().lines().count(), 4);
    assert_eq!(code(&metabench(d, &["report", "--archive", "arch", "--out", "rep"])), 1);
}

#[test]
fn workers_env_is_validated() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    metabench(d, &["forrester", "--num", "1", "--out", "tasks"]);
    let out = Command::new(env!("CARGO_BIN_EXE_metabench"))
        .args(["bench", "--tasks", "tasks", "--out", "a", "--methods", "rs", "--runs", "1"])
        .current_dir(d)
        .env("METABENCH_WORKERS", "zero")
        .output()
        .unwrap();
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("METABENCH_WORKERS"));
}

#[test]
fn reports_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    for k in ["1", "2"] {
        let tasks = format!("tasks{k}");
        let arch = format!("arch{k}");
        let rep = format!("rep{k}");
        assert_eq!(code(&metabench(d, &["forrester", "--num", "3", "--seed", "9", "--out", &tasks])), 0);
        let bench = [
            "bench", "--tasks", &tasks, "--out", &arch, "--methods", "rs,de,tpe", "--runs", "4", "--budget", "15",
            "--seed", "11", "--workers", "2",
        ];
        assert_eq!(code(&metabench(d, &bench)), 0);
        let report = [
            "report", "--archive", &arch, "--out", &rep, "--group-size", "2", "--bootstrap", "50",
        ];
        assert_eq!(code(&metabench(d, &report)), 0);
    }
    for f in ["ecdf.csv", "ranks.csv", "utest.csv", "scores.csv"] {
        assert_eq!(
            std::fs::read(d.join("rep1").join(f)).unwrap(),
            std::fs::read(d.join("rep2").join(f)).unwrap(),
            "{f}"
        );
    }
}
