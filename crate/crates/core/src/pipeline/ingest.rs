use std::collections::HashMap;
use std::io::Read;
use std::path::Path;

use crate::dataset::EvaluationDataset;
use crate::error::{Error, Result};
use crate::space::{Config, ConfigSpace};

use super::model_file::csv_error;

type Key = Vec<u64>;

fn key(x: &[f64]) -> Key {
    // -0.0 and 0.0 are the same configuration.
    x.iter().map(|v| (v + 0.0).to_bits()).collect()
}

/// Builds a dataset from long-format CSV with header `task, x_1..x_D, y`.
///
/// Every task must be evaluated on the same set of configurations; the grid
/// order is that of the first task.
pub fn parse_csv<R: Read>(input: R, space: &ConfigSpace) -> Result<EvaluationDataset> {
    let d = space.len();
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let header = reader.headers().map_err(csv_error)?.clone();
    if header.len() != d + 2 || &header[0] != "task" || &header[d + 1] != "y" {
        return Err(Error::schema(
            "csv header",
            format!("expected `task`, {d} input columns and `y`, got {:?}", header.iter().collect::<Vec<_>>()),
        ));
    }

    let mut names: Vec<String> = Vec::new();
    let mut rows: HashMap<String, Vec<(Vec<f64>, f64)>> = HashMap::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(csv_error)?;
        let line = i + 2;
        let num = |col: usize| -> Result<f64> {
            record[col].parse::<f64>().map_err(|_| {
                Error::schema(
                    format!("line {line}, column `{}`", &header[col]),
                    format!("`{}` is not a number", &record[col]),
                )
            })
        };
        let task = record[0].to_string();
        if task.is_empty() {
            return Err(Error::schema(format!("line {line}, column `task`"), "empty task name"));
        }
        let x = (1..=d).map(num).collect::<Result<Vec<f64>>>()?;
        space.check(&x)?;
        let y = num(d + 1)?;
        if !y.is_finite() {
            return Err(Error::schema(format!("line {line}, column `y`"), "target is not finite"));
        }
        if !rows.contains_key(&task) {
            names.push(task.clone());
        }
        rows.entry(task).or_default().push((x, y));
    }
    if names.is_empty() {
        return Err(Error::invalid("CSV contains no evaluations"));
    }

    let first = &rows[&names[0]];
    let grid: Vec<Config> = first.iter().map(|(x, _)| Config(x.clone())).collect();
    let index: HashMap<Key, usize> = grid.iter().enumerate().map(|(i, x)| (key(&x.0), i)).collect();
    let mut targets = Vec::with_capacity(names.len());
    for name in &names {
        let task_rows = &rows[name];
        let mut row = vec![None; grid.len()];
        for (x, y) in task_rows {
            let Some(&j) = index.get(&key(x)) else {
                return Err(Error::schema(
                    format!("task `{name}`"),
                    format!("configuration {x:?} is not on the grid of task `{}`", names[0]),
                ));
            };
            if row[j].replace(*y).is_some() {
                return Err(Error::schema(format!("task `{name}`"), format!("configuration {x:?} appears twice")));
            }
        }
        if task_rows.len() != grid.len() {
            return Err(Error::schema(
                format!("task `{name}`"),
                format!("{} evaluations, the shared grid has {}", task_rows.len(), grid.len()),
            ));
        }
        targets.push(row.into_iter().map(|y| y.expect("all grid points filled")).collect());
    }
    EvaluationDataset::new(space.clone(), grid, names, targets)
}

/// Reads the CSV and the config-space JSON (`{"dims": [...]}`), validates,
/// and writes the dataset JSON.
pub fn ingest_csv(csv_path: &Path, space_path: &Path, out: &Path) -> Result<EvaluationDataset> {
    let space_text = std::fs::read_to_string(space_path)?;
    let space: ConfigSpace =
        serde_json::from_str(&space_text).map_err(|e| Error::schema("space", e.to_string()))?;
    let ds = parse_csv(std::fs::File::open(csv_path)?, &space)?;
    ds.save(out)?;
    Ok(ds)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn space() -> ConfigSpace {
        ConfigSpace::unit(2)
    }

    #[test]
    fn two_tasks_three_points() {
        let csv = "task,x_1,x_2,y\n\
                   a,0.1,0.2,1.0\na,0.5,0.5,2.0\na,0.9,0.1,3.0\n\
                   b,0.9,0.1,30\nb,0.1,0.2,10\nb,0.5,0.5,20\n";
        let ds = parse_csv(csv.as_bytes(), &space()).unwrap();
        assert_eq!(ds.num_tasks(), 2);
        assert_eq!(ds.num_points(), 3);
        assert_eq!(ds.task_names, ["a", "b"]);
        assert_eq!(ds.targets[1], vec![10.0, 20.0, 30.0]);
    }

    #[test]
    fn grid_mismatch_names_task() {
        let csv = "task,x_1,x_2,y\na,0.1,0.2,1\na,0.5,0.5,2\nb,0.1,0.2,1\nb,0.6,0.5,2\n";
        let err = parse_csv(csv.as_bytes(), &space()).unwrap_err().to_string();
        assert!(err.contains("task `b`"), "{err}");
        let short = "task,x_1,x_2,y\na,0.1,0.2,1\na,0.5,0.5,2\nb,0.1,0.2,1\n";
        let err = parse_csv(short.as_bytes(), &space()).unwrap_err().to_string();
        assert!(err.contains("task `b`"), "{err}");
    }

    #[test]
    fn empty_csv_is_an_error() {
        assert!(parse_csv("task,x_1,x_2,y\n".as_bytes(), &space()).is_err());
        assert!(parse_csv("".as_bytes(), &space()).is_err());
    }

    #[test]
    fn bad_cells_report_line_and_column() {
        let csv = "task,x_1,x_2,y\na,0.1,oops,1\n";
        let err = parse_csv(csv.as_bytes(), &space()).unwrap_err().to_string();
        assert!(err.contains("line 2") && err.contains("x_2"), "{err}");
        let out = "task,x_1,x_2,y\na,0.1,1.5,1\n";
        assert!(matches!(parse_csv(out.as_bytes(), &space()), Err(Error::OutOfBounds { .. })));
    }

    #[test]
    fn duplicate_configuration() {
        let csv = "task,x_1,x_2,y\na,0.1,0.2,1\na,0.5,0.5,2\nb,0.1,0.2,1\nb,0.1,0.2,2\n";
        let err = parse_csv(csv.as_bytes(), &space()).unwrap_err().to_string();
        assert!(err.contains("twice"), "{err}");
    }

    #[test]
    fn ingest_writes_loadable_dataset() {
        let dir = tempfile::tempdir().unwrap();
        let csv = dir.path().join("d.csv");
        let sp = dir.path().join("space.json");
        let out = dir.path().join("dataset.json");
        std::fs::write(&csv, "task,C,gamma,y\nt1,1,0.5,0.3\nt1,10,0.1,0.2\nt2,1,0.5,0.1\nt2,10,0.1,0.4\n").unwrap();
        std::fs::write(
            &sp,
            r#"{"dims":[{"name":"C","lower":0.01,"upper":100,"log":true},{"name":"gamma","lower":0,"upper":1,"log":false}]}"#,
        )
        .unwrap();
        let ds = ingest_csv(&csv, &sp, &out).unwrap();
        assert_eq!(EvaluationDataset::load(&out).unwrap(), ds);
    }
}
