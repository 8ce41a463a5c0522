//! Offline evaluation data: T tasks evaluated on one shared grid of N configurations.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::space::{Config, ConfigSpace};

/// `targets[t][n]` is task `t` evaluated at `grid[n]`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvaluationDataset {
    pub space: ConfigSpace,
    pub grid: Vec<Config>,
    pub task_names: Vec<String>,
    pub targets: Vec<Vec<f64>>,
}

impl EvaluationDataset {
    pub fn new(
        space: ConfigSpace,
        grid: Vec<Config>,
        task_names: Vec<String>,
        targets: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let ds = EvaluationDataset {
            space,
            grid,
            task_names,
            targets,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn num_tasks(&self) -> usize {
        self.targets.len()
    }

    pub fn num_points(&self) -> usize {
        self.grid.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() {
            return Err(Error::schema("grid", "grid is empty"));
        }
        if self.targets.is_empty() {
            return Err(Error::schema("targets", "no tasks"));
        }
        let mut seen = HashSet::with_capacity(self.grid.len());
        for (n, x) in self.grid.iter().enumerate() {
            self.space.check(x).map_err(|e| Error::schema(format!("grid[{n}]"), e.to_string()))?;
            let key: Vec<u64> = x.iter().map(|v| v.to_bits()).collect();
            if !seen.insert(key) {
                return Err(Error::schema(format!("grid[{n}]"), "duplicate grid configuration"));
            }
        }
        if self.task_names.len() != self.targets.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} task names for {} target rows",
                self.task_names.len(),
                self.targets.len()
            )));
        }
        for (t, row) in self.targets.iter().enumerate() {
            if row.len() != self.grid.len() {
                return Err(Error::DimensionMismatch(format!(
                    "targets[{t}] has {} columns, grid has {} points",
                    row.len(),
                    self.grid.len()
                )));
            }
            if let Some(n) = row.iter().position(|v| !v.is_finite()) {
                return Err(Error::schema(format!("targets[{t}][{n}]"), "non-finite target"));
            }
        }
        Ok(())
    }

    /// Builds the dataset from a parsed JSON document, naming the offending field on failure.
    pub fn from_json(doc: &Value) -> Result<Self> {
        let field = |name: &str| {
            doc.get(name)
                .ok_or_else(|| Error::schema(name, "missing required field"))
        };
        let space: ConfigSpace = serde_json::from_value(field("space")?.clone())
            .map_err(|e| Error::schema("space", e.to_string()))?;
        let grid: Vec<Config> = serde_json::from_value(field("grid")?.clone())
            .map_err(|e| Error::schema("grid", e.to_string()))?;
        let task_names: Vec<String> = serde_json::from_value(field("task_names")?.clone())
            .map_err(|e| Error::schema("task_names", e.to_string()))?;
        let targets: Vec<Vec<f64>> = serde_json::from_value(field("targets")?.clone())
            .map_err(|e| Error::schema("targets", e.to_string()))?;
        EvaluationDataset::new(space, grid, task_names, targets)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let doc: Value = serde_json::from_str(&text).map_err(|e| Error::Corrupt {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_json(&doc)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.validate()?;
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text)?;
        Ok(())
    }

    /// Unit-cube coordinates of the grid.
    pub fn unit_grid(&self) -> Vec<Vec<f64>> {
        self.grid
            .iter()
            .map(|x| self.space.to_unit(x).expect("grid validated against space"))
            .collect()
    }
}

/// Global standardization of targets across all tasks.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetScaling {
    pub mean: f64,
    pub std: f64,
}

impl TargetScaling {
    pub const IDENTITY: TargetScaling = TargetScaling { mean: 0.0, std: 1.0 };

    /// Population mean and standard deviation over every entry.
    pub fn fit<'a>(values: impl IntoIterator<Item = &'a f64>) -> Result<Self> {
        let v: Vec<f64> = values.into_iter().copied().collect();
        if v.len() < 2 {
            return Err(Error::invalid("target standardization needs at least two values"));
        }
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / n;
        if !(var > 0.0) || var.sqrt() <= f64::EPSILON * mean.abs().max(1.0) {
            return Err(Error::ZeroVariance);
        }
        Ok(TargetScaling {
            mean,
            std: var.sqrt(),
        })
    }

    pub fn normalize(&self, y: f64) -> f64 {
        (y - self.mean) / self.std
    }

    pub fn denormalize(&self, z: f64) -> f64 {
        z * self.std + self.mean
    }
}

/// Everything needed to move between native units and model units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalizationSpec {
    pub space: ConfigSpace,
    pub targets: TargetScaling,
}

impl NormalizationSpec {
    pub fn normalize_input(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.space.to_unit(x)
    }

    pub fn denormalize_input(&self, u: &[f64]) -> Config {
        self.space.from_unit(u)
    }
}

/// Standardizes the T×N target matrix globally; returns the matrix and its scaling.
pub fn normalize_targets(dataset: &EvaluationDataset) -> Result<(Vec<Vec<f64>>, TargetScaling)> {
    let scaling = TargetScaling::fit(dataset.targets.iter().flatten())?;
    let z = dataset
        .targets
        .iter()
        .map(|row| row.iter().map(|&y| scaling.normalize(y)).collect())
        .collect();
    Ok((z, scaling))
}
