use std::path::Path;
use std::sync::Arc;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use rand::RngCore;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{ForresterTask, NoiseMode, Objective, SurrogateTask};
use crate::bnn::NetArchitecture;
use crate::dataset::NormalizationSpec;
use crate::error::{Error, Result};
use crate::space::ConfigSpace;

pub const TASK_FILE_VERSION: u64 = 1;

/// Any task that can be stored in a task file.
#[derive(Clone, Debug, PartialEq)]
pub enum Task {
    Surrogate(SurrogateTask),
    Forrester(ForresterTask),
}

impl Objective for Task {
    fn space(&self) -> &ConfigSpace {
        match self {
            Task::Surrogate(t) => t.space(),
            Task::Forrester(t) => t.space(),
        }
    }

    fn evaluate(&self, x: &[f64], rng: &mut dyn RngCore) -> Result<f64> {
        match self {
            Task::Surrogate(t) => t.evaluate(x, rng),
            Task::Forrester(t) => t.evaluate(x, rng),
        }
    }

    fn evaluate_noiseless(&self, x: &[f64]) -> Result<f64> {
        match self {
            Task::Surrogate(t) => t.evaluate_noiseless(x),
            Task::Forrester(t) => t.evaluate_noiseless(x),
        }
    }
}

/// Little-endian `f64` bytes, base64 encoded.
pub(crate) fn encode_f64s(v: &[f64]) -> String {
    let bytes: Vec<u8> = v.iter().flat_map(|x| x.to_le_bytes()).collect();
    STANDARD.encode(bytes)
}

pub(crate) fn decode_f64s(s: &str) -> std::result::Result<Vec<f64>, String> {
    let bytes = STANDARD.decode(s).map_err(|e| e.to_string())?;
    if bytes.len() % 8 != 0 {
        return Err(format!("{} bytes is not a whole number of f64 values", bytes.len()));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect())
}

#[derive(Serialize, Deserialize)]
struct SurrogateRecord {
    id: usize,
    seed: u64,
    latent: Vec<f64>,
    source_task: usize,
    weight_index: usize,
    architecture: NetArchitecture,
    weights: String,
    noise: NoiseMode,
    normalization: NormalizationSpec,
}

#[derive(Serialize, Deserialize)]
struct ForresterRecord {
    a: f64,
    b: f64,
}

fn to_json(task: &Task) -> Value {
    let (kind, body) = match task {
        Task::Surrogate(t) => (
            "surrogate",
            serde_json::to_value(SurrogateRecord {
                id: t.id,
                seed: t.seed,
                latent: t.latent.clone(),
                source_task: t.source_task,
                weight_index: t.weight_index,
                architecture: t.architecture.clone(),
                weights: encode_f64s(&t.weights),
                noise: t.noise,
                normalization: t.normalization.clone(),
            }),
        ),
        Task::Forrester(t) => ("forrester", serde_json::to_value(ForresterRecord { a: t.a, b: t.b })),
    };
    let mut body = body.expect("task records serialize");
    let obj = body.as_object_mut().expect("records are objects");
    obj.insert("version".into(), TASK_FILE_VERSION.into());
    obj.insert("kind".into(), kind.into());
    body
}

pub fn save_task(task: &Task, path: impl AsRef<Path>) -> Result<()> {
    let text = serde_json::to_string(&to_json(task))?;
    std::fs::write(path, text)?;
    Ok(())
}

pub fn load_task(path: impl AsRef<Path>) -> Result<Task> {
    let path = path.as_ref();
    let corrupt = |message: String| Error::Corrupt {
        path: path.display().to_string(),
        message,
    };
    let text = std::fs::read_to_string(path)?;
    let doc: Value = serde_json::from_str(&text).map_err(|e| corrupt(e.to_string()))?;
    let version = doc
        .get("version")
        .and_then(Value::as_u64)
        .ok_or_else(|| Error::schema("version", "missing or not an integer"))?;
    if version != TASK_FILE_VERSION {
        return Err(Error::Version {
            found: version,
            expected: TASK_FILE_VERSION,
        });
    }
    match doc.get("kind").and_then(Value::as_str) {
        Some("forrester") => {
            let r: ForresterRecord =
                serde_json::from_value(doc).map_err(|e| Error::schema("forrester", e.to_string()))?;
            Ok(Task::Forrester(ForresterTask::new(r.a, r.b)?))
        }
        Some("surrogate") => {
            let r: SurrogateRecord =
                serde_json::from_value(doc).map_err(|e| Error::schema("surrogate", e.to_string()))?;
            let weights = decode_f64s(&r.weights).map_err(corrupt)?;
            if weights.len() != r.architecture.num_params() {
                return Err(corrupt(format!(
                    "{} weights stored, architecture needs {}",
                    weights.len(),
                    r.architecture.num_params()
                )));
            }
            Ok(Task::Surrogate(SurrogateTask::new(
                r.id,
                r.seed,
                r.latent,
                r.source_task,
                r.weight_index,
                r.architecture,
                Arc::new(weights),
                r.noise,
                r.normalization,
            )?))
        }
        Some(other) => Err(Error::schema("kind", format!("unknown task kind `{other}`"))),
        None => Err(Error::schema("kind", "missing")),
    }
}
