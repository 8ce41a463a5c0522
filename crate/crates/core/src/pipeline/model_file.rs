use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::bnn::{MetaModel, NetArchitecture, SghmcConfig};
use crate::dataset::NormalizationSpec;
use crate::encoder::EncoderModel;
use crate::error::{Error, Result};
use crate::tasks::{decode_f64s, encode_f64s};

pub const MODEL_FILE_VERSION: u64 = 1;

/// A trained meta-model with the metadata the model file carries.
#[derive(Clone, Debug, PartialEq)]
pub struct StoredModel {
    pub model: MetaModel,
    /// Training task names, in encoder-posterior order.
    pub task_names: Vec<String>,
    /// Sampler settings used for training.
    pub sghmc: SghmcConfig,
}

/// JSON layout. Weight vectors are base64 strings of little-endian `f64`s.
#[derive(Serialize, Deserialize)]
struct ModelRecord {
    version: u64,
    kind: String,
    seed: u64,
    task_names: Vec<String>,
    architecture: NetArchitecture,
    normalization: NormalizationSpec,
    encoder: EncoderModel,
    sghmc: SghmcConfig,
    samples: Vec<String>,
}

pub fn save_model(stored: &StoredModel, path: impl AsRef<Path>) -> Result<()> {
    let m = &stored.model;
    let record = ModelRecord {
        version: MODEL_FILE_VERSION,
        kind: "metamodel".into(),
        seed: m.seed,
        task_names: stored.task_names.clone(),
        architecture: m.architecture.clone(),
        normalization: m.normalization.clone(),
        encoder: m.encoder.clone(),
        sghmc: stored.sghmc.clone(),
        samples: m.samples.iter().map(|s| encode_f64s(s)).collect(),
    };
    let text = serde_json::to_string(&record)?;
    std::fs::write(path, text)?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<StoredModel> {
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
    if version != MODEL_FILE_VERSION {
        return Err(Error::Version {
            found: version,
            expected: MODEL_FILE_VERSION,
        });
    }
    let r: ModelRecord = serde_json::from_value(doc).map_err(|e| Error::schema("model", e.to_string()))?;
    if r.kind != "metamodel" {
        return Err(Error::schema("kind", format!("expected `metamodel`, got `{}`", r.kind)));
    }
    if r.task_names.len() != r.encoder.posteriors.len() {
        return Err(corrupt(format!(
            "{} task names for {} encoder posteriors",
            r.task_names.len(),
            r.encoder.posteriors.len()
        )));
    }
    let want = r.architecture.num_params();
    let samples = r
        .samples
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let w = decode_f64s(s).map_err(|e| corrupt(format!("sample {i}: {e}")))?;
            if w.len() != want {
                return Err(corrupt(format!("sample {i} has {} weights, architecture needs {want}", w.len())));
            }
            Ok(Arc::new(w))
        })
        .collect::<Result<Vec<_>>>()?;
    if samples.is_empty() {
        return Err(corrupt("no weight samples".into()));
    }
    Ok(StoredModel {
        model: MetaModel {
            architecture: r.architecture,
            samples,
            encoder: r.encoder,
            normalization: r.normalization,
            seed: r.seed,
        },
        task_names: r.task_names,
        sghmc: r.sghmc,
    })
}

/// Per-task posterior means and variances as CSV: `task,m_1..m_Q,v_1..v_Q`.
pub fn write_latent_csv<W: Write>(stored: &StoredModel, out: W) -> Result<()> {
    let q = stored.model.latent_dim();
    let mut w = csv::Writer::from_writer(out);
    let header: Vec<String> = std::iter::once("task".to_string())
        .chain((1..=q).map(|i| format!("m_{i}")))
        .chain((1..=q).map(|i| format!("v_{i}")))
        .collect();
    w.write_record(&header).map_err(csv_error)?;
    for (name, p) in stored.task_names.iter().zip(&stored.model.encoder.posteriors) {
        let row: Vec<String> = std::iter::once(name.clone())
            .chain(p.mean.iter().chain(&p.variance).map(|v| v.to_string()))
            .collect();
        w.write_record(&row).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::invalid(format!("csv: {other:?}")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tasks::surrogate_tests::toy_model;

    fn stored() -> StoredModel {
        let model = toy_model(3, 4, 0.2, -1.0);
        StoredModel {
            model,
            task_names: vec!["a".into(), "b".into(), "c".into()],
            sghmc: SghmcConfig::default(),
        }
    }

    #[test]
    fn roundtrip_is_bit_identical() {
        let dir = tempfile::tempdir().unwrap();
        let s = stored();
        let (p1, p2) = (dir.path().join("m1.json"), dir.path().join("m2.json"));
        save_model(&s, &p1).unwrap();
        let back = load_model(&p1).unwrap();
        assert_eq!(back, s);
        save_model(&back, &p2).unwrap();
        assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
    }

    #[test]
    fn wrong_weight_count_is_corrupt() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = stored();
        Arc::make_mut(&mut s.model.samples[1]).pop();
        let p = dir.path().join("m.json");
        save_model(&s, &p).unwrap();
        assert!(matches!(load_model(&p), Err(Error::Corrupt { .. })));
    }

    #[test]
    fn version_is_checked() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.json");
        std::fs::write(&p, r#"{"version":7}"#).unwrap();
        assert!(matches!(load_model(&p), Err(Error::Version { found: 7, .. })));
    }

    #[test]
    fn latent_csv_layout() {
        let mut buf = Vec::new();
        write_latent_csv(&stored(), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "task,m_1,m_2,v_1,v_2");
        assert_eq!(lines[2], "b,1,-1,0.2,0.2");
        assert_eq!(lines.len(), 4);
    }
}
