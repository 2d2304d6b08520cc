//! JSON model files. Coefficient vectors above the sidecar threshold are
//! written next to the JSON as raw little-endian `f64`s.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ElasticNetModel, ElasticNetSpec};
use crate::data::store::{StoredVector, SIDECAR_THRESHOLD};
use crate::error::Result;

#[derive(Serialize, Deserialize)]
struct ModelFile {
    spec: ElasticNetSpec,
    gamma: f64,
    beta: StoredVector,
    z: StoredVector,
    xi: StoredVector,
    iterations: usize,
    residual: f64,
    #[serde(default)]
    residual_history: Vec<f64>,
}

pub fn save_model(model: &ElasticNetModel, path: &Path) -> Result<()> {
    save_with_threshold(model, path, SIDECAR_THRESHOLD)
}

pub(super) fn save_with_threshold(model: &ElasticNetModel, path: &Path, threshold: usize) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("model");
    let side = |field: &str, v: &[f64]| StoredVector::store(v, dir, &format!("{stem}.{field}.f64"), threshold);
    let file = ModelFile {
        spec: model.spec.clone(),
        gamma: model.gamma,
        beta: side("beta", &model.beta)?,
        z: side("z", &model.z)?,
        xi: side("xi", &model.xi)?,
        iterations: model.iterations,
        residual: model.residual,
        residual_history: model.residual_history.clone(),
    };
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut out, &file)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<ElasticNetModel> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let file: ModelFile = serde_json::from_reader(BufReader::new(File::open(path)?))?;
    Ok(ElasticNetModel {
        beta: file.beta.load(dir)?,
        z: file.z.load(dir)?,
        xi: file.xi.load(dir)?,
        spec: file.spec,
        gamma: file.gamma,
        iterations: file.iterations,
        residual: file.residual,
        residual_history: file.residual_history,
    })
}
