//! Model files: a JSON header plus a sidecar of little-endian `f64`s
//! holding the support duals, then their labels, then the support points
//! row-major.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{KernelSpec, SvmModel};
use crate::data::store::{read_f64_le, write_f64_le};
use crate::error::{dims, Result};

#[derive(Serialize, Deserialize)]
struct Header {
    kernel: KernelSpec,
    #[serde(rename = "C")]
    c: f64,
    bias: f64,
    n_sv: usize,
    feature_count: usize,
    sidecar: String,
}

pub fn save_model(model: &SvmModel, path: &Path) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("model");
    let sidecar = format!("{stem}.sv.f64");
    let mut values = Vec::with_capacity(model.support_duals.len() * (2 + model.feature_count));
    values.extend_from_slice(&model.support_duals);
    values.extend_from_slice(&model.support_labels);
    for p in &model.support_points {
        values.extend_from_slice(p);
    }
    write_f64_le(&dir.join(&sidecar), &values)?;
    let header = Header {
        kernel: model.kernel,
        c: model.c,
        bias: model.bias,
        n_sv: model.support_duals.len(),
        feature_count: model.feature_count,
        sidecar,
    };
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut out, &header)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<SvmModel> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let header: Header = serde_json::from_reader(BufReader::new(File::open(path)?))?;
    let values = read_f64_le(&dir.join(&header.sidecar))?;
    let (k, p) = (header.n_sv, header.feature_count);
    if values.len() != k * (2 + p) {
        return Err(dims(format!(
            "{} holds {} values, expected {} for {k} support vectors of {p} features",
            header.sidecar,
            values.len(),
            k * (2 + p)
        )));
    }
    let (duals, rest) = values.split_at(k);
    let (labels, points) = rest.split_at(k);
    Ok(SvmModel {
        support_points: if p == 0 { vec![Vec::new(); k] } else { points.chunks(p).map(<[f64]>::to_vec).collect() },
        support_duals: duals.to_vec(),
        support_labels: labels.to_vec(),
        bias: header.bias,
        kernel: header.kernel,
        c: header.c,
        feature_count: p,
    })
}
