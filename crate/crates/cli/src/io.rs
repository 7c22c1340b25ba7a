//! File formats.
//!
//! Signals CSV: header `time,v<id>,…`, one row per time point in ascending
//! order, so the block below the header is the `N_t × N_s` matrix `Y` with
//! time as the fast index of `vec(Y)`. Floats are written in Rust's
//! shortest round-trip form, so reading a file back reproduces every value
//! bit for bit.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use serde::Serialize;
use sha2::{Digest, Sha256};
use stgp_core::mesh::SpectralBasis;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Signals {
    pub times: Vec<f64>,
    pub vertices: Vec<usize>,
    /// `times.len() × vertices.len()`.
    pub values: DMatrix<f64>,
}

impl Signals {
    pub fn full_field(times: Vec<f64>, values: DMatrix<f64>) -> Self {
        let vertices = (0..values.ncols()).collect();
        Signals {
            times,
            vertices,
            values,
        }
    }
}

pub fn signals_to_csv(s: &Signals) -> String {
    let mut out = String::with_capacity(16 * (s.times.len() + 1) * (s.vertices.len() + 1));
    out.push_str("time");
    for v in &s.vertices {
        out.push_str(&format!(",v{v}"));
    }
    out.push('\n');
    for (t, time) in s.times.iter().enumerate() {
        out.push_str(&format!("{time:?}"));
        for i in 0..s.vertices.len() {
            out.push_str(&format!(",{:?}", s.values[(t, i)]));
        }
        out.push('\n');
    }
    out
}

pub fn write_signals(path: &Path, s: &Signals) -> Result<()> {
    write_text(path, &signals_to_csv(s))
}

pub fn read_signals(path: &Path) -> Result<Signals> {
    let bad = |msg: String| CliError::Csv {
        path: path.to_path_buf(),
        msg,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => CliError::io(path, io),
            other => bad(format!("{other:?}")),
        })?;
    let headers = reader.headers().map_err(|e| bad(e.to_string()))?.clone();
    if headers.get(0).map(str::trim) != Some("time") {
        return Err(bad("first column must be `time`".into()));
    }
    let vertices = headers
        .iter()
        .skip(1)
        .map(|h| {
            h.trim()
                .strip_prefix('v')
                .and_then(|id| id.parse().ok())
                .ok_or_else(|| bad(format!("bad vertex column {h:?}")))
        })
        .collect::<Result<Vec<usize>>>()?;
    if vertices.is_empty() {
        return Err(bad("no vertex columns".into()));
    }
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| bad(e.to_string()))?;
        let parse = |k: usize| -> Result<f64> {
            let field = record.get(k).unwrap_or("");
            field
                .trim()
                .parse::<f64>()
                .map_err(|_| bad(format!("row {}: cannot parse {field:?}", line + 2)))
        };
        if record.len() != vertices.len() + 1 {
            return Err(bad(format!(
                "row {} has {} fields, expected {}",
                line + 2,
                record.len(),
                vertices.len() + 1
            )));
        }
        times.push(parse(0)?);
        for k in 1..=vertices.len() {
            values.push(parse(k)?);
        }
    }
    if times.is_empty() {
        return Err(bad("no data rows".into()));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(bad("times must be strictly increasing".into()));
    }
    let values = DMatrix::from_row_slice(times.len(), vertices.len(), &values);
    Ok(Signals {
        times,
        vertices,
        values,
    })
}

/// `index,eigenvalue` rows.
pub fn eigenvalues_csv(basis: &SpectralBasis) -> String {
    let mut out = String::from("index,eigenvalue\n");
    for (j, l) in basis.eigenvalues.iter().enumerate() {
        out.push_str(&format!("{j},{l:?}\n"));
    }
    out
}

/// One row per vertex: `vertex_id,phi0,…`.
pub fn eigenvectors_csv(basis: &SpectralBasis) -> String {
    let phi = &basis.eigenvectors;
    let mut out = String::from("vertex_id");
    for j in 0..phi.ncols() {
        out.push_str(&format!(",phi{j}"));
    }
    out.push('\n');
    for i in 0..phi.nrows() {
        out.push_str(&i.to_string());
        for j in 0..phi.ncols() {
            out.push_str(&format!(",{:?}", phi[(i, j)]));
        }
        out.push('\n');
    }
    out
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("serializable");
    write_text(path, &(text + "\n"))
}

/// SHA-256 of the little-endian bytes of `values`.
pub fn hash_f64(values: impl IntoIterator<Item = f64>) -> String {
    let mut h = Sha256::new();
    for v in values {
        h.update(v.to_le_bytes());
    }
    hex::encode(h.finalize())
}

pub fn hash_usize(values: &[usize]) -> String {
    let mut h = Sha256::new();
    for v in values {
        h.update((*v as u64).to_le_bytes());
    }
    hex::encode(h.finalize())
}

pub fn hash_bytes(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}
