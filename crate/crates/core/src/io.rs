//! Collection directories, vector CSV files and atomic writes.
//!
//! A collection directory holds `manifest.json` plus one `y_<id>.csv`
//! (the measurement) and one `fs_<id>.csv` (the feasible-set members, one
//! per row) for each measurement. Vector CSV has no header, uses `.` as the
//! decimal separator and LF line endings.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dataset::{FeasibleSet, FeasibleSetCollection, MeasurementVector, Predictions, SignalVector};
use crate::error::{Error, Result};
use crate::norm::NormSpec;

pub const MANIFEST: &str = "manifest.json";
pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub id: String,
    pub measurement: String,
    pub feasible: String,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub version: u32,
    pub d1: usize,
    pub d2: usize,
    pub norm: NormSpec,
    pub entries: Vec<ManifestEntry>,
}

/// Ids become file names, so only `[A-Za-z0-9._-]` is allowed and no
/// leading dot.
pub fn validate_id(id: &str) -> Result<()> {
    let ok = !id.is_empty()
        && !id.starts_with('.')
        && id.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-'));
    if ok {
        Ok(())
    } else {
        Err(Error::data(format!("measurement id `{id}` is not a safe file name")))
    }
}

/// Shortest round-trip text for `v`, switching to exponent form for very
/// large or small magnitudes.
pub fn format_f64(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || (1e-5..1e16).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

/// Writes `contents` to a sibling temp file and renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let name = path
        .file_name()
        .ok_or_else(|| Error::usage(format!("{} is not a file path", path.display())))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(name);
    tmp_name.push(format!(".tmp{}", std::process::id()));
    let tmp = path.with_file_name(tmp_name);
    fs::write(&tmp, contents).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::io(path, e)
    })
}

fn vectors_to_csv<'a>(rows: impl IntoIterator<Item = &'a [f64]>) -> String {
    let mut out = String::new();
    for row in rows {
        for (i, v) in row.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            out.push_str(&format_f64(*v));
        }
        out.push('\n');
    }
    out
}

/// Writes one vector per row.
pub fn write_vectors<'a>(path: &Path, rows: impl IntoIterator<Item = &'a [f64]>) -> Result<()> {
    write_atomic(path, vectors_to_csv(rows).as_bytes())
}

/// Reads a headerless numeric CSV; every row must have the same length.
pub fn read_vectors(path: &Path) -> Result<Vec<Vec<f64>>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let csv_err = |message: String| Error::Csv {
        path: path.to_path_buf(),
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(false)
        .from_reader(bytes.as_slice());
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(e.to_string()))?;
        let row = rec
            .iter()
            .map(|f| {
                let v: f64 = f
                    .trim()
                    .parse()
                    .map_err(|_| csv_err(format!("row {}: `{f}` is not a number", i + 1)))?;
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(csv_err(format!("row {}: non-finite value `{f}`", i + 1)))
                }
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(rows)
}

/// Reads a file holding exactly one vector.
pub fn read_vector(path: &Path) -> Result<Vec<f64>> {
    let mut rows = read_vectors(path)?;
    if rows.len() != 1 {
        return Err(Error::Csv {
            path: path.to_path_buf(),
            message: format!("expected one row, found {}", rows.len()),
        });
    }
    Ok(rows.pop().expect("one row"))
}

/// Reads a matrix stored one row per line.
pub fn read_matrix(path: &Path) -> Result<DMatrix<f64>> {
    let rows = read_vectors(path)?;
    crate::forward::matrix_from_rows(&rows).map_err(|e| Error::Csv {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Writes a CSV table with a header row.
pub fn write_table(path: &Path, header: &[String], rows: &[(String, Vec<Option<f64>>)]) -> Result<()> {
    let mut out = header.join(",");
    out.push('\n');
    for (label, values) in rows {
        out.push_str(label);
        for v in values {
            out.push(',');
            if let Some(v) = v {
                out.push_str(&format_f64(*v));
            }
        }
        out.push('\n');
    }
    write_atomic(path, out.as_bytes())
}

pub fn measurement_file(id: &str) -> String {
    format!("y_{id}.csv")
}

pub fn feasible_file(id: &str) -> String {
    format!("fs_{id}.csv")
}

pub fn prediction_file(id: &str) -> String {
    format!("pred_{id}.csv")
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Writes a collection directory, manifest last.
pub fn write_collection(dir: &Path, c: &FeasibleSetCollection, norm: &NormSpec) -> Result<()> {
    norm.check_dim(c.d1())?;
    ensure_dir(dir)?;
    let mut entries = Vec::with_capacity(c.len());
    for e in c.entries() {
        validate_id(&e.id)?;
        let (y, fs) = (measurement_file(&e.id), feasible_file(&e.id));
        write_vectors(&dir.join(&y), [e.measurement.as_slice()])?;
        write_vectors(&dir.join(&fs), e.members.iter().map(|m| m.as_slice()))?;
        entries.push(ManifestEntry {
            id: e.id.clone(),
            measurement: y,
            feasible: fs,
            count: e.members.len(),
        });
    }
    let manifest = Manifest {
        version: MANIFEST_VERSION,
        d1: c.d1(),
        d2: c.d2(),
        norm: norm.clone(),
        entries,
    };
    write_json(&dir.join(MANIFEST), &manifest)
}

/// Serializes `value` as pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Error::Json {
        path: path.to_path_buf(),
        source: e,
    })?;
    s.push('\n');
    write_atomic(path, s.as_bytes())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Json {
        path: path.to_path_buf(),
        source: e,
    })
}

/// Reads a collection directory and the norm stored in its manifest.
pub fn read_collection(dir: &Path) -> Result<(FeasibleSetCollection, NormSpec)> {
    let manifest: Manifest = read_json(&dir.join(MANIFEST))?;
    if manifest.version != MANIFEST_VERSION {
        return Err(Error::data(format!(
            "unsupported manifest version {} (expected {MANIFEST_VERSION})",
            manifest.version
        )));
    }
    let mut sets = Vec::with_capacity(manifest.entries.len());
    for entry in &manifest.entries {
        validate_id(&entry.id)?;
        let file = |name: &str| -> Result<PathBuf> {
            if name.contains('/') || name.contains('\\') || name.starts_with('.') {
                return Err(Error::data(format!("manifest file name `{name}` must be a plain file name")));
            }
            Ok(dir.join(name))
        };
        let y_path = file(&entry.measurement)?;
        let y = read_vector(&y_path)?;
        let members = read_vectors(&file(&entry.feasible)?)?;
        if members.len() != entry.count {
            return Err(Error::data(format!(
                "feasible set `{}` has {} members, manifest says {}",
                entry.id,
                members.len(),
                entry.count
            )));
        }
        sets.push(FeasibleSet {
            id: entry.id.clone(),
            measurement: MeasurementVector::new(y)?,
            members: members.into_iter().map(SignalVector::new).collect::<Result<_>>()?,
        });
    }
    let c = FeasibleSetCollection::new(manifest.d1, manifest.d2, sets)?;
    manifest.norm.check_dim(c.d1()).map_err(|e| Error::data(e.to_string()))?;
    Ok((c, manifest.norm))
}

/// Reads `pred_<id>.csv` for every id.
pub fn read_predictions<'a>(dir: &Path, ids: impl IntoIterator<Item = &'a str>) -> Result<Predictions> {
    let mut out = Predictions::new();
    for id in ids {
        validate_id(id)?;
        let path = dir.join(prediction_file(id));
        if !path.exists() {
            return Err(Error::data(format!(
                "missing prediction for measurement `{id}` ({})",
                path.display()
            )));
        }
        out.insert(id.to_string(), SignalVector::new(read_vector(&path)?)?);
    }
    Ok(out)
}

/// Writes `pred_<id>.csv` for every prediction.
pub fn write_predictions(dir: &Path, predictions: &Predictions) -> Result<()> {
    ensure_dir(dir)?;
    for (id, v) in predictions {
        validate_id(id)?;
        write_vectors(&dir.join(prediction_file(id)), [v.as_slice()])?;
    }
    Ok(())
}

/// `id,v_norm` rows.
pub fn write_v_norms(path: &Path, ids: &[&str], v_norms: &[f64]) -> Result<()> {
    let mut out = String::from("id,v_norm\n");
    for (id, v) in ids.iter().zip(v_norms) {
        let _ = writeln!(out, "{id},{}", format_f64(*v));
    }
    write_atomic(path, out.as_bytes())
}
