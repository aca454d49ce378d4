//! Run configuration files.

use std::path::{Path, PathBuf};

use kersize_core::io::{read_json, read_matrix};
use kersize_core::{Error, ForwardModelSpec, NormSpec, Result, SamplerSpec};
use serde::Deserialize;
use serde_json::Value;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    /// Measurement CSV, one measurement per row.
    pub input: Option<PathBuf>,
    /// Output collection directory.
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Generate {
    pub count: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ForwardModelSpec,
    pub sampler: Option<SamplerSpec>,
    pub norm: Option<NormSpec>,
    pub generate: Option<Generate>,
    #[serde(default)]
    pub paths: Paths,
}

/// Replaces a linear operator's `"matrix": "file.csv"` by the file contents.
fn inline_matrix(model: &mut Value, base: &Path) -> Result<()> {
    let Some(forward) = model.get_mut("forward") else {
        return Ok(());
    };
    if forward.get("kind").and_then(Value::as_str) != Some("linear_additive") {
        return Ok(());
    }
    if let Some(Value::String(file)) = forward.get("matrix") {
        let path = base.join(file);
        let m = read_matrix(&path)?;
        let rows: Vec<Vec<f64>> = m.row_iter().map(|r| r.iter().copied().collect()).collect();
        forward["matrix"] = serde_json::to_value(rows).expect("numbers serialize");
    }
    Ok(())
}

fn parse<T: for<'de> Deserialize<'de>>(value: Value, path: &Path) -> Result<T> {
    serde_json::from_value(value).map_err(|e| Error::Json {
        path: path.to_path_buf(),
        source: e,
    })
}

fn base_dir(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

/// Loads a run configuration; relative paths are resolved against the
/// configuration file's directory.
pub fn load_run_config(path: &Path) -> Result<RunConfig> {
    let mut value: Value = read_json(path)?;
    let base = base_dir(path);
    if let Some(model) = value.get_mut("model") {
        inline_matrix(model, &base)?;
    }
    let mut cfg: RunConfig = parse(value, path)?;
    for p in [&mut cfg.paths.input, &mut cfg.paths.output].into_iter().flatten() {
        if p.is_relative() {
            *p = base.join(&*p);
        }
    }
    Ok(cfg)
}

/// Loads either a bare forward model or the `model` of a run configuration.
pub fn load_model(path: &Path) -> Result<ForwardModelSpec> {
    let mut value: Value = read_json(path)?;
    let base = base_dir(path);
    if value.get("forward").is_none() {
        if let Some(model) = value.get("model") {
            value = model.clone();
        }
    }
    inline_matrix(&mut value, &base)?;
    parse(value, path)
}
