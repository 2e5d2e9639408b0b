//! Artifact writers. JSON artifacts carry the run configuration under a
//! top-level `config` key.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::CliError;

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<PathBuf, CliError> {
    if let Some(parent) = path.parent() {
        ensure_dir(parent)?;
    }
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))?;
    Ok(path.to_path_buf())
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<PathBuf, CliError> {
    if let Some(parent) = path.parent() {
        ensure_dir(parent)?;
    }
    std::fs::write(path, bytes).map_err(|e| CliError::io(path, e))?;
    Ok(path.to_path_buf())
}

/// Pretty JSON with a trailing newline. Objects get the config merged in.
pub fn write_json<T: Serialize>(
    path: &Path,
    value: &T,
    config: Option<&serde_json::Value>,
) -> Result<PathBuf, CliError> {
    let mut v = serde_json::to_value(value)?;
    if let (Some(cfg), serde_json::Value::Object(map)) = (config, &mut v) {
        map.insert("config".into(), cfg.clone());
    }
    let mut text = serde_json::to_string_pretty(&v)?;
    text.push('\n');
    write_text(path, &text)
}

pub fn read_json(path: &Path) -> Result<serde_json::Value, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}
