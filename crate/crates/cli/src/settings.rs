//! Config files, resolved-config provenance and output guards.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;
use vigan::fsutil::atomic_write;

/// Errors that map to a dedicated exit status.
#[derive(Debug)]
pub enum Failure {
    /// Bad flags, bad config, refused overwrite.
    Usage(String),
    /// A check ran and did not pass.
    Verification(String),
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) | Failure::Verification(m) => f.write_str(m),
        }
    }
}

impl std::error::Error for Failure {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    Failure::Usage(msg.into()).into()
}

/// Settings from `path`, or the defaults when no file is given. Unknown keys
/// are rejected.
pub fn load<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    let Some(path) = path else {
        return Ok(T::default());
    };
    let text = fs::read_to_string(path)
        .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| usage(format!("config {}: {e}", path.display())))
}

/// Where the resolved config of a run writing `output` goes: inside an
/// output directory, or beside an output file.
pub fn config_path_for(output: &Path, is_dir: bool) -> PathBuf {
    if is_dir {
        output.join("config.json")
    } else {
        output.with_extension("config.json")
    }
}

/// Persists the settings a run used, in the same format `--config` reads.
pub fn write_resolved<T: Serialize>(path: &Path, settings: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(settings)? + "\n";
    atomic_write(path, text.as_bytes()).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// Refuses to replace an existing file unless `force` is set, and creates
/// missing parent directories.
pub fn prepare_file(path: &Path, force: bool) -> Result<()> {
    if path.is_dir() {
        return Err(usage(format!("{} is a directory", path.display())));
    }
    if path.exists() && !force {
        return Err(usage(format!(
            "{} already exists; pass --force to overwrite",
            path.display()
        )));
    }
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    Ok(())
}

/// Refuses a non-empty existing directory unless `force` is set.
pub fn prepare_dir(path: &Path, force: bool) -> Result<()> {
    if path.is_file() {
        return Err(usage(format!("{} is a file", path.display())));
    }
    if path.is_dir() && !force && fs::read_dir(path)?.next().is_some() {
        return Err(usage(format!(
            "{} already exists; pass --force to overwrite",
            path.display()
        )));
    }
    fs::create_dir_all(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(())
}

/// The value a run actually uses: flag, then config file, then default.
pub fn required<T>(value: Option<T>, flag: &str) -> Result<T> {
    value.ok_or_else(|| {
        usage(format!(
            "missing --{flag} (not given on the command line or in the config file)"
        ))
    })
}
