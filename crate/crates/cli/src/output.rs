//! Output files. Writes go to a `.tmp` sibling first and are renamed into
//! place, so readers never see a half-written file. The manifest echoes the
//! fully resolved configuration together with the result summary; it
//! carries no timestamps, so repeated runs produce identical bytes.

use anyhow::{Context, Result};
use serde::Serialize;
use std::fs;
use std::path::{Path, PathBuf};

use crate::config::ExperimentConfig;

/// Write `contents` to `path` atomically, creating parent directories.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let parent = path.parent().filter(|p| !p.as_os_str().is_empty());
    if let Some(dir) = parent {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, contents).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path)
        .with_context(|| format!("renaming {} into place", path.display()))?;
    Ok(())
}

#[derive(Serialize)]
struct Manifest<'a> {
    config: &'a ExperimentConfig,
    outputs: Vec<&'a str>,
    results: &'a serde_json::Value,
}

/// Render the manifest text for a finished experiment.
pub fn manifest_json(
    config: &ExperimentConfig,
    outputs: &[(String, String)],
    results: &serde_json::Value,
) -> Result<String> {
    let manifest = Manifest {
        config,
        outputs: outputs.iter().map(|(name, _)| name.as_str()).collect(),
        results,
    };
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    Ok(text)
}

/// Write every output file plus `manifest.json` under `out_dir`; returns the
/// paths written.
pub fn write_outputs(
    out_dir: &Path,
    config: &ExperimentConfig,
    outputs: &[(String, String)],
    results: &serde_json::Value,
) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for (name, contents) in outputs {
        let path = out_dir.join(name);
        write_atomic(&path, contents.as_bytes())?;
        written.push(path);
    }
    let manifest = manifest_json(config, outputs, results)?;
    let path = out_dir.join("manifest.json");
    write_atomic(&path, manifest.as_bytes())?;
    written.push(path);
    Ok(written)
}
