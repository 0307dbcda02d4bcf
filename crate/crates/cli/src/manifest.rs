use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use ambimt_core::io::{sha256_file, write_atomic};
use anyhow::{Context, Result};
use chrono::{SecondsFormat, Utc};
use serde::Serialize;

/// Record of one invocation: what ran, with which parameters, on which bytes.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub params: serde_json::Value,
    /// path → sha256 of the input files
    pub inputs: BTreeMap<String, String>,
    /// path → sha256 of the files written
    pub outputs: BTreeMap<String, String>,
    pub seed: Option<u64>,
    pub tool_version: String,
    pub started_at: String,
    pub finished_at: String,
}

fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

pub struct Run {
    manifest: RunManifest,
}

impl Run {
    pub fn start(subcommand: &str, params: &impl Serialize, seed: Option<u64>) -> Run {
        Run {
            manifest: RunManifest {
                subcommand: subcommand.to_string(),
                params: serde_json::to_value(params).expect("parameters serialize"),
                inputs: BTreeMap::new(),
                outputs: BTreeMap::new(),
                seed,
                tool_version: ambimt_core::TOOL_VERSION.to_string(),
                started_at: now(),
                finished_at: String::new(),
            },
        }
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        let digest = sha256_file(path).with_context(|| format!("reading {}", path.display()))?;
        self.manifest
            .inputs
            .insert(path.display().to_string(), digest);
        Ok(())
    }

    /// Writes `bytes` atomically and records the output.
    pub fn write(&mut self, path: &Path, bytes: &[u8]) -> Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        }
        write_atomic(path, bytes).with_context(|| format!("writing {}", path.display()))?;
        self.manifest.outputs.insert(
            path.display().to_string(),
            ambimt_core::io::sha256_hex(bytes),
        );
        Ok(())
    }

    /// Records a file written by library code.
    pub fn output(&mut self, path: &Path) -> Result<()> {
        let digest = sha256_file(path).with_context(|| format!("reading {}", path.display()))?;
        self.manifest
            .outputs
            .insert(path.display().to_string(), digest);
        Ok(())
    }

    /// Writes the manifest to `path` if given, else next to the first output
    /// as `<output>.manifest.json`. Runs with no file output and no explicit
    /// path only log the manifest.
    pub fn finish(mut self, path: Option<&Path>) -> Result<Option<PathBuf>> {
        self.manifest.finished_at = now();
        let target = match path {
            Some(p) => Some(p.to_path_buf()),
            None => self
                .manifest
                .outputs
                .keys()
                .next()
                .map(|o| PathBuf::from(format!("{o}.manifest.json"))),
        };
        let mut body = serde_json::to_string_pretty(&self.manifest).expect("manifest serializes");
        body.push('\n');
        match &target {
            Some(p) => write_atomic(p, body.as_bytes())
                .with_context(|| format!("writing run manifest {}", p.display()))?,
            None => log::info!("run manifest: {}", body.trim_end()),
        }
        Ok(target)
    }
}
