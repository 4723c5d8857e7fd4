//! Run manifest: config digest, tool version, timestamp, produced files
//! and worker count. The timestamp lives here and only here, so the data
//! artifacts stay byte-identical across reruns.

use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

use crate::config::RunConfig;
use crate::error::CliError;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub tool_version: String,
    pub timestamp: String,
    pub command: String,
    pub outputs: Vec<String>,
    pub workers: usize,
}

impl RunManifest {
    pub fn new(config: &RunConfig, command: &str, outputs: &[PathBuf]) -> Self {
        RunManifest {
            config_hash: config.content_hash(),
            tool_version: env!("CARGO_PKG_VERSION").to_owned(),
            timestamp: chrono::Utc::now().to_rfc3339(),
            command: command.to_owned(),
            outputs: outputs
                .iter()
                .map(|p| {
                    p.file_name()
                        .map(|n| n.to_string_lossy().into_owned())
                        .unwrap_or_else(|| p.to_string_lossy().into_owned())
                })
                .collect(),
            workers: rayon::current_num_threads(),
        }
    }

    pub fn write(&self, out_dir: &Path) -> Result<PathBuf, CliError> {
        let path = out_dir.join("manifest.json");
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| CliError::Config(e.to_string()))?;
        std::fs::write(&path, text + "\n")?;
        Ok(path)
    }
}
