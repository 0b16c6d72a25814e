//! `manifest.json`: everything needed to rerun an output directory.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;

use crate::config::RunConfig;

pub const SNR_CONVENTION: &str = "first scenario: sigma_e^2 = tr(Sigma_t)/(snr*p), \
sigma_f^2 = tr(Sigma_t B^2)/(snr*q), sigma_h^2 = tr(Sigma_t B^2)/(snr*r); \
second scenario: tr(Psi_e) = tr(Psi_f) = tr(Sigma_t)/snr";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    /// Written before any output. A manifest left in this state marks an
    /// interrupted run whose files must not be trusted.
    Running,
    Complete,
    Failed,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: &'static str,
    pub status: RunStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub library_version: &'static str,
    pub cli_version: &'static str,
    pub base_seed: u64,
    pub threads: usize,
    pub started_at: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub finished_at: Option<String>,
    /// Fully resolved configuration, in the `--config` schema.
    pub config: RunConfig,
    /// Files that were written completely.
    pub outputs: Vec<String>,
    pub summary: Value,
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

impl RunManifest {
    pub fn start(command: &'static str, config: &RunConfig, threads: usize) -> Self {
        Self {
            command,
            status: RunStatus::Running,
            error: None,
            library_version: ppls::VERSION,
            cli_version: env!("CARGO_PKG_VERSION"),
            base_seed: config.seed,
            threads,
            started_at: now(),
            finished_at: None,
            config: config.clone(),
            outputs: Vec::new(),
            summary: Value::Null,
        }
    }

    pub fn finish(&mut self, outcome: &Result<()>) {
        self.finished_at = Some(now());
        match outcome {
            Ok(()) => self.status = RunStatus::Complete,
            Err(e) => {
                self.status = RunStatus::Failed;
                self.error = Some(format!("{e:#}"));
            }
        }
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)? + "\n";
        write_atomic(&dir.join("manifest.json"), &text)
    }
}

/// Write via a `.partial` sibling so that a crash never leaves a truncated
/// file under the final name.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".partial");
    fs::write(&tmp, contents).with_context(|| format!("cannot write {}", path.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("cannot write {}", path.display()))
}
