use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use windlayout::driver::RunConfig;
use windlayout::{Error, Result};

use crate::Command;

pub const MANIFEST_FILE: &str = "manifest.json";

/// Written next to every output set; `windlayout rerun` replays it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    /// Resolved input files by role.
    pub inputs: BTreeMap<String, PathBuf>,
    /// The command with every path made absolute.
    pub command: Command,
    /// Effective run settings, when the command optimizes.
    pub config: Option<RunConfig>,
    pub seed: Option<u64>,
    pub started_at: DateTime<Utc>,
    pub finished_at: DateTime<Utc>,
}

impl RunManifest {
    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n")?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.line(),
            message: e.to_string(),
        })
    }
}
