use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::CliError;

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Stage seed derived from the root seed, so stages draw independent streams
/// while the whole run stays a function of one number.
pub fn stage_seed(root: u64, stage: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(root.to_le_bytes());
    h.update(stage.as_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("digest has 32 bytes"))
}

#[derive(Debug, Serialize)]
struct OutputEntry {
    file: String,
    sha256: String,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    config_sha256: String,
    seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    input_sha256: Option<&'a str>,
    config: &'a RunConfig,
    counts: &'a BTreeMap<String, serde_json::Value>,
    outputs: Vec<OutputEntry>,
}

/// Collects output files written into one directory and finishes with a
/// manifest listing each file's digest.
pub struct OutputDir {
    dir: PathBuf,
    files: Vec<(String, String)>,
    pub counts: BTreeMap<String, serde_json::Value>,
    pub input_sha256: Option<String>,
}

impl OutputDir {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir)?;
        Ok(OutputDir {
            dir: dir.to_path_buf(),
            files: Vec::new(),
            counts: BTreeMap::new(),
            input_sha256: None,
        })
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        std::fs::write(self.dir.join(name), bytes)?;
        self.files.push((name.to_string(), sha256_hex(bytes)));
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut s = serde_json::to_string_pretty(value)?;
        s.push('\n');
        self.write(name, s.as_bytes())
    }

    /// Renders rows through a CSV writer into the named file.
    pub fn write_csv<F>(&mut self, name: &str, fill: F) -> Result<(), CliError>
    where
        F: FnOnce(&mut csv::Writer<&mut Vec<u8>>) -> Result<(), CliError>,
    {
        let mut buf = Vec::new();
        {
            let mut w = csv::Writer::from_writer(&mut buf);
            fill(&mut w)?;
            w.flush()?;
        }
        self.write(name, &buf)
    }

    pub fn count(&mut self, key: &str, value: impl Serialize) {
        self.counts
            .insert(key.to_string(), serde_json::to_value(value).unwrap_or(serde_json::Value::Null));
    }

    pub fn finish(self, command: &str, config: &RunConfig) -> Result<(), CliError> {
        let canonical = serde_json::to_vec(config)?;
        let manifest = Manifest {
            tool: "staggerdid",
            version: env!("CARGO_PKG_VERSION"),
            command,
            config_sha256: sha256_hex(&canonical),
            seed: config.seed,
            input_sha256: self.input_sha256.as_deref(),
            config,
            counts: &self.counts,
            outputs: self
                .files
                .iter()
                .map(|(f, h)| OutputEntry {
                    file: f.clone(),
                    sha256: h.clone(),
                })
                .collect(),
        };
        let mut s = serde_json::to_string_pretty(&manifest)?;
        s.push('\n');
        std::fs::write(self.dir.join("manifest.json"), s)?;
        Ok(())
    }
}
