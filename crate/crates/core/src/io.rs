//! Self-describing output files: a single `#`-prefixed JSON header line
//! followed by a CSV or JSON body.

use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::Result;

pub const TOOL: &str = "gelfand";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Serialize)]
pub struct Header {
    pub tool: &'static str,
    pub version: &'static str,
    /// hex SHA-256 of the run configuration serialized as JSON
    pub config_hash: String,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<u64>,
    /// command-specific metadata
    #[serde(skip_serializing_if = "serde_json::Value::is_null")]
    pub meta: serde_json::Value,
}

/// Hex SHA-256 of `config` as compact JSON.
pub fn config_hash(config: &impl Serialize) -> Result<String> {
    let bytes = serde_json::to_vec(config)?;
    let digest = Sha256::digest(&bytes);
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

impl Header {
    pub fn new(config: &impl Serialize, seed: u64, timestamp: bool) -> Result<Self> {
        let timestamp = timestamp.then(|| SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()));
        Ok(Self {
            tool: TOOL,
            version: VERSION,
            config_hash: config_hash(config)?,
            seed,
            timestamp,
            meta: serde_json::Value::Null,
        })
    }

    pub fn with_meta(&self, meta: serde_json::Value) -> Self {
        Self { meta, ..self.clone() }
    }

    pub fn line(&self) -> String {
        format!("# {}\n", serde_json::to_string(self).expect("header serializes"))
    }
}

/// Writes the header line followed by `body`.
pub fn write_artifact(path: impl AsRef<Path>, header: &Header, body: &str) -> Result<()> {
    let mut text = header.line();
    text.push_str(body);
    if !body.ends_with('\n') {
        text.push('\n');
    }
    std::fs::write(path, text)?;
    Ok(())
}

/// Splits an artifact into its parsed header and body.
pub fn read_artifact(path: impl AsRef<Path>) -> Result<(serde_json::Value, String)> {
    let text = std::fs::read_to_string(path)?;
    let (first, body) = text.split_once('\n').unwrap_or((&text, ""));
    let json = first
        .strip_prefix("# ")
        .ok_or_else(|| crate::Error::Parse("artifact does not start with a '# ' header line".into()))?;
    Ok((serde_json::from_str(json)?, body.to_string()))
}
