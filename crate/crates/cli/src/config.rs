//! Versioned JSON configuration files.
//!
//! A config file is the serialized configuration plus a `version` field.
//! A run manifest is accepted as well; its embedded config is used, which
//! makes `--config run.manifest.json` replay that run.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Versioned<T> {
    pub version: u32,
    #[serde(flatten)]
    pub config: T,
}

impl<T> Versioned<T> {
    pub fn new(config: T) -> Self {
        Versioned {
            version: CONFIG_VERSION,
            config,
        }
    }
}

pub fn parse<T: DeserializeOwned>(text: &str) -> Result<T> {
    let mut value: serde_json::Value = serde_json::from_str(text)?;
    if value.get("manifest_version").is_some() {
        value = value
            .get_mut("config")
            .map(serde_json::Value::take)
            .context("manifest has no config")?;
    }
    let version = value
        .get("version")
        .and_then(serde_json::Value::as_u64)
        .context("config needs a version field")?;
    if version != u64::from(CONFIG_VERSION) {
        bail!("unsupported config version {version}");
    }
    let parsed: Versioned<T> = serde_json::from_value(value)?;
    Ok(parsed.config)
}

pub fn load<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse(&text).with_context(|| format!("parsing {}", path.display()))
}

pub fn to_value<T: Serialize + Clone>(config: &T) -> serde_json::Value {
    serde_json::to_value(Versioned::new(config.clone())).expect("config serializes")
}
