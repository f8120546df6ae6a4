//! Configuration files.
//!
//! Pipeline configs load from TOML or JSON (chosen by extension, TOML
//! otherwise). The service file is TOML with an optional `port` and an
//! optional `[session]` table used when a create request carries no config.

use std::path::Path;

use serde::{Deserialize, Serialize};
use worldkit_core::PipelineConfig;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("parsing {path}: {message}")]
    Parse { path: String, message: String },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServeConfig {
    #[serde(default)]
    pub port: Option<u16>,
    #[serde(default)]
    pub session: Option<PipelineConfig>,
}

fn read(path: &Path) -> Result<String, ConfigError> {
    std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn parse_err(path: &Path, e: impl ToString) -> ConfigError {
    ConfigError::Parse {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

pub fn parse_pipeline_config(text: &str, json: bool) -> Result<PipelineConfig, String> {
    if json {
        serde_json::from_str(text).map_err(|e| e.to_string())
    } else {
        toml::from_str(text).map_err(|e| e.to_string())
    }
}

pub fn load_pipeline_config(path: &Path) -> Result<PipelineConfig, ConfigError> {
    let json = path.extension().is_some_and(|e| e == "json");
    parse_pipeline_config(&read(path)?, json).map_err(|e| parse_err(path, e))
}

pub fn load_serve_config(path: &Path) -> Result<ServeConfig, ConfigError> {
    toml::from_str(&read(path)?).map_err(|e| parse_err(path, e))
}
