//! Service configuration: listen addresses, access control, and rule files
//! to preinstall on the node.

use std::fs;
use std::path::{Path, PathBuf};

use cghf_core::nbi::NbiConfig;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

fn default_http_bind() -> String {
    "127.0.0.1:8080".to_string()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ServiceConfig {
    /// HTTP listen address; port 0 picks a free one.
    #[serde(default = "default_http_bind")]
    pub http_bind: String,
    /// Line-protocol listen address; omit to disable that front.
    #[serde(default)]
    pub line_bind: Option<String>,
    /// When set, the node ticks itself this often with wall-clock time;
    /// leave unset to drive ticks through the admin endpoint only.
    #[serde(default)]
    pub tick_interval_ms: Option<u64>,
    pub nbi: NbiConfig,
    /// Rule files installed at startup, in order, relative to this file.
    #[serde(default)]
    pub rules: Vec<String>,
}

impl ServiceConfig {
    /// Read a config file and the rule texts it references.
    pub fn read(path: impl AsRef<Path>) -> Result<(ServiceConfig, Vec<(String, String)>), ConfigError> {
        let path = path.as_ref();
        let config: ServiceConfig = serde_json::from_str(&fs::read_to_string(path)?)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."));
        let mut rules = Vec::new();
        for file in &config.rules {
            rules.push((file.clone(), fs::read_to_string(base.join(file))?));
        }
        Ok((config, rules))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_defaults() {
        let c: ServiceConfig = serde_json::from_value(serde_json::json!({
            "nbi": { "principals": [] }
        }))
        .unwrap();
        assert_eq!(c.http_bind, "127.0.0.1:8080");
        assert!(c.line_bind.is_none());
        assert!(c.tick_interval_ms.is_none());
        assert!(c.rules.is_empty());
    }
}
