//! Resolved run configuration: the single document echoed into every
//! artifact, also loadable from a file with `--config`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::CliError;

pub const CONFIG_VERSION: u64 = 1;

/// Flat parameter block shared by all subcommands; unset fields are omitted
/// from the echo. Loaded documents reject unknown fields so typos fail loudly
/// instead of silently running defaults.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub version: u64,
    /// Space-joined subcommand path, e.g. "entropy estimate". A loaded file
    /// carrying a different command is rejected.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub command: Option<String>,

    // object sources (path or preset name)
    #[serde(skip_serializing_if = "Option::is_none")]
    pub body: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub polytope: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metric: Option<String>,

    // body build parameters
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cube_p: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scheme: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sharpness: Option<f64>,

    // comparison / check parameters
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kind: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub resolution: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,

    // flow / estimator parameters
    #[serde(skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub method: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", rename = "T")]
    pub horizon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", rename = "N")]
    pub ensemble: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub start: Option<[f64; 4]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sample_interval: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rtol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub atol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub renorm_interval: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub separation: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub segments: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub schedule: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub members: Option<usize>,
}

impl RunConfig {
    pub fn new(command: &str) -> Self {
        RunConfig {
            version: CONFIG_VERSION,
            command: Some(command.to_string()),
            ..RunConfig::default()
        }
    }

    /// Loads a config file and pins it to the invoked command.
    pub fn load(path: &Path, command: &str) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::config(format!("invalid config {}: {e}", path.display())))?;
        if cfg.version != CONFIG_VERSION {
            return Err(CliError::config(format!(
                "config version {} unsupported (expected {CONFIG_VERSION})",
                cfg.version
            )));
        }
        match &cfg.command {
            Some(c) if c != command => {
                return Err(CliError::config(format!(
                    "config is for `{c}`, but `{command}` was invoked"
                )))
            }
            _ => cfg.command = Some(command.to_string()),
        }
        Ok(cfg)
    }
}

/// Flag value wins over config-file value wins over default.
pub fn pick<T: Clone>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}

/// As `pick`, for parameters with no meaningful default.
pub fn pick_required<T: Clone>(
    flag: Option<T>,
    file: Option<T>,
    what: &str,
) -> Result<T, CliError> {
    flag.or(file)
        .ok_or_else(|| CliError::config(format!("missing required parameter `{what}`")))
}
