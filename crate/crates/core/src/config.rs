//! Engine configuration, read from TOML.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    /// Seed for every sampled field (profiles, value candidates).
    pub seed: u64,
    /// Cap on sampled unique values and frequency lists.
    pub sample_cap: usize,
    pub categorical_threshold: usize,
    /// Rows shown per table in the data view.
    pub display_rows: usize,
    /// Rows of each input table used to compute previews.
    pub preview_rows: usize,
    /// Column count the client can show before highlighted columns are anchored.
    pub visible_columns: usize,
    /// Largest prompt, in characters, before data context is trimmed.
    pub prompt_budget: usize,
    /// Directory that relative `read_csv` paths resolve against.
    pub data_dir: PathBuf,
    pub model: ModelConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub enabled: bool,
    /// Use fixture responses instead of an HTTP endpoint.
    pub mock: bool,
    pub fixtures: Option<PathBuf>,
    /// Overridden by `DATAWISE_MODEL_ENDPOINT`.
    pub endpoint: Option<String>,
    pub timeout_ms: u64,
    pub max_tokens: u32,
    /// Model candidates surfaced per request.
    pub max_items: usize,
    pub debounce_ms: u64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            sample_cap: 50,
            categorical_threshold: crate::frame::DEFAULT_CATEGORICAL_THRESHOLD,
            display_rows: 15,
            preview_rows: 200,
            visible_columns: 8,
            prompt_budget: 6000,
            data_dir: PathBuf::from("."),
            model: ModelConfig::default(),
        }
    }
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            mock: true,
            fixtures: None,
            endpoint: None,
            timeout_ms: 10_000,
            max_tokens: 128,
            max_items: 2,
            debounce_ms: 300,
        }
    }
}

impl EngineConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let config: EngineConfig = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut config = Self::from_toml(&text)?;
        // Relative paths in a config file are relative to that file.
        if let Some(dir) = path.parent() {
            if config.data_dir.is_relative() {
                config.data_dir = dir.join(&config.data_dir);
            }
            if let Some(f) = &config.model.fixtures {
                if f.is_relative() {
                    config.model.fixtures = Some(dir.join(f));
                }
            }
        }
        Ok(config)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let positive = [
            ("sample_cap", self.sample_cap),
            ("display_rows", self.display_rows),
            ("preview_rows", self.preview_rows),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(ConfigError::Invalid(format!("{name} must be at least 1")));
            }
        }
        if self.display_rows > self.preview_rows {
            return Err(ConfigError::Invalid("display_rows exceeds preview_rows".into()));
        }
        Ok(())
    }
}
