//! Run configuration, loadable from TOML with command-line overrides.

use std::path::{Path, PathBuf};

use handface_core::corpus::CorpusConfig;
use handface_core::eval::LosoConfig;
use handface_core::nn::{ModelConfig, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Master seed. Copied into `corpus.seed` and `train.seed` by
    /// [`RunConfig::resolved`].
    pub seed: u64,
    pub corpus: CorpusConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
    /// Window step used for training windows by `train`.
    pub train_step: usize,
    pub evaluation: LosoConfig,
    /// Replace the network by a predictor that returns the true labels.
    pub oracle: bool,
    pub serve: ServeConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            corpus: CorpusConfig::default(),
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            train_step: 1,
            evaluation: LosoConfig::default(),
            oracle: false,
            serve: ServeConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SourceConfig {
    /// Simulate a session of the configured corpus on the fly.
    Live { subject: u32, session: u32 },
    /// Stream a recorded session file.
    Replay { path: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StartTrigger {
    /// Playback starts when the first client connects.
    FirstClient,
    /// Playback starts with the first `start_session` message.
    SessionStart,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServeConfig {
    pub host: String,
    pub port: u16,
    /// Playback speed relative to the sample rate.
    pub speed: f64,
    pub source: SourceConfig,
    pub start: StartTrigger,
}

impl Default for ServeConfig {
    fn default() -> Self {
        Self {
            host: "127.0.0.1".into(),
            port: 8765,
            speed: 1.0,
            source: SourceConfig::Live { subject: 1, session: 1 },
            start: StartTrigger::FirstClient,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io { path: path.to_path_buf(), msg: e.to_string() })?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// Applies the master seed to every seeded component.
    pub fn resolved(mut self) -> Self {
        self.corpus.seed = self.seed;
        self.train.seed = self.seed;
        self
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config always serializes")
    }
}
