//! Resolved configuration: defaults, then the `--config` JSON file, then
//! explicit flags.

use std::path::Path;

use serde::{Deserialize, Serialize};
use workr::harness::{AblationMode, ExperimentConfig, ModelKind, TableFormat};
use workr::ingest::WindowConfig;
use workr::synthgen::{OccupationProfile, SynthConfig};

use crate::CliError;

/// Every knob a command can read. All fields are optional in the JSON file.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CliConfig {
    /// Base seed. `synth.seed` and `experiment.seeds` are derived from it.
    pub seed: u64,
    /// Runs per experiment, with seeds `seed, seed + 1, …`.
    pub repeats: usize,
    pub strict: bool,
    pub format: TableFormat,
    /// Adds a generation timestamp to table metadata, which makes tables
    /// differ between runs.
    pub timestamp: bool,
    pub synth: SynthConfig,
    /// Replaces the built-in occupation profiles.
    pub profiles: Option<Vec<OccupationProfile>>,
    pub window: WindowConfig,
    pub experiment: ExperimentConfig,
    pub model: ModelKind,
    /// Mask letters or `none`.
    pub features: String,
    pub latent: String,
    pub mode: AblationMode,
}

impl Default for CliConfig {
    fn default() -> Self {
        CliConfig {
            seed: 1,
            repeats: 5,
            strict: false,
            format: TableFormat::Markdown,
            timestamp: false,
            synth: SynthConfig::default(),
            profiles: None,
            window: WindowConfig::default(),
            experiment: ExperimentConfig::default(),
            model: ModelKind::Gbm,
            features: "PAS".into(),
            latent: "none".into(),
            mode: AblationMode::Preprocessed,
        }
    }
}

impl CliConfig {
    pub fn load(path: Option<&Path>) -> Result<CliConfig, CliError> {
        let Some(path) = path else {
            return Ok(CliConfig::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))
    }

    /// Fills the derived fields.
    pub fn resolve(&mut self) -> Result<(), CliError> {
        if self.repeats == 0 {
            return Err(CliError::Usage("repeats must be positive".into()));
        }
        self.synth.seed = self.seed;
        self.experiment.seeds = (0..self.repeats as u64).map(|i| self.seed + i).collect();
        Ok(())
    }
}
