//! The resolved run configuration: TOML file values overridden by flags.

use crate::error::CliError;
use graphomotor::boost::{GbtConfig, Grid};
use graphomotor::stats::{Confound, Target, DEFAULT_ALPHA};
use graphomotor::synth::CohortSpec;
use graphomotor::FeatureConfig;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub inputs: Vec<PathBuf>,
    pub output: PathBuf,
    /// Restrict analysis and modelling to one class year.
    pub class_year: Option<u8>,
    pub features: FeatureConfig,
    pub stats: StatsConfig,
    pub model: ModelConfig,
    pub synth: CohortSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            inputs: Vec::new(),
            output: PathBuf::from("."),
            class_year: None,
            features: FeatureConfig::default(),
            stats: StatsConfig::default(),
            model: ModelConfig::default(),
            synth: CohortSpec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StatsConfig {
    pub alpha: f64,
    /// Regressed out of every feature before testing.
    pub confound: Option<Confound>,
    pub targets: Vec<Target>,
    /// Rows of the per-target summary.
    pub top_k: usize,
}

impl Default for StatsConfig {
    fn default() -> Self {
        StatsConfig { alpha: DEFAULT_ALPHA, confound: None, targets: Target::ALL.to_vec(), top_k: 5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub target: Target,
    pub n_iter: usize,
    pub seed: u64,
    pub folds: usize,
    pub repeats: usize,
    /// Regressed out of the whole matrix before the search.
    pub confound: Option<Confound>,
    /// Regressed out inside each training fold instead.
    pub confound_within_folds: Option<Confound>,
    pub grid: Grid,
    /// Values of the hyperparameters outside the grid.
    pub base: GbtConfig,
    /// Features in the SHAP summary.
    pub shap_top_k: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            target: Target::Diagnosis,
            n_iter: 500,
            seed: 0,
            folds: 10,
            repeats: 10,
            confound: None,
            confound_within_folds: None,
            grid: Grid::default(),
            base: GbtConfig::default(),
            shap_top_k: 10,
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else { return Ok(RunConfig::default()) };
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        toml::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }

    pub fn check(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Usage(m));
        if !(self.stats.alpha > 0.0 && self.stats.alpha < 1.0) {
            return bad(format!("alpha must be in (0, 1), got {}", self.stats.alpha));
        }
        if let Some(y) = self.class_year {
            if !(3..=4).contains(&y) {
                return bad(format!("class year must be 3 or 4, got {y}"));
            }
        }
        if self.model.confound.is_some() && self.model.confound_within_folds.is_some() {
            return bad("use either --confound or --confound-within-folds, not both".into());
        }
        if self.features.entropy_bins == 0 {
            return bad("entropy bins must be at least 1".into());
        }
        self.model.base.check().map_err(CliError::Usage)?;
        self.model.grid.check().map_err(CliError::Usage)?;
        self.synth.check().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(())
    }

    /// Single-line JSON, as embedded in artifacts.
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}
