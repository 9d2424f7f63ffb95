use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extractors::ExtractorSpec;
use crate::lab::DEFAULT_GRID_SIZE;
use crate::scorers::ScorerWorkers;
use crate::search::SearchConfig;

/// JSON run configuration. Unknown keys are rejected.
///
/// ```json
/// {
///   "steps": 5, "candidates": 20, "seed": 7, "include_zero_endpoint": true,
///   "lambda": 2.5, "alpha": 4.0,
///   "extractor": {"kind": "leaky_linear", "params": {"kappa": 0.5}},
///   "scorer_workers": {"quality": null, "spksim": null}
/// }
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub steps: usize,
    pub candidates: usize,
    pub seed: u64,
    pub include_zero_endpoint: bool,
    pub lambda: f64,
    pub alpha: f64,
    pub extractor: ExtractorSpec,
    pub scorer_workers: ScorerWorkers,
    #[serde(default = "yes")]
    pub parallel: bool,
    #[serde(default)]
    pub early_stop: bool,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    /// Lipschitz probe grid for `analyze`.
    #[serde(default = "default_grid")]
    pub grid_size: usize,
    /// Perturbation scales for `analyze --mode var_bound`.
    #[serde(default = "default_epsilons")]
    pub epsilon_r: Vec<f64>,
    #[serde(default = "default_trials")]
    pub trials: usize,
}

fn yes() -> bool {
    true
}

fn default_tolerance() -> f64 {
    1e-7
}

fn default_grid() -> usize {
    DEFAULT_GRID_SIZE
}

fn default_epsilons() -> Vec<f64> {
    vec![0.01, 0.05]
}

fn default_trials() -> usize {
    1000
}

impl RunConfig {
    /// Defaults with the given extractor.
    pub fn with_extractor(extractor: ExtractorSpec) -> Self {
        Self {
            steps: 5,
            candidates: 20,
            seed: 0,
            include_zero_endpoint: true,
            lambda: 2.5,
            alpha: 4.0,
            extractor,
            scorer_workers: ScorerWorkers::default(),
            parallel: true,
            early_stop: false,
            tolerance: default_tolerance(),
            grid_size: DEFAULT_GRID_SIZE,
            epsilon_r: default_epsilons(),
            trials: default_trials(),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::config(format!("bad config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn search_config(&self) -> SearchConfig {
        SearchConfig {
            steps: self.steps,
            candidates: self.candidates,
            include_zero_endpoint: self.include_zero_endpoint,
            seed: self.seed,
            tolerance: self.tolerance,
            early_stop: self.early_stop,
            parallel: self.parallel,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.search_config().validate()?;
        self.extractor.validate()?;
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::config(format!("lambda {} must be positive", self.lambda)));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::config(format!("alpha {} must be positive", self.alpha)));
        }
        if self.grid_size < 3 {
            return Err(Error::config("grid_size must be at least 3"));
        }
        if self.epsilon_r.iter().any(|e| !(*e >= 0.0 && e.is_finite())) {
            return Err(Error::config("epsilon_r values must be non-negative"));
        }
        if self.trials < 100 {
            return Err(Error::config("trials must be at least 100"));
        }
        if let Some(t) = self.scorer_workers.timeout_secs {
            if !(t > 0.0) {
                return Err(Error::config("scorer_workers.timeout_secs must be positive"));
            }
        }
        Ok(())
    }
}
