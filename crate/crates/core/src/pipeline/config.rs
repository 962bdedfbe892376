//! Pipeline settings and their TOML file form.
//!
//! ```toml
//! mode = "logpolar"
//!
//! [logpolar]
//! base = 2
//! inner_ratio = 0.0222
//!
//! [mlp]
//! features = 40
//! hidden1 = 40
//! hidden2 = 25
//! eta0 = 0.02
//! alpha = 0.9
//! objective = "mse"
//!
//! [split]
//! per_class_train = 5
//! mode = "first-k"
//!
//! [eval]
//! threshold = 0.0
//! ```
//!
//! Every key is optional; missing keys keep their defaults.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Mode, SplitSpec};
use crate::error::{Error, Result};
use crate::logpolar::LogPolarConfig;
use crate::mlp::{Hyperparams, Objective};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineConfig {
    pub mode: Mode,
    pub logpolar: LogPolarConfig,
    pub hyper: Hyperparams,
    /// Eigenvectors kept, which is also the network input width.
    pub features: usize,
    pub hidden1: usize,
    pub hidden2: usize,
    pub split: SplitSpec,
    /// Winning-score threshold below which a test image counts as rejected.
    pub threshold: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            mode: Mode::LogPolar,
            logpolar: LogPolarConfig::default(),
            hyper: Hyperparams::default(),
            features: 40,
            hidden1: 40,
            hidden2: 25,
            split: SplitSpec::default(),
            threshold: 0.0,
        }
    }
}

impl PipelineConfig {
    /// `[features, hidden1, hidden2, classes]`.
    pub fn layer_sizes(&self, classes: usize) -> Vec<usize> {
        vec![self.features, self.hidden1, self.hidden2, classes]
    }

    pub fn validate(&self) -> Result<()> {
        self.logpolar.validate()?;
        self.hyper.validate()?;
        if self.features == 0 || self.hidden1 == 0 || self.hidden2 == 0 {
            return Err(Error::invalid("layer widths must be positive"));
        }
        if self.threshold.is_nan() {
            return Err(Error::invalid("threshold must not be NaN"));
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: ConfigFile = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let cfg = file.into_config();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        PipelineConfig::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(&ConfigFile::from_config(self)).expect("config serializes")
    }
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    mode: Option<Mode>,
    #[serde(default)]
    logpolar: LogPolarConfig,
    #[serde(default)]
    mlp: MlpSection,
    #[serde(default)]
    split: SplitSpec,
    #[serde(default)]
    eval: EvalSection,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct MlpSection {
    features: usize,
    hidden1: usize,
    hidden2: usize,
    eta0: f64,
    alpha: f64,
    rate_increase: f64,
    rate_decrease: f64,
    smoothing: f64,
    max_epochs: usize,
    goal: f64,
    e_max: f64,
    seed: u64,
    objective: Objective,
}

impl Default for MlpSection {
    fn default() -> Self {
        let d = PipelineConfig::default();
        MlpSection::from_config(&d)
    }
}

impl MlpSection {
    fn from_config(c: &PipelineConfig) -> Self {
        let h = &c.hyper;
        MlpSection {
            features: c.features,
            hidden1: c.hidden1,
            hidden2: c.hidden2,
            eta0: h.eta0,
            alpha: h.alpha,
            rate_increase: h.rate_increase,
            rate_decrease: h.rate_decrease,
            smoothing: h.smoothing,
            max_epochs: h.max_epochs,
            goal: h.goal,
            e_max: h.e_max,
            seed: h.seed,
            objective: h.objective,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct EvalSection {
    threshold: f64,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection { threshold: 0.0 }
    }
}

impl ConfigFile {
    fn into_config(self) -> PipelineConfig {
        let m = self.mlp;
        PipelineConfig {
            mode: self.mode.unwrap_or(Mode::LogPolar),
            logpolar: self.logpolar,
            hyper: Hyperparams {
                eta0: m.eta0,
                alpha: m.alpha,
                rate_increase: m.rate_increase,
                rate_decrease: m.rate_decrease,
                smoothing: m.smoothing,
                max_epochs: m.max_epochs,
                goal: m.goal,
                e_max: m.e_max,
                seed: m.seed,
                objective: m.objective,
            },
            features: m.features,
            hidden1: m.hidden1,
            hidden2: m.hidden2,
            split: self.split,
            threshold: self.eval.threshold,
        }
    }

    fn from_config(c: &PipelineConfig) -> Self {
        ConfigFile {
            mode: Some(c.mode),
            logpolar: c.logpolar,
            mlp: MlpSection::from_config(c),
            split: c.split,
            eval: EvalSection {
                threshold: c.threshold,
            },
        }
    }
}
