//! Experiment configuration.
//!
//! A run starts from the named experiment's preset, then applies the keys of an
//! optional TOML file, then command-line overrides. The file uses the field
//! names of [`ExperimentConfig`]:
//!
//! ```toml
//! experiment = "gabor"
//! trials = 5
//! etas = [0.01, 0.05]
//! lambda = 1e-4
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use spsnn_core::regularizer::{build_penalty, SmoothingSpec};
use spsnn_core::{ActivationKind, Task, TrainConfig};

use crate::error::BenchError;

/// Which error curves are written to `curves/`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CurveMode {
    /// Only the first trial (and first fold).
    First,
    All,
    None,
}

impl FromStr for CurveMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "first" => Ok(CurveMode::First),
            "all" => Ok(CurveMode::All),
            "none" => Ok(CurveMode::None),
            other => Err(format!("unknown curve mode `{other}` (first, all, none)")),
        }
    }
}

impl fmt::Display for CurveMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CurveMode::First => "first",
            CurveMode::All => "all",
            CurveMode::None => "none",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: String,
    /// Order of the complete basis searched by structural optimization.
    pub order: usize,
    /// Width N of the first summation layer.
    pub hidden: usize,
    /// Independent initializations per η (grid) or per round (cross validation).
    pub trials: usize,
    /// Repetitions of k-fold cross validation, each with a fresh fold split.
    pub rounds: usize,
    pub folds: usize,
    pub seed: u64,
    /// Learning rates for refinement and the baseline. Cross validation takes exactly one.
    pub etas: Vec<f64>,
    /// Learning rate of structural optimization.
    pub structural_eta: f64,
    pub lambda: f64,
    /// Smoothing half-width of the penalty.
    pub a: f64,
    pub penalty: String,
    pub iters_structural: usize,
    pub iters_refine: usize,
    /// Initial weights are uniform on `[-init_range, init_range]`.
    pub init_range: f64,
    pub hidden_activation: String,
    pub task: String,
    pub keep_constant: bool,
    pub gabor_literal_sign: bool,
    /// Overrides the dataset location; required by `custom`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data_file: Option<String>,
    /// Zero-based label column; the last column when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label_column: Option<usize>,
    /// Label text to target value; labels are parsed as numbers when empty.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub labels: BTreeMap<String, f64>,
    /// Min-max scale features per training fold.
    pub scale: bool,
    pub curves: CurveMode,
    pub output_dir: String,
}

impl ExperimentConfig {
    /// Shared defaults; experiment presets adjust from here.
    pub fn base(experiment: &str) -> Self {
        Self {
            experiment: experiment.to_string(),
            order: 3,
            hidden: 3,
            trials: 20,
            rounds: 5,
            folds: 4,
            seed: 1,
            etas: vec![0.001, 0.005, 0.01, 0.05, 0.1],
            structural_eta: 0.005,
            lambda: 1e-4,
            a: spsnn_core::regularizer::DEFAULT_SMOOTHING_WIDTH,
            penalty: "smoothed-l12".to_string(),
            iters_structural: 5000,
            iters_refine: 5000,
            init_range: 0.5,
            hidden_activation: "logistic".to_string(),
            task: "approximation".to_string(),
            keep_constant: false,
            gabor_literal_sign: false,
            data_file: None,
            label_column: None,
            labels: BTreeMap::new(),
            scale: true,
            curves: CurveMode::First,
            output_dir: format!("runs/{experiment}"),
        }
    }

    /// Applies the keys of a TOML document on top of `self`. Unknown keys are errors.
    pub fn merge_toml(&self, text: &str) -> Result<Self, BenchError> {
        let overrides: toml::Table =
            toml::from_str(text).map_err(|e| BenchError::Config(format!("config file: {e}")))?;
        let mut merged = match toml::Value::try_from(self) {
            Ok(toml::Value::Table(t)) => t,
            _ => return Err(BenchError::Config("cannot serialize preset".into())),
        };
        for (k, v) in overrides {
            merged.insert(k, v);
        }
        toml::Value::Table(merged)
            .try_into()
            .map_err(|e| BenchError::Config(format!("config file: {e}")))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).unwrap_or_default()
    }

    pub fn task(&self) -> Result<Task, BenchError> {
        self.task
            .parse()
            .map_err(|e: spsnn_core::trainer::TrainError| BenchError::Config(e.to_string()))
    }

    pub fn hidden_activation(&self) -> Result<ActivationKind, BenchError> {
        let g: ActivationKind = self
            .hidden_activation
            .parse()
            .map_err(|e: spsnn_core::network::NetworkError| BenchError::Config(e.to_string()))?;
        g.check_hidden()
            .map_err(|e| BenchError::Config(e.to_string()))?;
        Ok(g)
    }

    pub fn smoothing(&self) -> Result<SmoothingSpec, BenchError> {
        SmoothingSpec::new(self.a, self.lambda).map_err(|e| BenchError::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        let bad = |msg: String| Err(BenchError::Config(msg));
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.rounds == 0 {
            return bad("rounds must be at least 1".into());
        }
        if self.folds < 2 {
            return bad(format!("folds must be at least 2, got {}", self.folds));
        }
        if self.order == 0 || self.hidden == 0 {
            return bad("order and hidden must be at least 1".into());
        }
        if self.etas.is_empty() {
            return bad("need at least one learning rate".into());
        }
        if let Some(eta) = self
            .etas
            .iter()
            .chain(std::iter::once(&self.structural_eta))
            .find(|e| !(**e > 0.0 && e.is_finite()))
        {
            return bad(format!("learning rates must be positive, got {eta}"));
        }
        if self.lambda <= 0.0 {
            return bad(format!(
                "structural optimization needs lambda > 0, got {}",
                self.lambda
            ));
        }
        if self.iters_structural == 0 || self.iters_refine == 0 {
            return bad("iteration budgets must be at least 1".into());
        }
        let spec = self.smoothing()?;
        build_penalty(&self.penalty, spec).map_err(|e| BenchError::Config(e.to_string()))?;
        self.task()?;
        self.hidden_activation()?;
        Ok(())
    }

    /// Trainer settings for one run at learning rate `eta` and initialization `seed`.
    pub fn train_config(&self, eta: f64, seed: u64) -> Result<TrainConfig, BenchError> {
        Ok(TrainConfig {
            eta,
            smoothing: self.smoothing()?,
            penalty: self.penalty.clone(),
            n_hidden: self.hidden,
            max_iter_structural: self.iters_structural,
            max_iter_refine: self.iters_refine,
            seed,
            init_range: self.init_range,
            task: self.task()?,
            hidden_activation: self.hidden_activation()?,
            keep_constant: self.keep_constant,
        })
    }

    pub fn output_path(&self) -> &Path {
        Path::new(&self.output_dir)
    }
}
