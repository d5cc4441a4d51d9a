//! Named benchmark experiments.
//!
//! Each experiment supplies a preset configuration and knows how to produce its
//! data. The runner only sees the resulting [`Workload`].

use std::path::{Path, PathBuf};

use spsnn_core::data::{gabor, grid_dataset, load_csv, mayas, LabelColumn, LabelMapping};
use spsnn_core::Dataset;

use crate::config::ExperimentConfig;
use crate::error::BenchError;

/// Environment variable naming the directory that holds UCI data files.
pub const DATA_DIR_ENV: &str = "SPSNN_DATA_DIR";

pub enum Workload {
    /// Fixed training and test sets, compared over a learning-rate sweep.
    Grid { train: Dataset, test: Dataset },
    /// One labelled set, compared over repeated k-fold cross validation.
    CrossValidation { data: Dataset },
}

pub trait Experiment: Send + Sync {
    fn name(&self) -> &'static str;

    fn summary(&self) -> &'static str;

    fn defaults(&self) -> ExperimentConfig;

    fn workload(&self, config: &ExperimentConfig) -> Result<Workload, BenchError>;
}

struct Mayas;
struct Gabor;
struct Sonar;
struct Pima;
struct Custom;

static EXPERIMENTS: &[&dyn Experiment] = &[&Mayas, &Gabor, &Sonar, &Pima, &Custom];

pub fn experiments() -> &'static [&'static dyn Experiment] {
    EXPERIMENTS
}

pub fn find_experiment(name: &str) -> Result<&'static dyn Experiment, BenchError> {
    EXPERIMENTS
        .iter()
        .copied()
        .find(|e| e.name() == name)
        .ok_or_else(|| {
            let names: Vec<&str> = EXPERIMENTS.iter().map(|e| e.name()).collect();
            BenchError::Config(format!(
                "unknown experiment `{name}`; available: {}",
                names.join(", ")
            ))
        })
}

/// `$SPSNN_DATA_DIR`, else `./data` when it exists, else the workspace `data/`.
pub fn data_dir() -> PathBuf {
    if let Some(dir) = std::env::var_os(DATA_DIR_ENV) {
        return PathBuf::from(dir);
    }
    let local = PathBuf::from("data");
    if local.is_dir() {
        return local;
    }
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

const GRID_LO: f64 = -0.5;
const GRID_HI: f64 = 0.5;
const TRAIN_STEPS: usize = 6;
const TEST_STEPS: usize = 20;

fn grid_workload(name: &str, f: impl Fn(f64, f64) -> f64 + Copy) -> Result<Workload, BenchError> {
    Ok(Workload::Grid {
        train: grid_dataset(name, f, GRID_LO, GRID_HI, TRAIN_STEPS)?,
        test: grid_dataset(name, f, GRID_LO, GRID_HI, TEST_STEPS)?,
    })
}

fn load_uci(
    name: &str,
    file: &str,
    config: &ExperimentConfig,
    mapping: LabelMapping,
) -> Result<Workload, BenchError> {
    let path = match &config.data_file {
        Some(p) => PathBuf::from(p),
        None => data_dir().join(file),
    };
    if !path.is_file() {
        return Err(BenchError::MissingData {
            name: name.to_string(),
            file: file.to_string(),
            path,
        });
    }
    let column = config
        .label_column
        .map_or(LabelColumn::Last, LabelColumn::Index);
    let mapping = if config.labels.is_empty() {
        mapping
    } else {
        LabelMapping::Map(config.labels.iter().map(|(k, v)| (k.clone(), *v)).collect())
    };
    Ok(Workload::CrossValidation {
        data: load_csv(&path, column, &mapping)?,
    })
}

impl Experiment for Mayas {
    fn name(&self) -> &'static str {
        "mayas"
    }

    fn summary(&self) -> &'static str {
        "0.26(x²+y²) − 0.48xy on a 6×6 training grid, 20×20 test grid"
    }

    fn defaults(&self) -> ExperimentConfig {
        ExperimentConfig::base(self.name())
    }

    fn workload(&self, _config: &ExperimentConfig) -> Result<Workload, BenchError> {
        grid_workload(self.name(), mayas)
    }
}

impl Experiment for Gabor {
    fn name(&self) -> &'static str {
        "gabor"
    }

    fn summary(&self) -> &'static str {
        "Gabor function on a 6×6 training grid, 20×20 test grid"
    }

    fn defaults(&self) -> ExperimentConfig {
        ExperimentConfig {
            structural_eta: 0.009,
            ..ExperimentConfig::base(self.name())
        }
    }

    fn workload(&self, config: &ExperimentConfig) -> Result<Workload, BenchError> {
        let corrected = !config.gabor_literal_sign;
        grid_workload(self.name(), move |x, y| gabor(x, y, corrected))
    }
}

fn classification_preset(name: &str, hidden: usize) -> ExperimentConfig {
    ExperimentConfig {
        hidden,
        etas: vec![0.01],
        structural_eta: 0.01,
        task: "classification".to_string(),
        ..ExperimentConfig::base(name)
    }
}

impl Experiment for Sonar {
    fn name(&self) -> &'static str {
        "sonar"
    }

    fn summary(&self) -> &'static str {
        "UCI sonar, mines vs rocks (208 × 60), repeated 4-fold cross validation"
    }

    fn defaults(&self) -> ExperimentConfig {
        classification_preset(self.name(), 3)
    }

    fn workload(&self, config: &ExperimentConfig) -> Result<Workload, BenchError> {
        load_uci(self.name(), "sonar.all-data", config, LabelMapping::sonar())
    }
}

impl Experiment for Pima {
    fn name(&self) -> &'static str {
        "pima"
    }

    fn summary(&self) -> &'static str {
        "UCI Pima Indians diabetes (768 × 8), repeated 4-fold cross validation"
    }

    fn defaults(&self) -> ExperimentConfig {
        classification_preset(self.name(), 4)
    }

    fn workload(&self, config: &ExperimentConfig) -> Result<Workload, BenchError> {
        load_uci(
            self.name(),
            "pima-indians-diabetes.data",
            config,
            LabelMapping::Numeric,
        )
    }
}

impl Experiment for Custom {
    fn name(&self) -> &'static str {
        "custom"
    }

    fn summary(&self) -> &'static str {
        "any CSV given by `data_file`, repeated k-fold cross validation"
    }

    fn defaults(&self) -> ExperimentConfig {
        classification_preset(self.name(), 3)
    }

    fn workload(&self, config: &ExperimentConfig) -> Result<Workload, BenchError> {
        if config.data_file.is_none() {
            return Err(BenchError::Config(
                "the custom experiment needs `data_file` (or --data)".into(),
            ));
        }
        load_uci(self.name(), "<data_file>", config, LabelMapping::Numeric)
    }
}
