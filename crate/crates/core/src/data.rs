//! Benchmark datasets: analytic targets on grids, CSV ingestion, min-max
//! scaling and seeded k-fold splits.
//!
//! Every sample carries `M + 1` inputs, the last being the constant `−1`
//! bias input. Callers only ever supply the `M` real features.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Value of the bias input appended to every sample.
pub const BIAS_INPUT: f64 = -1.0;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("row {row}: {msg}")]
    Parse { row: usize, msg: String },
    #[error("row {row}: unknown label `{label}`")]
    UnknownLabel { row: usize, label: String },
    #[error("dataset is empty")]
    Empty,
    #[error("invalid fold count {folds} for {samples} samples (need 2 ≤ folds ≤ samples)")]
    InvalidFolds { folds: usize, samples: usize },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid dataset: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    /// Features followed by the bias input.
    pub x: Vec<f64>,
    pub target: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    name: String,
    n_features: usize,
    samples: Vec<Sample>,
}

impl Dataset {
    /// Builds a dataset from raw feature rows, appending the bias input to each.
    pub fn from_features(
        name: impl Into<String>,
        features: Vec<Vec<f64>>,
        targets: Vec<f64>,
    ) -> Result<Self, DataError> {
        if features.len() != targets.len() {
            return Err(DataError::Invalid(format!(
                "{} feature rows but {} targets",
                features.len(),
                targets.len()
            )));
        }
        let n_features = features.first().map_or(0, Vec::len);
        let mut samples = Vec::with_capacity(features.len());
        for (row, (mut x, target)) in features.into_iter().zip(targets).enumerate() {
            if x.len() != n_features {
                return Err(DataError::Parse {
                    row: row + 1,
                    msg: format!("expected {n_features} features, found {}", x.len()),
                });
            }
            if !target.is_finite() || x.iter().any(|v| !v.is_finite()) {
                return Err(DataError::Parse {
                    row: row + 1,
                    msg: "non-finite value".into(),
                });
            }
            x.push(BIAS_INPUT);
            samples.push(Sample { x, target });
        }
        Ok(Self {
            name: name.into(),
            n_features,
            samples,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// M, the number of real features (excluding the bias input).
    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn targets(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|s| s.target)
    }

    pub fn is_binary(&self) -> bool {
        self.targets().all(|t| t == 0.0 || t == 1.0)
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            name: self.name.clone(),
            n_features: self.n_features,
            samples: indices.iter().map(|&i| self.samples[i].clone()).collect(),
        }
    }

    /// Writes `features..., target` rows with a header, at full precision.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        for m in 0..self.n_features {
            let _ = write!(out, "x{m},");
        }
        out.push_str("target\n");
        for s in &self.samples {
            for v in &s.x[..self.n_features] {
                let _ = write!(out, "{v},");
            }
            let _ = writeln!(out, "{}", s.target);
        }
        out
    }
}

/// Mayas' function `0.26(x² + y²) − 0.48xy`.
pub fn mayas(x: f64, y: f64) -> f64 {
    0.26 * (x * x + y * y) - 0.48 * x * y
}

/// Gabor function `exp(s(x² + y²)/0.5) cos(2π(x + y)) / (2π·0.25)`.
///
/// `corrected_sign` selects the decaying envelope (`s = −1`); `false` gives the
/// growing envelope `s = +1`.
pub fn gabor(x: f64, y: f64, corrected_sign: bool) -> f64 {
    let s = if corrected_sign { -1.0 } else { 1.0 };
    (s * (x * x + y * y) / 0.5).exp() * (2.0 * PI * (x + y)).cos() / (2.0 * PI * 0.25)
}

/// The `steps × steps` lattice on `[lo, hi]²` (endpoints included), with target `f(x, y)`.
pub fn grid_dataset(
    name: &str,
    f: impl Fn(f64, f64) -> f64,
    lo: f64,
    hi: f64,
    steps: usize,
) -> Result<Dataset, DataError> {
    if steps < 2 {
        return Err(DataError::InvalidGrid(format!(
            "need at least 2 steps, got {steps}"
        )));
    }
    if lo.partial_cmp(&hi) != Some(std::cmp::Ordering::Less) {
        return Err(DataError::InvalidGrid(format!(
            "need lo < hi, got [{lo}, {hi}]"
        )));
    }
    let coord = |i: usize| lo + (hi - lo) * i as f64 / (steps - 1) as f64;
    let mut features = Vec::with_capacity(steps * steps);
    let mut targets = Vec::with_capacity(steps * steps);
    for i in 0..steps {
        for j in 0..steps {
            let (x, y) = (coord(i), coord(j));
            features.push(vec![x, y]);
            targets.push(f(x, y));
        }
    }
    Dataset::from_features(name, features, targets)
}

/// Which column of a CSV row holds the label.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelColumn {
    Last,
    Index(usize),
}

/// How label text becomes a numeric target.
#[derive(Debug, Clone, PartialEq)]
pub enum LabelMapping {
    /// Parse the label as a number.
    Numeric,
    /// Map exact label strings to targets; anything else is an error.
    Map(Vec<(String, f64)>),
}

impl LabelMapping {
    pub fn sonar() -> Self {
        LabelMapping::Map(vec![("R".into(), 0.0), ("M".into(), 1.0)])
    }

    fn apply(&self, label: &str, row: usize) -> Result<f64, DataError> {
        match self {
            LabelMapping::Numeric => label.parse().map_err(|_| DataError::UnknownLabel {
                row,
                label: label.to_string(),
            }),
            LabelMapping::Map(pairs) => pairs
                .iter()
                .find(|(k, _)| k == label)
                .map(|&(_, v)| v)
                .ok_or_else(|| DataError::UnknownLabel {
                    row,
                    label: label.to_string(),
                }),
        }
    }
}

pub fn load_csv(
    path: impl AsRef<Path>,
    label_column: LabelColumn,
    mapping: &LabelMapping,
) -> Result<Dataset, DataError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_csv(&name, &text, label_column, mapping)
}

/// Parses comma-separated rows of features plus one label column. A first row
/// whose feature fields are not all numeric is treated as a header. Features
/// are returned unscaled; see [`MinMaxScaler`].
pub fn parse_csv(
    name: &str,
    text: &str,
    label_column: LabelColumn,
    mapping: &LabelMapping,
) -> Result<Dataset, DataError> {
    let mut features = Vec::new();
    let mut targets = Vec::new();
    let mut width = None;
    for (k, line) in text.lines().enumerate() {
        let row = k + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let label_at = match label_column {
            LabelColumn::Last => fields.len() - 1,
            LabelColumn::Index(i) => i,
        };
        if label_at >= fields.len() {
            return Err(DataError::Parse {
                row,
                msg: format!("no column {label_at} in a row of {} fields", fields.len()),
            });
        }
        let parsed: Result<Vec<f64>, usize> = fields
            .iter()
            .enumerate()
            .filter(|&(c, _)| c != label_at)
            .map(|(c, f)| f.parse::<f64>().map_err(|_| c))
            .collect();
        let x = match parsed {
            Ok(x) => x,
            Err(_) if width.is_none() && features.is_empty() => {
                // header
                width = Some(fields.len());
                continue;
            }
            Err(c) => {
                return Err(DataError::Parse {
                    row,
                    msg: format!("field {} (`{}`) is not numeric", c + 1, fields[c]),
                })
            }
        };
        match width {
            Some(w) if w != fields.len() => {
                return Err(DataError::Parse {
                    row,
                    msg: format!("expected {w} fields, found {}", fields.len()),
                })
            }
            _ => width = Some(fields.len()),
        }
        targets.push(mapping.apply(fields[label_at], row)?);
        features.push(x);
    }
    if features.is_empty() {
        return Err(DataError::Empty);
    }
    Dataset::from_features(name, features, targets)
}

/// Per-column min-max scaling of features to `[0, 1]`. Constant columns map to 0.
#[derive(Debug, Clone, PartialEq)]
pub struct MinMaxScaler {
    mins: Vec<f64>,
    maxs: Vec<f64>,
}

impl MinMaxScaler {
    pub fn fit(data: &Dataset) -> Result<Self, DataError> {
        if data.is_empty() {
            return Err(DataError::Empty);
        }
        let m = data.n_features();
        let mut mins = vec![f64::INFINITY; m];
        let mut maxs = vec![f64::NEG_INFINITY; m];
        for s in data.samples() {
            for c in 0..m {
                mins[c] = mins[c].min(s.x[c]);
                maxs[c] = maxs[c].max(s.x[c]);
            }
        }
        Ok(Self { mins, maxs })
    }

    /// A scaler with known per-column bounds, e.g. read back from a model file.
    pub fn from_bounds(mins: Vec<f64>, maxs: Vec<f64>) -> Result<Self, DataError> {
        if mins.len() != maxs.len() {
            return Err(DataError::Invalid(format!(
                "{} minima but {} maxima",
                mins.len(),
                maxs.len()
            )));
        }
        if mins
            .iter()
            .zip(&maxs)
            .any(|(lo, hi)| !(lo.is_finite() && hi.is_finite() && lo <= hi))
        {
            return Err(DataError::Invalid(
                "scaler bounds must be finite with min <= max".into(),
            ));
        }
        Ok(Self { mins, maxs })
    }

    pub fn mins(&self) -> &[f64] {
        &self.mins
    }

    pub fn maxs(&self) -> &[f64] {
        &self.maxs
    }

    pub fn transform(&self, data: &Dataset) -> Dataset {
        let mut out = data.clone();
        for s in &mut out.samples {
            for (c, v) in s.x[..data.n_features].iter_mut().enumerate() {
                let span = self.maxs[c] - self.mins[c];
                *v = if span > 0.0 {
                    (*v - self.mins[c]) / span
                } else {
                    0.0
                };
            }
        }
        out
    }
}

/// Fold assignment for k-fold cross validation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitPlan {
    pub folds: usize,
    pub assignments: Vec<usize>,
    pub seed: u64,
}

impl SplitPlan {
    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len())
            .filter(|&i| self.assignments[i] == fold)
            .collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len())
            .filter(|&i| self.assignments[i] != fold)
            .collect()
    }

    /// `(train, test)` for one fold.
    pub fn split(&self, data: &Dataset, fold: usize) -> (Dataset, Dataset) {
        (
            data.subset(&self.train_indices(fold)),
            data.subset(&self.test_indices(fold)),
        )
    }
}

/// Seeded shuffle followed by round-robin fold assignment.
pub fn kfold(n_samples: usize, folds: usize, seed: u64) -> Result<SplitPlan, DataError> {
    if folds < 2 || folds > n_samples {
        return Err(DataError::InvalidFolds {
            folds,
            samples: n_samples,
        });
    }
    let mut order: Vec<usize> = (0..n_samples).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut assignments = vec![0; n_samples];
    for (rank, &i) in order.iter().enumerate() {
        assignments[i] = rank % folds;
    }
    Ok(SplitPlan {
        folds,
        assignments,
        seed,
    })
}
