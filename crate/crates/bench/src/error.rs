use std::path::PathBuf;

use spsnn_core::data::DataError;
use spsnn_core::model::ModelError;
use spsnn_core::trainer::TrainError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("dataset `{name}` not found at {path}; run scripts/fetch_data.sh or point SPSNN_DATA_DIR at a directory containing {file}")]
    MissingData {
        name: String,
        file: String,
        path: PathBuf,
    },
    #[error("dataset error: {0}")]
    Data(#[from] DataError),
    #[error("{context}: {source}")]
    Train {
        context: String,
        #[source]
        source: TrainError,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("{0}")]
    Diverged(String),
    #[error("report error: {0}")]
    Report(String),
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl BenchError {
    /// Process exit status: 1 configuration, 2 dataset, 3 numeric divergence.
    pub fn exit_code(&self) -> i32 {
        match self {
            BenchError::MissingData { .. } | BenchError::Data(_) => 2,
            BenchError::Diverged(_) => 3,
            BenchError::Train {
                source: TrainError::Divergence { .. },
                ..
            } => 3,
            BenchError::Train {
                source: TrainError::EmptyDataset,
                ..
            } => 2,
            _ => 1,
        }
    }

    pub(crate) fn train(context: impl Into<String>) -> impl FnOnce(TrainError) -> BenchError {
        let context = context.into();
        move |source| BenchError::Train { context, source }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_error_class() {
        assert_eq!(BenchError::Config("x".into()).exit_code(), 1);
        assert_eq!(BenchError::Data(DataError::Empty).exit_code(), 2);
        let missing = BenchError::MissingData {
            name: "sonar".into(),
            file: "sonar.all-data".into(),
            path: "/nowhere".into(),
        };
        assert_eq!(missing.exit_code(), 2);
        assert!(missing.to_string().contains("fetch_data.sh"));
        let div = BenchError::train("trial 0")(TrainError::Divergence {
            iteration: 3,
            reason: "nan".into(),
        });
        assert_eq!(div.exit_code(), 3);
        assert_eq!(BenchError::Diverged("x".into()).exit_code(), 3);
        let cfg = BenchError::train("trial 0")(TrainError::Config("bad".into()));
        assert_eq!(cfg.exit_code(), 1);
    }
}
