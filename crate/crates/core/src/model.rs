//! Trained networks and the `.spsnn` model file.
//!
//! ```text
//! spsnn-model 1
//! hidden_activation logistic
//! output_activation identity
//! inputs 2
//! hidden 3
//! basis 8
//! <8 term lines, `.basis` syntax: one-based indices, empty line = constant>
//! w0
//! <8 lines, one weight each>
//! weights
//! <3 lines, M+1 weights each, bias weight last>
//! scaler 2
//! <2 lines `min max`, one per feature>
//! ```
//!
//! The `scaler` block is optional; when present, features are min-max scaled
//! with those bounds before evaluation. Numbers are written with 17
//! significant digits.

use std::fmt::Write as _;
use std::str::FromStr;

use thiserror::Error;

use crate::basis::{parse_term_line, term_line, BasisError, MonomialBasis};
use crate::data::{Dataset, MinMaxScaler};
use crate::network::{forward, ActivationKind, NetworkError, NetworkParams};
use crate::trainer::{evaluate, Metrics, TrainError};

const MAGIC: &str = "spsnn-model 1";

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("model line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Basis(#[from] BasisError),
    #[error(transparent)]
    Network(#[from] NetworkError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub basis: MonomialBasis,
    pub params: NetworkParams,
    pub hidden_activation: ActivationKind,
    pub output_activation: ActivationKind,
    /// Feature scaling fitted on the training data, if any.
    pub scaler: Option<MinMaxScaler>,
}

impl Model {
    pub fn new(
        basis: MonomialBasis,
        params: NetworkParams,
        hidden_activation: ActivationKind,
        output_activation: ActivationKind,
    ) -> Result<Self, ModelError> {
        params.check_against(&basis)?;
        hidden_activation.check_hidden()?;
        Ok(Self {
            basis,
            params,
            hidden_activation,
            output_activation,
            scaler: None,
        })
    }

    pub fn with_scaler(mut self, scaler: MinMaxScaler) -> Result<Self, ModelError> {
        if scaler.mins().len() != self.n_features() {
            return Err(ModelError::Parse {
                line: 0,
                msg: format!(
                    "scaler has {} columns but the model takes {} features",
                    scaler.mins().len(),
                    self.n_features()
                ),
            });
        }
        self.scaler = Some(scaler);
        Ok(self)
    }

    /// M, the number of real features the model expects.
    pub fn n_features(&self) -> usize {
        self.params.n_inputs().saturating_sub(1)
    }

    /// Network output for an input that already includes the bias entry.
    pub fn predict(&self, x: &[f64]) -> Result<f64, NetworkError> {
        Ok(forward(
            &self.params,
            &self.basis,
            x,
            self.hidden_activation,
            self.output_activation,
        )?
        .y)
    }

    /// Metrics on unscaled data; the stored scaler, if any, is applied first.
    pub fn evaluate(&self, data: &Dataset) -> Result<Metrics, TrainError> {
        match &self.scaler {
            Some(sc) => evaluate(
                &self.params,
                &self.basis,
                &sc.transform(data),
                self.hidden_activation,
                self.output_activation,
            ),
            None => evaluate(
                &self.params,
                &self.basis,
                data,
                self.hidden_activation,
                self.output_activation,
            ),
        }
    }

    pub fn to_model_string(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{MAGIC}");
        let _ = writeln!(out, "hidden_activation {}", self.hidden_activation);
        let _ = writeln!(out, "output_activation {}", self.output_activation);
        let _ = writeln!(out, "inputs {}", self.n_features());
        let _ = writeln!(out, "hidden {}", self.params.n_hidden());
        let _ = writeln!(out, "order {}", self.basis.order());
        let _ = writeln!(out, "basis {}", self.basis.len());
        for t in self.basis.terms() {
            let _ = writeln!(out, "{}", term_line(t));
        }
        out.push_str("w0\n");
        for w in &self.params.w0 {
            let _ = writeln!(out, "{w:.16e}");
        }
        out.push_str("weights\n");
        for row in self.params.hidden_rows() {
            let line: Vec<String> = row.iter().map(|w| format!("{w:.16e}")).collect();
            let _ = writeln!(out, "{}", line.join(" "));
        }
        if let Some(sc) = &self.scaler {
            let _ = writeln!(out, "scaler {}", sc.mins().len());
            for (lo, hi) in sc.mins().iter().zip(sc.maxs()) {
                let _ = writeln!(out, "{lo:.16e} {hi:.16e}");
            }
        }
        out
    }
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    last: usize,
}

impl<'a> Lines<'a> {
    fn next_line(&mut self) -> Result<(usize, &'a str), ModelError> {
        match self.inner.next() {
            Some((k, l)) => {
                self.last = k + 1;
                Ok((k + 1, l))
            }
            None => Err(ModelError::Parse {
                line: self.last + 1,
                msg: "unexpected end of file".into(),
            }),
        }
    }

    fn keyed<T: FromStr>(&mut self, key: &str) -> Result<T, ModelError> {
        let (line, text) = self.next_line()?;
        let value = text
            .trim()
            .strip_prefix(key)
            .map(str::trim)
            .ok_or_else(|| ModelError::Parse {
                line,
                msg: format!("expected `{key} ...`"),
            })?;
        value.parse().map_err(|_| ModelError::Parse {
            line,
            msg: format!("bad value `{value}` for {key}"),
        })
    }

    fn literal(&mut self, expected: &str) -> Result<(), ModelError> {
        let (line, text) = self.next_line()?;
        if text.trim() == expected {
            Ok(())
        } else {
            Err(ModelError::Parse {
                line,
                msg: format!("expected `{expected}`"),
            })
        }
    }

    fn floats(&mut self, count: usize) -> Result<Vec<f64>, ModelError> {
        let (line, text) = self.next_line()?;
        let vals: Result<Vec<f64>, _> = text.split_whitespace().map(str::parse).collect();
        match vals {
            Ok(v) if v.len() == count => Ok(v),
            Ok(v) => Err(ModelError::Parse {
                line,
                msg: format!("expected {count} numbers, found {}", v.len()),
            }),
            Err(_) => Err(ModelError::Parse {
                line,
                msg: "not a number".into(),
            }),
        }
    }
}

impl FromStr for Model {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut lines = Lines {
            inner: s.lines().enumerate(),
            last: 0,
        };
        lines.literal(MAGIC)?;
        let hidden_activation: String = lines.keyed("hidden_activation")?;
        let output_activation: String = lines.keyed("output_activation")?;
        let inputs: usize = lines.keyed("inputs")?;
        let hidden: usize = lines.keyed("hidden")?;
        let order: usize = lines.keyed("order")?;
        let n_terms: usize = lines.keyed("basis")?;
        let mut terms = Vec::with_capacity(n_terms);
        for _ in 0..n_terms {
            let (line, text) = lines.next_line()?;
            terms.push(parse_term_line(text.trim(), line)?);
        }
        let basis = MonomialBasis::new(hidden, order, terms)?;
        lines.literal("w0")?;
        let w0 = (0..n_terms)
            .map(|_| lines.floats(1).map(|v| v[0]))
            .collect::<Result<Vec<_>, _>>()?;
        lines.literal("weights")?;
        let rows = (0..hidden)
            .map(|_| lines.floats(inputs + 1))
            .collect::<Result<Vec<_>, _>>()?;
        let params = NetworkParams::from_parts(w0, &rows)?;
        let model = Model::new(
            basis,
            params,
            hidden_activation.parse()?,
            output_activation.parse()?,
        )?;
        if lines.inner.clone().all(|(_, l)| l.trim().is_empty()) {
            return Ok(model);
        }
        let columns: usize = lines.keyed("scaler")?;
        let line = lines.last;
        let mut mins = Vec::with_capacity(columns);
        let mut maxs = Vec::with_capacity(columns);
        for _ in 0..columns {
            let b = lines.floats(2)?;
            mins.push(b[0]);
            maxs.push(b[1]);
        }
        let scaler = MinMaxScaler::from_bounds(mins, maxs).map_err(|e| ModelError::Parse {
            line,
            msg: e.to_string(),
        })?;
        model.with_scaler(scaler).map_err(|e| match e {
            ModelError::Parse { msg, .. } => ModelError::Parse { line, msg },
            other => other,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::enumerate_linear;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sample_model() -> Model {
        let basis = enumerate_linear(3, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let params = NetworkParams::random(8, 3, 3, 0.5, &mut rng);
        Model::new(
            basis,
            params,
            ActivationKind::Logistic,
            ActivationKind::Identity,
        )
        .unwrap()
    }

    #[test]
    fn model_file_round_trip_is_exact() {
        let m = sample_model();
        let text = m.to_model_string();
        let back: Model = text.parse().unwrap();
        assert_eq!(back, m);
        assert_eq!(back.to_model_string(), text);
    }

    #[test]
    fn truncated_model_is_rejected() {
        let text = sample_model().to_model_string();
        let cut: String = text.lines().take(12).collect::<Vec<_>>().join("\n");
        assert!(matches!(
            cut.parse::<Model>(),
            Err(ModelError::Parse { .. })
        ));
        assert!("not a model".parse::<Model>().is_err());
    }

    #[test]
    fn scaler_block_round_trips_and_applies() {
        let scaler = MinMaxScaler::from_bounds(vec![0.0, -2.0], vec![10.0, 2.0]).unwrap();
        let m = sample_model().with_scaler(scaler.clone()).unwrap();
        let text = m.to_model_string();
        assert!(text.contains("scaler 2"));
        let back: Model = text.parse().unwrap();
        assert_eq!(back, m);

        let raw =
            Dataset::from_features("t", vec![vec![5.0, 0.0], vec![10.0, 2.0]], vec![0.0, 1.0])
                .unwrap();
        let direct = sample_model().evaluate(&scaler.transform(&raw)).unwrap();
        assert_eq!(back.evaluate(&raw).unwrap(), direct);
    }

    #[test]
    fn scaler_width_must_match_features() {
        let scaler = MinMaxScaler::from_bounds(vec![0.0], vec![1.0]).unwrap();
        assert!(sample_model().with_scaler(scaler).is_err());
    }

    #[test]
    fn identity_hidden_rejected() {
        let m = sample_model();
        assert!(Model::new(
            m.basis,
            m.params,
            ActivationKind::Identity,
            ActivationKind::Identity
        )
        .is_err());
    }
}
