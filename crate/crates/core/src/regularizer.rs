//! L1/2 penalties on the network weights.
//!
//! Output weights are penalized one by one, hidden weights as one group per
//! Σ₁ unit (its full input row including the bias weight):
//!
//! ```text
//! P(W) = λ [ Σ_q h(w0_q)^½ + Σ_n ( Σ_m h(w_nm) )^½ ]
//! ```
//!
//! With `h = |·|` this is the plain L1/2 penalty, which has no derivative at 0.
//! The smoothed variant replaces `|x|` on `(−a, a)` by the quartic
//! `−x⁴/(8a³) + 3x²/(4a) + 3a/8`, which agrees with `|x|` in value and slope at
//! `±a` and is bounded below by `3a/8`.

use std::fmt;

use thiserror::Error;

use crate::network::NetworkParams;

/// Default smoothing half-width.
pub const DEFAULT_SMOOTHING_WIDTH: f64 = 0.05;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PenaltyError {
    #[error("smoothing width must be positive and finite, got {0}")]
    BadWidth(f64),
    #[error("regularization strength must be non-negative and finite, got {0}")]
    BadLambda(f64),
    #[error("unknown penalty `{name}`; available: {available}")]
    Unknown { name: String, available: String },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothingSpec {
    a: f64,
    lambda: f64,
}

impl SmoothingSpec {
    pub fn new(a: f64, lambda: f64) -> Result<Self, PenaltyError> {
        if !(a > 0.0 && a.is_finite()) {
            return Err(PenaltyError::BadWidth(a));
        }
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(PenaltyError::BadLambda(lambda));
        }
        Ok(Self { a, lambda })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Same width, different strength.
    pub fn with_lambda(self, lambda: f64) -> Result<Self, PenaltyError> {
        Self::new(self.a, lambda)
    }
}

impl Default for SmoothingSpec {
    fn default() -> Self {
        Self {
            a: DEFAULT_SMOOTHING_WIDTH,
            lambda: 1e-4,
        }
    }
}

/// Smoothed absolute value.
#[inline]
pub fn smooth_abs(x: f64, a: f64) -> f64 {
    if x.abs() >= a {
        x.abs()
    } else {
        let x2 = x * x;
        -x2 * x2 / (8.0 * a * a * a) + 3.0 * x2 / (4.0 * a) + 3.0 * a / 8.0
    }
}

#[inline]
pub fn smooth_abs_deriv(x: f64, a: f64) -> f64 {
    if x.abs() >= a {
        x.signum()
    } else {
        -x * x * x / (2.0 * a * a * a) + 3.0 * x / (2.0 * a)
    }
}

pub fn penalty(params: &NetworkParams, spec: &SmoothingSpec) -> f64 {
    if spec.lambda == 0.0 {
        return 0.0;
    }
    let a = spec.a;
    let out: f64 = params.w0.iter().map(|&w| smooth_abs(w, a).sqrt()).sum();
    let groups: f64 = params
        .hidden_rows()
        .map(|row| row.iter().map(|&w| smooth_abs(w, a)).sum::<f64>().sqrt())
        .sum();
    spec.lambda * (out + groups)
}

pub fn penalty_grad_w0(q: usize, params: &NetworkParams, spec: &SmoothingSpec) -> f64 {
    let w = params.w0[q];
    spec.lambda * smooth_abs_deriv(w, spec.a) / (2.0 * smooth_abs(w, spec.a).sqrt())
}

pub fn penalty_grad_hidden(
    n: usize,
    m: usize,
    params: &NetworkParams,
    spec: &SmoothingSpec,
) -> f64 {
    let row = params.hidden_row(n);
    let group: f64 = row.iter().map(|&w| smooth_abs(w, spec.a)).sum();
    spec.lambda * smooth_abs_deriv(row[m], spec.a) / (2.0 * group.sqrt())
}

/// Non-smoothed L1/2 penalty, for comparison runs.
pub fn raw_l12_penalty(params: &NetworkParams, lambda: f64) -> f64 {
    if lambda == 0.0 {
        return 0.0;
    }
    let out: f64 = params.w0.iter().map(|w| w.abs().sqrt()).sum();
    let groups: f64 = params
        .hidden_rows()
        .map(|row| row.iter().map(|w| w.abs()).sum::<f64>().sqrt())
        .sum();
    lambda * (out + groups)
}

/// Gradient of the raw penalty w.r.t. `w0[q]`; taken as 0 at exactly zero,
/// where the true derivative does not exist.
pub fn raw_l12_grad_w0(q: usize, params: &NetworkParams, lambda: f64) -> f64 {
    let w = params.w0[q];
    if w == 0.0 {
        return 0.0;
    }
    lambda * w.signum() / (2.0 * w.abs().sqrt())
}

/// Gradient of the raw penalty w.r.t. hidden weight `(n, m)`; 0 at exactly zero.
pub fn raw_l12_grad_hidden(n: usize, m: usize, params: &NetworkParams, lambda: f64) -> f64 {
    let row = params.hidden_row(n);
    let w = row[m];
    if w == 0.0 {
        return 0.0;
    }
    let group: f64 = row.iter().map(|v| v.abs()).sum();
    lambda * w.signum() / (2.0 * group.sqrt())
}

/// A penalty term added to the data error during training.
pub trait Penalty: Send + Sync + fmt::Debug {
    fn name(&self) -> &'static str;

    fn value(&self, params: &NetworkParams) -> f64;

    /// Adds ∂P/∂w for every weight into `grad`, which has the shape of `params`.
    fn accumulate_gradient(&self, params: &NetworkParams, grad: &mut NetworkParams);
}

#[derive(Debug, Clone, Copy, Default)]
pub struct NoPenalty;

impl Penalty for NoPenalty {
    fn name(&self) -> &'static str {
        "none"
    }

    fn value(&self, _params: &NetworkParams) -> f64 {
        0.0
    }

    fn accumulate_gradient(&self, _params: &NetworkParams, _grad: &mut NetworkParams) {}
}

#[derive(Debug, Clone, Copy)]
pub struct SmoothedL12(pub SmoothingSpec);

impl Penalty for SmoothedL12 {
    fn name(&self) -> &'static str {
        "smoothed-l12"
    }

    fn value(&self, params: &NetworkParams) -> f64 {
        penalty(params, &self.0)
    }

    fn accumulate_gradient(&self, params: &NetworkParams, grad: &mut NetworkParams) {
        let SmoothingSpec { a, lambda } = self.0;
        if lambda == 0.0 {
            return;
        }
        for (g, &w) in grad.w0.iter_mut().zip(&params.w0) {
            *g += lambda * smooth_abs_deriv(w, a) / (2.0 * smooth_abs(w, a).sqrt());
        }
        for n in 0..params.n_hidden() {
            let row = params.hidden_row(n);
            let denom = 2.0 * row.iter().map(|&w| smooth_abs(w, a)).sum::<f64>().sqrt();
            for (g, &w) in grad.hidden_row_mut(n).iter_mut().zip(row) {
                *g += lambda * smooth_abs_deriv(w, a) / denom;
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct RawL12 {
    pub lambda: f64,
}

impl Penalty for RawL12 {
    fn name(&self) -> &'static str {
        "l12"
    }

    fn value(&self, params: &NetworkParams) -> f64 {
        raw_l12_penalty(params, self.lambda)
    }

    fn accumulate_gradient(&self, params: &NetworkParams, grad: &mut NetworkParams) {
        if self.lambda == 0.0 {
            return;
        }
        for q in 0..params.n_terms() {
            grad.w0[q] += raw_l12_grad_w0(q, params, self.lambda);
        }
        for n in 0..params.n_hidden() {
            for m in 0..params.n_inputs() {
                *grad.hidden_mut(n, m) += raw_l12_grad_hidden(n, m, params, self.lambda);
            }
        }
    }
}

/// A named penalty constructor.
pub struct PenaltyEntry {
    pub name: &'static str,
    pub summary: &'static str,
    pub build: fn(SmoothingSpec) -> Box<dyn Penalty>,
}

static PENALTIES: &[PenaltyEntry] = &[
    PenaltyEntry {
        name: "smoothed-l12",
        summary: "L1/2 with quartic smoothing of |w| on (-a, a)",
        build: |spec| Box::new(SmoothedL12(spec)),
    },
    PenaltyEntry {
        name: "l12",
        summary: "plain L1/2; subgradient 0 at w = 0",
        build: |spec| {
            Box::new(RawL12 {
                lambda: spec.lambda(),
            })
        },
    },
    PenaltyEntry {
        name: "none",
        summary: "no penalty",
        build: |_| Box::new(NoPenalty),
    },
];

pub fn penalties() -> &'static [PenaltyEntry] {
    PENALTIES
}

/// Looks up a penalty by name and instantiates it with `spec`.
pub fn build_penalty(name: &str, spec: SmoothingSpec) -> Result<Box<dyn Penalty>, PenaltyError> {
    PENALTIES
        .iter()
        .find(|e| e.name == name)
        .map(|e| (e.build)(spec))
        .ok_or_else(|| PenaltyError::Unknown {
            name: name.to_string(),
            available: PENALTIES
                .iter()
                .map(|e| e.name)
                .collect::<Vec<_>>()
                .join(", "),
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn spec(a: f64, lambda: f64) -> SmoothingSpec {
        SmoothingSpec::new(a, lambda).unwrap()
    }

    fn quartic(x: f64, a: f64) -> f64 {
        -x.powi(4) / (8.0 * a.powi(3)) + 3.0 * x * x / (4.0 * a) + 3.0 * a / 8.0
    }

    fn quartic_deriv(x: f64, a: f64) -> f64 {
        -x.powi(3) / (2.0 * a.powi(3)) + 3.0 * x / (2.0 * a)
    }

    #[test]
    fn smooth_abs_values() {
        let a = 0.3;
        assert_eq!(smooth_abs(2.0 * a, a), 2.0 * a);
        assert_relative_eq!(smooth_abs(0.0, a), 3.0 * a / 8.0, max_relative = 1e-15);
        assert_eq!(smooth_abs(a, a), a);
        assert_relative_eq!(quartic(a, a), a, max_relative = 1e-15);
    }

    #[test]
    fn smooth_abs_deriv_values() {
        let a = 0.05;
        assert_eq!(smooth_abs_deriv(-3.0 * a, a), -1.0);
        assert_eq!(smooth_abs_deriv(0.0, a), 0.0);
        assert_eq!(smooth_abs_deriv(a, a), 1.0);
        assert_relative_eq!(quartic_deriv(a, a), 1.0, max_relative = 1e-15);
    }

    #[test]
    fn continuity_at_knots() {
        for a in [1e-3, 0.05, 0.5, 2.0] {
            for knot in [-a, a] {
                assert!((smooth_abs(knot, a) - quartic(knot, a)).abs() <= 1e-12);
                assert!((smooth_abs_deriv(knot, a) - quartic_deriv(knot, a)).abs() <= 1e-12);
                let below = knot - knot.signum() * 1e-13;
                assert!((smooth_abs(below, a) - smooth_abs(knot, a)).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn penalty_examples() {
        let p = NetworkParams::from_parts(vec![0.0; 8], &vec![vec![0.0; 3]; 3]).unwrap();
        assert_eq!(penalty(&p, &spec(0.08, 0.0)), 0.0);
        let expected = 8.0 * 0.03f64.sqrt() + 3.0 * 0.09f64.sqrt();
        assert_relative_eq!(
            penalty(&p, &spec(0.08, 1.0)),
            expected,
            max_relative = 1e-14
        );
        assert_relative_eq!(expected, 2.2856, epsilon = 1e-4);

        let single = NetworkParams::zeros(1, 0, 0).with_w0(vec![4.0]);
        assert_eq!(penalty(&single, &spec(4.0, 1.0)), 2.0);
        assert_eq!(penalty(&single, &spec(0.5, 1.0)), 2.0);
    }

    #[test]
    fn penalty_gradient_examples() {
        let zero = NetworkParams::zeros(1, 0, 0);
        assert_eq!(penalty_grad_w0(0, &zero, &spec(0.05, 1.0)), 0.0);
        let four = NetworkParams::zeros(1, 0, 0).with_w0(vec![4.0]);
        assert_eq!(penalty_grad_w0(0, &four, &spec(0.05, 0.0)), 0.0);
        assert_eq!(penalty_grad_w0(0, &four, &spec(4.0, 1.0)), 0.25);
    }

    #[test]
    fn raw_penalty_examples() {
        let p = NetworkParams::from_parts(vec![0.0; 3], &[vec![0.0, 0.0]]).unwrap();
        assert_eq!(raw_l12_penalty(&p, 1.0), 0.0);
        assert_eq!(raw_l12_grad_w0(0, &p, 1.0), 0.0);
        assert_eq!(raw_l12_grad_hidden(0, 1, &p, 1.0), 0.0);
        let four = NetworkParams::zeros(1, 0, 0).with_w0(vec![4.0]);
        assert_eq!(raw_l12_penalty(&four, 1.0), 2.0);
    }

    #[test]
    fn smoothed_converges_to_raw() {
        let p = NetworkParams::from_parts(
            vec![0.4, -1.3, 0.02, 2.5],
            &[vec![0.3, -0.7, 0.11], vec![-0.05, 0.9, 1.4]],
        )
        .unwrap();
        let raw = raw_l12_penalty(&p, 0.7);
        let smooth = penalty(&p, &spec(1e-6, 0.7));
        assert!(((smooth - raw) / raw).abs() <= 1e-4);
    }

    #[test]
    fn doubling_lambda_doubles_penalty() {
        let p = NetworkParams::from_parts(vec![0.4, -0.01, 0.0], &[vec![0.3, -0.02]]).unwrap();
        let one = penalty(&p, &spec(0.05, 0.3));
        let two = penalty(&p, &spec(0.05, 0.6));
        assert_eq!(two, 2.0 * one);
    }

    #[test]
    fn grid_bounds() {
        let a = 0.05;
        let n = 100_000;
        for k in 0..=n {
            let x = -10.0 * a + 20.0 * a * k as f64 / n as f64;
            assert!(smooth_abs_deriv(x, a).abs() <= 1.0);
            assert!(smooth_abs(x, a) >= 3.0 * a / 8.0);
        }
    }

    #[test]
    fn trait_matches_free_functions() {
        let p = NetworkParams::from_parts(
            vec![0.4, -0.01, 0.0, 1.2],
            &[vec![0.3, -0.02, 0.7], vec![0.0, 0.04, -0.6]],
        )
        .unwrap();
        let s = spec(0.05, 0.2);
        let pen = SmoothedL12(s);
        assert_eq!(pen.value(&p), penalty(&p, &s));
        let mut g = NetworkParams::zeros(4, 2, 3);
        pen.accumulate_gradient(&p, &mut g);
        for q in 0..4 {
            assert_relative_eq!(g.w0[q], penalty_grad_w0(q, &p, &s), max_relative = 1e-14);
        }
        for n in 0..2 {
            for m in 0..3 {
                assert_relative_eq!(
                    g.hidden(n, m),
                    penalty_grad_hidden(n, m, &p, &s),
                    max_relative = 1e-14
                );
            }
        }
    }

    #[test]
    fn registry_lookup() {
        let s = spec(0.05, 0.1);
        for e in penalties() {
            assert_eq!(build_penalty(e.name, s).unwrap().name(), e.name);
        }
        assert!(matches!(
            build_penalty("scad", s),
            Err(PenaltyError::Unknown { .. })
        ));
    }

    #[test]
    fn spec_validation() {
        assert!(SmoothingSpec::new(0.0, 1.0).is_err());
        assert!(SmoothingSpec::new(0.1, -1.0).is_err());
        assert!(SmoothingSpec::new(f64::NAN, 1.0).is_err());
        assert!(SmoothingSpec::new(0.1, 0.0).is_ok());
    }

    fn away_from_knots(a: f64) -> impl Strategy<Value = f64> {
        (-1.0f64..1.0).prop_filter("not near a knot", move |x| (x.abs() - a).abs() > 1e-3)
    }

    proptest! {
        #[test]
        fn symmetry(x in -1.0f64..1.0, a in 0.01f64..0.5) {
            prop_assert_eq!(smooth_abs(x, a), smooth_abs(-x, a));
            prop_assert_eq!(smooth_abs_deriv(x, a), -smooth_abs_deriv(-x, a));
        }

        #[test]
        fn quartic_dominates_abs_within_three_eighths(x in -1.0f64..1.0, a in 0.01f64..0.5) {
            let v = smooth_abs(x, a);
            prop_assert!(v >= x.abs() - 1e-15);
            prop_assert!(v - x.abs() <= 3.0 * a / 8.0 + 1e-15);
        }

        #[test]
        fn penalty_gradient_matches_central_difference(
            w0 in proptest::collection::vec(away_from_knots(0.05), 4),
            rows in proptest::collection::vec(proptest::collection::vec(away_from_knots(0.05), 3), 2),
            lambda in 0.01f64..1.0,
        ) {
            let s = spec(0.05, lambda);
            let p = NetworkParams::from_parts(w0, &rows).unwrap();
            let h = 1e-6;
            let check = |analytic: f64, plus: NetworkParams, minus: NetworkParams| {
                let fd = (penalty(&plus, &s) - penalty(&minus, &s)) / (2.0 * h);
                let err = (fd - analytic).abs();
                err <= 1e-6 * analytic.abs().max(fd.abs()) || err <= 1e-9
            };
            for q in 0..4 {
                let (mut up, mut dn) = (p.clone(), p.clone());
                up.w0[q] += h;
                dn.w0[q] -= h;
                prop_assert!(check(penalty_grad_w0(q, &p, &s), up, dn));
            }
            for n in 0..2 {
                for m in 0..3 {
                    let (mut up, mut dn) = (p.clone(), p.clone());
                    *up.hidden_mut(n, m) += h;
                    *dn.hidden_mut(n, m) -= h;
                    prop_assert!(check(penalty_grad_hidden(n, m, &p, &s), up, dn));
                }
            }
        }
    }
}
