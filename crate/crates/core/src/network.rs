//! Forward evaluation of the Sigma-Pi-Sigma network.
//!
//! `x → σ = g(W x) → τ_q = ∏_{i∈Λ_q} σ_i → y = f(w₀·τ)`
//!
//! Input vectors carry `M + 1` entries; the last one is the constant `−1` bias
//! input appended by the data layer, so column `M` of the hidden weights is the
//! bias of each Σ₁ unit.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use thiserror::Error;

use crate::basis::{eval_monomial, MonomialBasis};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetworkError {
    #[error("hidden unit {node} produced a non-finite pre-activation")]
    NonFinite { node: usize },
    #[error("output pre-activation is not finite")]
    NonFiniteOutput,
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("unknown activation `{0}` (expected identity, logistic or tanh)")]
    UnknownActivation(String),
    #[error("the identity activation is only allowed at the output")]
    IdentityHidden,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ActivationKind {
    Identity,
    Logistic,
    Tanh,
}

impl ActivationKind {
    #[inline]
    pub fn apply(self, t: f64) -> f64 {
        match self {
            ActivationKind::Identity => t,
            ActivationKind::Logistic => 1.0 / (1.0 + (-t).exp()),
            ActivationKind::Tanh => t.tanh(),
        }
    }

    /// Derivative expressed through the activation's own output `y = apply(t)`.
    #[inline]
    pub fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            ActivationKind::Identity => 1.0,
            ActivationKind::Logistic => y * (1.0 - y),
            ActivationKind::Tanh => 1.0 - y * y,
        }
    }

    pub fn derivative(self, t: f64) -> f64 {
        self.derivative_from_output(self.apply(t))
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ActivationKind::Identity => "identity",
            ActivationKind::Logistic => "logistic",
            ActivationKind::Tanh => "tanh",
        }
    }

    /// Rejects `Identity`, which would collapse the Σ₁ layer into a linear map.
    pub fn check_hidden(self) -> Result<Self, NetworkError> {
        match self {
            ActivationKind::Identity => Err(NetworkError::IdentityHidden),
            other => Ok(other),
        }
    }
}

impl fmt::Display for ActivationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ActivationKind {
    type Err = NetworkError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "identity" | "linear" => Ok(ActivationKind::Identity),
            "logistic" | "sigmoid" => Ok(ActivationKind::Logistic),
            "tanh" => Ok(ActivationKind::Tanh),
            other => Err(NetworkError::UnknownActivation(other.to_string())),
        }
    }
}

/// All trainable weights: `w0` (Π → Σ₂) and the `N × (M+1)` hidden matrix (input → Σ₁),
/// stored row-major. Gradients use the same type.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    pub w0: Vec<f64>,
    hidden: Vec<f64>,
    n_hidden: usize,
    n_inputs: usize,
}

impl NetworkParams {
    pub fn zeros(n_terms: usize, n_hidden: usize, n_inputs: usize) -> Self {
        Self {
            w0: vec![0.0; n_terms],
            hidden: vec![0.0; n_hidden * n_inputs],
            n_hidden,
            n_inputs,
        }
    }

    /// Builds params from explicit rows; every row must have the same length.
    pub fn from_parts(w0: Vec<f64>, rows: &[Vec<f64>]) -> Result<Self, NetworkError> {
        let n_inputs = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n_inputs) {
            return Err(NetworkError::Shape("hidden rows differ in length".into()));
        }
        Ok(Self {
            w0,
            hidden: rows.concat(),
            n_hidden: rows.len(),
            n_inputs,
        })
    }

    /// Uniform initialization on `[-range, range]`. Hidden weights are drawn
    /// first (row by row), then `w0`, so two networks sharing a seed and shape of
    /// hidden layer start from identical hidden weights whatever their basis size.
    pub fn random<R: Rng + ?Sized>(
        n_terms: usize,
        n_hidden: usize,
        n_inputs: usize,
        range: f64,
        rng: &mut R,
    ) -> Self {
        let hidden = (0..n_hidden * n_inputs)
            .map(|_| rng.random_range(-range..=range))
            .collect();
        let w0 = (0..n_terms)
            .map(|_| rng.random_range(-range..=range))
            .collect();
        Self {
            w0,
            hidden,
            n_hidden,
            n_inputs,
        }
    }

    pub fn n_terms(&self) -> usize {
        self.w0.len()
    }

    /// N, the number of Σ₁ units.
    pub fn n_hidden(&self) -> usize {
        self.n_hidden
    }

    /// M + 1, including the bias input.
    pub fn n_inputs(&self) -> usize {
        self.n_inputs
    }

    pub fn hidden_row(&self, n: usize) -> &[f64] {
        &self.hidden[n * self.n_inputs..(n + 1) * self.n_inputs]
    }

    pub fn hidden_row_mut(&mut self, n: usize) -> &mut [f64] {
        &mut self.hidden[n * self.n_inputs..(n + 1) * self.n_inputs]
    }

    pub fn hidden(&self, n: usize, m: usize) -> f64 {
        self.hidden[n * self.n_inputs + m]
    }

    pub fn hidden_mut(&mut self, n: usize, m: usize) -> &mut f64 {
        &mut self.hidden[n * self.n_inputs + m]
    }

    pub fn hidden_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.hidden.chunks(self.n_inputs.max(1)).take(self.n_hidden)
    }

    /// Same hidden layer with a different output weight vector.
    pub fn with_w0(&self, w0: Vec<f64>) -> Self {
        Self {
            w0,
            hidden: self.hidden.clone(),
            n_hidden: self.n_hidden,
            n_inputs: self.n_inputs,
        }
    }

    pub fn same_shape(&self, other: &NetworkParams) -> bool {
        self.w0.len() == other.w0.len()
            && self.n_hidden == other.n_hidden
            && self.n_inputs == other.n_inputs
    }

    pub fn is_finite(&self) -> bool {
        self.w0.iter().chain(&self.hidden).all(|v| v.is_finite())
    }

    /// Iterates over every weight: `w0` first, then the hidden matrix row by row.
    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.w0.iter().chain(self.hidden.iter())
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.w0.iter_mut().chain(self.hidden.iter_mut())
    }

    pub fn len(&self) -> usize {
        self.w0.len() + self.hidden.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn check_against(&self, basis: &MonomialBasis) -> Result<(), NetworkError> {
        if self.w0.len() != basis.len() {
            return Err(NetworkError::Shape(format!(
                "w0 has {} entries but the basis has {} terms",
                self.w0.len(),
                basis.len()
            )));
        }
        if self.n_hidden != basis.n_vars() {
            return Err(NetworkError::Shape(format!(
                "{} hidden rows but the basis is over {} variables",
                self.n_hidden,
                basis.n_vars()
            )));
        }
        Ok(())
    }
}

/// Every intermediate of one forward pass.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ForwardTrace {
    pub sigma: Vec<f64>,
    pub tau: Vec<f64>,
    pub net_out: f64,
    pub y: f64,
}

/// σ_n = g(w_n · x) for every hidden unit.
pub fn sigma_layer(
    params: &NetworkParams,
    x: &[f64],
    g: ActivationKind,
) -> Result<Vec<f64>, NetworkError> {
    let mut sigma = vec![0.0; params.n_hidden()];
    sigma_layer_into(params, x, g, &mut sigma)?;
    Ok(sigma)
}

pub(crate) fn sigma_layer_into(
    params: &NetworkParams,
    x: &[f64],
    g: ActivationKind,
    sigma: &mut [f64],
) -> Result<(), NetworkError> {
    if x.len() != params.n_inputs() {
        return Err(NetworkError::Shape(format!(
            "input has {} entries, network expects {}",
            x.len(),
            params.n_inputs()
        )));
    }
    for (n, (row, s)) in params.hidden_rows().zip(sigma.iter_mut()).enumerate() {
        let dot: f64 = row.iter().zip(x).map(|(w, xi)| w * xi).sum();
        if !dot.is_finite() {
            return Err(NetworkError::NonFinite { node: n });
        }
        *s = g.apply(dot);
    }
    Ok(())
}

pub fn forward(
    params: &NetworkParams,
    basis: &MonomialBasis,
    x: &[f64],
    g: ActivationKind,
    f: ActivationKind,
) -> Result<ForwardTrace, NetworkError> {
    params.check_against(basis)?;
    let sigma = sigma_layer(params, x, g)?;
    Ok(forward_from_sigma(params, basis, sigma, f))
}

/// Completes a forward pass from given Σ₁ outputs.
pub fn forward_from_sigma(
    params: &NetworkParams,
    basis: &MonomialBasis,
    sigma: Vec<f64>,
    f: ActivationKind,
) -> ForwardTrace {
    let tau: Vec<f64> = basis
        .terms()
        .iter()
        .map(|t| eval_monomial(t, &sigma))
        .collect();
    let net_out: f64 = params.w0.iter().zip(&tau).map(|(w, t)| w * t).sum();
    ForwardTrace {
        sigma,
        tau,
        net_out,
        y: f.apply(net_out),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{enumerate_complete, Multiset};
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn params_with_rows(w0: Vec<f64>, rows: &[Vec<f64>]) -> NetworkParams {
        NetworkParams::from_parts(w0, rows).unwrap()
    }

    #[test]
    fn zero_rows_give_activation_at_zero() {
        let p = NetworkParams::zeros(1, 2, 3);
        let x = [0.3, -1.2, -1.0];
        assert_eq!(
            sigma_layer(&p, &x, ActivationKind::Logistic).unwrap(),
            vec![0.5, 0.5]
        );
        assert_eq!(
            sigma_layer(&p, &x, ActivationKind::Tanh).unwrap(),
            vec![0.0, 0.0]
        );
    }

    #[test]
    fn logistic_at_two() {
        let p = params_with_rows(vec![0.0], &[vec![1.0, 0.0, 0.0]]);
        let s = sigma_layer(&p, &[2.0, 0.7, -1.0], ActivationKind::Logistic).unwrap();
        assert_relative_eq!(s[0], 0.880_797_077_977_882_3, max_relative = 1e-15);
    }

    #[test]
    fn non_finite_dot_reports_node() {
        let p = params_with_rows(vec![0.0], &[vec![0.0, 0.0], vec![f64::INFINITY, 0.0]]);
        let err = sigma_layer(&p, &[1.0, -1.0], ActivationKind::Logistic).unwrap_err();
        assert_eq!(err, NetworkError::NonFinite { node: 1 });
    }

    #[test]
    fn zero_output_weights_give_zero() {
        let basis = enumerate_complete(2, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p =
            NetworkParams::random(basis.len(), 2, 3, 0.5, &mut rng).with_w0(vec![0.0; basis.len()]);
        let t = forward(
            &p,
            &basis,
            &[0.4, -0.2, -1.0],
            ActivationKind::Logistic,
            ActivationKind::Identity,
        )
        .unwrap();
        assert_eq!(t.y, 0.0);
    }

    #[test]
    fn constant_network() {
        let basis = MonomialBasis::new(2, 1, vec![Multiset::empty()]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let p = NetworkParams::random(1, 2, 3, 0.5, &mut rng).with_w0(vec![1.75]);
        for x in [[0.0, 0.0, -1.0], [3.0, -9.0, -1.0]] {
            let t = forward(
                &p,
                &basis,
                &x,
                ActivationKind::Tanh,
                ActivationKind::Identity,
            )
            .unwrap();
            assert_eq!(t.y, 1.75);
        }
    }

    #[test]
    fn composition_with_forced_sigma() {
        let basis = MonomialBasis::new(
            3,
            2,
            vec![
                Multiset::empty(),
                Multiset::from_one_based(&[1]),
                Multiset::from_one_based(&[2, 3]),
            ],
        )
        .unwrap();
        let p = NetworkParams::zeros(3, 3, 1).with_w0(vec![1.0, 1.0, 1.0]);
        let t = forward_from_sigma(&p, &basis, vec![2.0, 3.0, 5.0], ActivationKind::Identity);
        assert_eq!(t.y, 18.0);
        assert_eq!(t.tau, vec![1.0, 2.0, 15.0]);
    }

    /// Explicit third-order polynomial in three variables, written out term by term.
    fn explicit_cubic(c: &[f64], s: &[f64]) -> f64 {
        let (a, b, d) = (s[0], s[1], s[2]);
        let monomials = [
            1.0,
            a,
            b,
            d,
            a * a,
            a * b,
            a * d,
            b * b,
            b * d,
            d * d,
            a * a * a,
            a * a * b,
            a * a * d,
            a * b * b,
            a * b * d,
            a * d * d,
            b * b * b,
            b * b * d,
            b * d * d,
            d * d * d,
        ];
        c.iter().zip(monomials).map(|(ci, m)| ci * m).sum()
    }

    #[test]
    fn identity_output_is_an_exact_polynomial() {
        let basis = enumerate_complete(3, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..50 {
            let p = NetworkParams::random(20, 3, 3, 2.0, &mut rng);
            let x = [
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                -1.0,
            ];
            let t = forward(
                &p,
                &basis,
                &x,
                ActivationKind::Logistic,
                ActivationKind::Identity,
            )
            .unwrap();
            let expected = explicit_cubic(&p.w0, &t.sigma);
            assert_relative_eq!(t.y, expected, max_relative = 1e-12, epsilon = 1e-14);
        }
    }

    #[test]
    fn activation_ranges_and_positive_tau() {
        let basis = enumerate_complete(3, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let p = NetworkParams::random(20, 3, 4, 1.0, &mut rng);
            let x: Vec<f64> = (0..3)
                .map(|_| rng.random_range(-3.0..3.0))
                .chain([-1.0])
                .collect();
            let s = sigma_layer(&p, &x, ActivationKind::Logistic).unwrap();
            assert!(s.iter().all(|&v| v > 0.0 && v < 1.0));
            let th = sigma_layer(&p, &x, ActivationKind::Tanh).unwrap();
            assert!(th.iter().all(|&v| v > -1.0 && v < 1.0));
            let t = forward(
                &p,
                &basis,
                &x,
                ActivationKind::Logistic,
                ActivationKind::Logistic,
            )
            .unwrap();
            assert!(t.tau.iter().all(|&v| v > 0.0 && v <= 1.0));
            assert!(t.y > 0.0 && t.y < 1.0);
        }
    }

    #[test]
    fn shape_errors() {
        let basis = enumerate_complete(2, 2).unwrap();
        let p = NetworkParams::zeros(3, 2, 3);
        assert!(matches!(
            forward(
                &p,
                &basis,
                &[0.0, 0.0, -1.0],
                ActivationKind::Logistic,
                ActivationKind::Identity
            ),
            Err(NetworkError::Shape(_))
        ));
        let p = NetworkParams::zeros(basis.len(), 2, 3);
        assert!(sigma_layer(&p, &[0.0, -1.0], ActivationKind::Logistic).is_err());
    }

    #[test]
    fn activation_tags() {
        for a in [
            ActivationKind::Identity,
            ActivationKind::Logistic,
            ActivationKind::Tanh,
        ] {
            assert_eq!(a.as_str().parse::<ActivationKind>().unwrap(), a);
        }
        assert!("relu".parse::<ActivationKind>().is_err());
        assert_eq!(
            ActivationKind::Identity.check_hidden(),
            Err(NetworkError::IdentityHidden)
        );
    }

    #[test]
    fn derivatives_match_finite_differences() {
        for a in [
            ActivationKind::Identity,
            ActivationKind::Logistic,
            ActivationKind::Tanh,
        ] {
            for t in [-2.0, -0.3, 0.0, 0.8, 3.1] {
                let h = 1e-6;
                let fd = (a.apply(t + h) - a.apply(t - h)) / (2.0 * h);
                assert_relative_eq!(a.derivative(t), fd, max_relative = 1e-8);
            }
        }
    }
}
