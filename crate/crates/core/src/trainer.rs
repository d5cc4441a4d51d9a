//! Full-batch gradient descent and the two-phase structure search.
//!
//! The objective is `E(W) = ½ Σ_j (y_j − O_j)² + P(W)` with `P` one of the
//! penalties in [`crate::regularizer`]. Structural optimization trains the
//! complete basis under the smoothed L1/2 penalty and keeps the `Q̂` output
//! weights of largest magnitude, `Q̂` being the size of the multilinear basis
//! of the same order. Refinement retrains the survivors with no penalty.
//!
//! The per-sample loss is `½ (f(w₀·τ) − O)²` where `f` is the output
//! activation, so the outer chain factor is `(y − O)·f'(w₀·τ)`.

use std::cmp::Ordering;
use std::fmt::Write as _;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::basis::{count_linear, enumerate_complete, enumerate_linear, BasisError, MonomialBasis};
use crate::data::Dataset;
use crate::network::{ActivationKind, NetworkError, NetworkParams};
use crate::regularizer::{build_penalty, NoPenalty, Penalty, PenaltyError, SmoothingSpec};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("training diverged at iteration {iteration}: {reason}")]
    Divergence { iteration: usize, reason: String },
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Basis(#[from] BasisError),
    #[error(transparent)]
    Penalty(#[from] PenaltyError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Task {
    Approximation,
    Classification,
}

impl Task {
    /// Identity output for approximation, logistic for 0/1 classification.
    pub fn output_activation(self) -> ActivationKind {
        match self {
            Task::Approximation => ActivationKind::Identity,
            Task::Classification => ActivationKind::Logistic,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Task::Approximation => "approximation",
            Task::Classification => "classification",
        }
    }
}

impl FromStr for Task {
    type Err = TrainError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "approximation" | "regression" => Ok(Task::Approximation),
            "classification" => Ok(Task::Classification),
            other => Err(TrainError::Config(format!("unknown task `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub eta: f64,
    pub smoothing: SmoothingSpec,
    /// Penalty used by the structural phase, looked up in the penalty registry.
    pub penalty: String,
    /// N, the number of Σ₁ units.
    pub n_hidden: usize,
    pub max_iter_structural: usize,
    pub max_iter_refine: usize,
    pub seed: u64,
    pub init_range: f64,
    pub task: Task,
    pub hidden_activation: ActivationKind,
    /// Force the constant monomial to survive pruning.
    pub keep_constant: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            eta: 0.005,
            smoothing: SmoothingSpec::default(),
            penalty: "smoothed-l12".to_string(),
            n_hidden: 3,
            max_iter_structural: 5000,
            max_iter_refine: 5000,
            seed: 0,
            init_range: 0.5,
            task: Task::Approximation,
            hidden_activation: ActivationKind::Logistic,
            keep_constant: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(TrainError::Config(format!(
                "learning rate must be positive, got {}",
                self.eta
            )));
        }
        if self.max_iter_structural == 0 || self.max_iter_refine == 0 {
            return Err(TrainError::Config(
                "iteration budgets must be at least 1".into(),
            ));
        }
        if self.n_hidden == 0 {
            return Err(TrainError::Config("need at least one hidden unit".into()));
        }
        if !(self.init_range > 0.0 && self.init_range.is_finite()) {
            return Err(TrainError::Config(format!(
                "init range must be positive, got {}",
                self.init_range
            )));
        }
        self.hidden_activation.check_hidden()?;
        Ok(())
    }

    pub fn output_activation(&self) -> ActivationKind {
        self.task.output_activation()
    }

    /// Gradient steps given to the fixed-basis comparator: the same total as
    /// structural optimization plus refinement.
    pub fn baseline_iters(&self) -> usize {
        self.max_iter_structural + self.max_iter_refine
    }

    pub fn with_eta(&self, eta: f64) -> Self {
        Self {
            eta,
            ..self.clone()
        }
    }

    fn initial_params(&self, n_terms: usize, n_inputs: usize) -> NetworkParams {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        NetworkParams::random(n_terms, self.n_hidden, n_inputs, self.init_range, &mut rng)
    }
}

/// Per-iteration objective values of one training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainLog {
    /// `errors[k]` is the objective at the weights entering iteration `k`.
    pub errors: Vec<f64>,
    /// Unregularized squared error at the final weights.
    pub final_plain_error: f64,
    pub iterations_run: usize,
}

impl TrainLog {
    pub fn initial(&self) -> Option<f64> {
        self.errors.first().copied()
    }

    pub fn last(&self) -> Option<f64> {
        self.errors.last().copied()
    }

    /// Number of steps after which the objective went up.
    pub fn monotone_violations(&self) -> usize {
        self.errors.windows(2).filter(|w| w[1] > w[0]).count()
    }

    pub fn all_finite(&self) -> bool {
        self.errors.iter().all(|e| e.is_finite()) && self.final_plain_error.is_finite()
    }

    /// Two-column `iteration,objective` table.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("iteration,objective\n");
        for (k, e) in self.errors.iter().enumerate() {
            let _ = writeln!(out, "{k},{e}");
        }
        out
    }
}

/// Basis terms as `(variable, multiplicity)` factors, plus the highest power used.
struct CompiledBasis {
    factors: Vec<Vec<(usize, usize)>>,
    max_power: usize,
}

impl CompiledBasis {
    fn new(basis: &MonomialBasis) -> Self {
        let factors: Vec<Vec<(usize, usize)>> = basis
            .terms()
            .iter()
            .map(|t| {
                t.factors()
                    .into_iter()
                    .map(|(v, m)| (v, m as usize))
                    .collect()
            })
            .collect();
        let max_power = factors.iter().flatten().map(|&(_, m)| m).max().unwrap_or(0);
        Self { factors, max_power }
    }
}

/// Reusable per-sample buffers.
struct Scratch {
    sigma: Vec<f64>,
    g_prime: Vec<f64>,
    /// `powers[v * stride + k] = σ_v^k`.
    powers: Vec<f64>,
    stride: usize,
    tau: Vec<f64>,
    d_sigma: Vec<f64>,
}

impl Scratch {
    fn new(n_hidden: usize, n_terms: usize, max_power: usize) -> Self {
        let stride = max_power + 1;
        Self {
            sigma: vec![0.0; n_hidden],
            g_prime: vec![0.0; n_hidden],
            powers: vec![1.0; n_hidden * stride],
            stride,
            tau: vec![0.0; n_terms],
            d_sigma: vec![0.0; n_hidden],
        }
    }

    #[inline]
    fn pow(&self, v: usize, k: usize) -> f64 {
        self.powers[v * self.stride + k]
    }
}

/// Dot product with four partial sums.
#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ca
        .remainder()
        .iter()
        .zip(cb.remainder())
        .map(|(x, y)| x * y)
        .sum();
    for (x, y) in ca.zip(cb) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// The training objective over one dataset.
pub struct Objective<'a> {
    basis: &'a MonomialBasis,
    data: &'a Dataset,
    penalty: &'a dyn Penalty,
    g: ActivationKind,
    f: ActivationKind,
    compiled: CompiledBasis,
}

impl<'a> Objective<'a> {
    pub fn new(
        basis: &'a MonomialBasis,
        data: &'a Dataset,
        penalty: &'a dyn Penalty,
        g: ActivationKind,
        f: ActivationKind,
    ) -> Result<Self, TrainError> {
        if data.is_empty() {
            return Err(TrainError::EmptyDataset);
        }
        Ok(Self {
            basis,
            data,
            penalty,
            g,
            f,
            compiled: CompiledBasis::new(basis),
        })
    }

    fn check(&self, params: &NetworkParams) -> Result<(), TrainError> {
        params.check_against(self.basis)?;
        if params.n_inputs() != self.data.n_features() + 1 {
            return Err(NetworkError::Shape(format!(
                "network takes {} inputs, dataset provides {}",
                params.n_inputs(),
                self.data.n_features() + 1
            ))
            .into());
        }
        Ok(())
    }

    /// ½ Σ_j (y_j − O_j)².
    pub fn data_error(&self, params: &NetworkParams) -> Result<f64, TrainError> {
        self.check(params)?;
        self.accumulate(params, None)
    }

    pub fn value(&self, params: &NetworkParams) -> Result<f64, TrainError> {
        Ok(self.data_error(params)? + self.penalty.value(params))
    }

    /// Objective value, writing its gradient into `grad` (overwritten).
    pub fn value_and_gradient(
        &self,
        params: &NetworkParams,
        grad: &mut NetworkParams,
    ) -> Result<f64, TrainError> {
        self.check(params)?;
        if !grad.same_shape(params) {
            return Err(
                NetworkError::Shape("gradient buffer shape differs from params".into()).into(),
            );
        }
        grad.iter_mut().for_each(|g| *g = 0.0);
        let err = self.accumulate(params, Some(grad))?;
        self.penalty.accumulate_gradient(params, grad);
        Ok(err + self.penalty.value(params))
    }

    /// Sums the data error over samples in index order, and the data gradient
    /// into `grad` when given.
    fn accumulate(
        &self,
        params: &NetworkParams,
        mut grad: Option<&mut NetworkParams>,
    ) -> Result<f64, TrainError> {
        let n_hidden = params.n_hidden();
        let mut s = Scratch::new(n_hidden, params.n_terms(), self.compiled.max_power);
        let mut total = 0.0;
        for sample in self.data.samples() {
            let x = &sample.x;
            for (n, row) in params.hidden_rows().enumerate() {
                let z = dot(row, x);
                if !z.is_finite() {
                    return Err(NetworkError::NonFinite { node: n }.into());
                }
                let out = self.g.apply(z);
                s.sigma[n] = out;
                s.g_prime[n] = self.g.derivative_from_output(out);
                let base = n * s.stride;
                for k in 1..s.stride {
                    s.powers[base + k] = s.powers[base + k - 1] * out;
                }
            }
            let mut net = 0.0;
            for (q, factors) in self.compiled.factors.iter().enumerate() {
                let tau: f64 = factors.iter().map(|&(v, m)| s.pow(v, m)).product();
                s.tau[q] = tau;
                net += params.w0[q] * tau;
            }
            if !net.is_finite() {
                return Err(NetworkError::NonFiniteOutput.into());
            }
            let y = self.f.apply(net);
            let residual = y - sample.target;
            total += 0.5 * residual * residual;

            let Some(grad) = grad.as_deref_mut() else {
                continue;
            };
            let outer = residual * self.f.derivative_from_output(y);
            s.d_sigma.iter_mut().for_each(|d| *d = 0.0);
            for (q, factors) in self.compiled.factors.iter().enumerate() {
                grad.w0[q] += outer * s.tau[q];
                let w = params.w0[q];
                for (k, &(v, m)) in factors.iter().enumerate() {
                    let mut partial = m as f64 * s.pow(v, m - 1);
                    for (k2, &(v2, m2)) in factors.iter().enumerate() {
                        if k2 != k {
                            partial *= s.pow(v2, m2);
                        }
                    }
                    s.d_sigma[v] += w * partial;
                }
            }
            for n in 0..n_hidden {
                let c = outer * s.d_sigma[n] * s.g_prime[n];
                for (gw, xi) in grad.hidden_row_mut(n).iter_mut().zip(x) {
                    *gw += c * xi;
                }
            }
        }
        Ok(total)
    }
}

/// ½ Σ_j (y_j − O_j)² over the whole dataset.
pub fn data_error(
    params: &NetworkParams,
    basis: &MonomialBasis,
    data: &Dataset,
    g: ActivationKind,
    f: ActivationKind,
) -> Result<f64, TrainError> {
    Objective::new(basis, data, &NoPenalty, g, f)?.data_error(params)
}

/// Gradient of data error plus penalty, shaped like `params`.
pub fn full_gradient(
    params: &NetworkParams,
    basis: &MonomialBasis,
    data: &Dataset,
    penalty: &dyn Penalty,
    g: ActivationKind,
    f: ActivationKind,
) -> Result<NetworkParams, TrainError> {
    let objective = Objective::new(basis, data, penalty, g, f)?;
    let mut grad = params.clone();
    objective.value_and_gradient(params, &mut grad)?;
    Ok(grad)
}

/// `w ← w − η ∂E/∂w` for every weight.
pub fn gd_step(params: &NetworkParams, grad: &NetworkParams, eta: f64) -> NetworkParams {
    let mut next = params.clone();
    gd_step_in_place(&mut next, grad, eta);
    next
}

pub fn gd_step_in_place(params: &mut NetworkParams, grad: &NetworkParams, eta: f64) {
    assert!(
        params.same_shape(grad),
        "gradient shape differs from params"
    );
    for (w, g) in params.iter_mut().zip(grad.iter()) {
        *w -= eta * g;
    }
}

/// Runs `iters` full-batch gradient steps from `params`.
pub fn descend(
    objective: &Objective<'_>,
    mut params: NetworkParams,
    eta: f64,
    iters: usize,
) -> Result<(NetworkParams, TrainLog), TrainError> {
    let mut grad = params.clone();
    let mut errors = Vec::with_capacity(iters);
    for k in 0..iters {
        let value = objective
            .value_and_gradient(&params, &mut grad)
            .map_err(|e| diverged(k, e))?;
        if !value.is_finite() {
            return Err(TrainError::Divergence {
                iteration: k,
                reason: format!("objective is {value}"),
            });
        }
        errors.push(value);
        gd_step_in_place(&mut params, &grad, eta);
        if !params.is_finite() {
            return Err(TrainError::Divergence {
                iteration: k + 1,
                reason: "weights became non-finite".into(),
            });
        }
    }
    let final_plain_error = objective
        .data_error(&params)
        .map_err(|e| diverged(iters, e))?;
    Ok((
        params,
        TrainLog {
            errors,
            final_plain_error,
            iterations_run: iters,
        },
    ))
}

fn diverged(iteration: usize, e: TrainError) -> TrainError {
    match e {
        TrainError::Network(NetworkError::NonFinite { node }) => TrainError::Divergence {
            iteration,
            reason: format!("hidden unit {node} pre-activation is not finite"),
        },
        TrainError::Network(NetworkError::NonFiniteOutput) => TrainError::Divergence {
            iteration,
            reason: "output pre-activation is not finite".into(),
        },
        other => other,
    }
}

/// Surviving structure after top-`Q̂` selection.
#[derive(Debug, Clone, PartialEq)]
pub struct PruneResult {
    /// Positions in the complete basis, ascending.
    pub kept_indices: Vec<usize>,
    pub pruned_basis: MonomialBasis,
    pub pruned_w0: Vec<f64>,
}

/// Positions of the `count` largest `|w|`, ties going to the lower index,
/// returned in ascending order. `force` is always included, displacing the
/// smallest selected weight if needed.
pub fn select_largest(weights: &[f64], count: usize, force: Option<usize>) -> Vec<usize> {
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(
        |&i, &j| match weights[j].abs().total_cmp(&weights[i].abs()) {
            Ordering::Equal => i.cmp(&j),
            other => other,
        },
    );
    let mut kept: Vec<usize> = order.into_iter().take(count).collect();
    if let Some(f) = force.filter(|f| *f < weights.len()) {
        if !kept.contains(&f) && count > 0 {
            kept.pop();
            kept.push(f);
        }
    }
    kept.sort_unstable();
    kept
}

pub fn prune(basis: &MonomialBasis, w0: &[f64], count: usize, keep_constant: bool) -> PruneResult {
    let force = if keep_constant {
        basis.position_of_constant()
    } else {
        None
    };
    let kept_indices = select_largest(w0, count, force);
    PruneResult {
        pruned_basis: basis.select(&kept_indices),
        pruned_w0: kept_indices.iter().map(|&i| w0[i]).collect(),
        kept_indices,
    }
}

/// Result of structural optimization.
#[derive(Debug, Clone)]
pub struct StructuralOutcome {
    /// Weights after the last structural iteration, over the complete basis.
    pub params: NetworkParams,
    pub basis: MonomialBasis,
    pub prune: PruneResult,
    pub log: TrainLog,
}

impl StructuralOutcome {
    /// Hidden weights carried into refinement, paired with the surviving `w0`.
    pub fn pruned_params(&self) -> NetworkParams {
        self.params.with_w0(self.prune.pruned_w0.clone())
    }
}

/// Trains the complete basis of `order` under the configured sparsifying
/// penalty for `max_iter_structural` steps, then keeps the `count_linear(N, order)`
/// output weights of largest magnitude.
pub fn algorithm1_structural(
    config: &TrainConfig,
    data: &Dataset,
    order: usize,
) -> Result<StructuralOutcome, TrainError> {
    config.validate()?;
    if config.smoothing.lambda() == 0.0 {
        return Err(TrainError::Config(
            "structural optimization needs a positive regularization strength".into(),
        ));
    }
    let basis = enumerate_complete(config.n_hidden, order)?;
    let penalty = build_penalty(&config.penalty, config.smoothing)?;
    let objective = Objective::new(
        &basis,
        data,
        penalty.as_ref(),
        config.hidden_activation,
        config.output_activation(),
    )?;
    let init = config.initial_params(basis.len(), data.n_features() + 1);
    let (params, log) = descend(&objective, init, config.eta, config.max_iter_structural)?;
    let q_hat = count_linear(config.n_hidden, order)? as usize;
    let pruned = prune(&basis, &params.w0, q_hat, config.keep_constant);
    Ok(StructuralOutcome {
        params,
        basis,
        prune: pruned,
        log,
    })
}

/// Unregularized retraining of the pruned network, starting from the
/// surviving output weights and the given hidden weights.
pub fn algorithm2_refine(
    pruned: &PruneResult,
    hidden_init: &NetworkParams,
    config: &TrainConfig,
    data: &Dataset,
) -> Result<(NetworkParams, TrainLog), TrainError> {
    config.validate()?;
    let start = hidden_init.with_w0(pruned.pruned_w0.clone());
    let objective = Objective::new(
        &pruned.pruned_basis,
        data,
        &NoPenalty,
        config.hidden_activation,
        config.output_activation(),
    )?;
    descend(&objective, start, config.eta, config.max_iter_refine)
}

/// The fixed multilinear-basis comparator, trained without penalty from the
/// same seeded initialization for [`TrainConfig::baseline_iters`] steps.
pub fn train_baseline(
    config: &TrainConfig,
    data: &Dataset,
    order: usize,
) -> Result<(MonomialBasis, NetworkParams, TrainLog), TrainError> {
    config.validate()?;
    let basis = enumerate_linear(config.n_hidden, order)?;
    let objective = Objective::new(
        &basis,
        data,
        &NoPenalty,
        config.hidden_activation,
        config.output_activation(),
    )?;
    let init = config.initial_params(basis.len(), data.n_features() + 1);
    let (params, log) = descend(&objective, init, config.eta, config.baseline_iters())?;
    Ok((basis, params, log))
}

/// Test-set quality of a trained network.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    /// Mean of `(y − O)²` over samples.
    pub mse: f64,
    /// Percentage of samples with `(y ≥ 0.5) == (O ≥ 0.5)`.
    pub accuracy_pct: f64,
}

pub fn evaluate(
    params: &NetworkParams,
    basis: &MonomialBasis,
    data: &Dataset,
    g: ActivationKind,
    f: ActivationKind,
) -> Result<Metrics, TrainError> {
    if data.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    params.check_against(basis)?;
    let mut sq = 0.0;
    let mut correct = 0usize;
    for s in data.samples() {
        let y = crate::network::forward(params, basis, &s.x, g, f)?.y;
        sq += (y - s.target).powi(2);
        if (y >= 0.5) == (s.target >= 0.5) {
            correct += 1;
        }
    }
    let n = data.len() as f64;
    Ok(Metrics {
        mse: sq / n,
        accuracy_pct: 100.0 * correct as f64 / n,
    })
}
