//! Multi-trial comparison of the fixed multilinear basis ("old") against
//! structural optimization followed by refinement ("new").
//!
//! Trials run in parallel; results are collected in trial order, so reports do
//! not depend on scheduling.

use rayon::prelude::*;
use spsnn_core::basis::enumerate_complete;
use spsnn_core::data::{kfold, MinMaxScaler, SplitPlan};
use spsnn_core::trainer::{
    algorithm1_structural, algorithm2_refine, evaluate, train_baseline, Metrics, PruneResult, Task,
    TrainError, TrainLog,
};
use spsnn_core::{Dataset, Model, MonomialBasis, NetworkParams, TrainConfig};

use crate::config::{CurveMode, ExperimentConfig};
use crate::error::BenchError;
use crate::experiment::{find_experiment, Workload};
use crate::report::{ComparisonReport, Layout, Metric, ReportRow};

/// Summary of one training run's objective curve.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveRecord {
    /// `structural`, `refine-…` or `baseline-…`.
    pub arm: String,
    pub seed: u64,
    pub eta: f64,
    pub initial: f64,
    pub last: f64,
    pub steps: usize,
    pub violations: usize,
    pub finite: bool,
    /// Full curve, kept only for runs selected by [`CurveMode`].
    pub log: Option<TrainLog>,
}

impl CurveRecord {
    fn new(arm: String, seed: u64, eta: f64, log: TrainLog, keep: bool) -> Self {
        Self {
            arm,
            seed,
            eta,
            initial: log.initial().unwrap_or(f64::NAN),
            last: log.last().unwrap_or(f64::NAN),
            steps: log.errors.len(),
            violations: log.monotone_violations(),
            finite: log.all_finite(),
            log: keep.then_some(log),
        }
    }

    pub fn file_name(&self) -> String {
        format!("{}-{}.csv", self.arm, self.seed)
    }

    pub fn violation_fraction(&self) -> f64 {
        if self.steps < 2 {
            0.0
        } else {
            self.violations as f64 / (self.steps - 1) as f64
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub config: ExperimentConfig,
    pub report: ComparisonReport,
    pub complete_basis: MonomialBasis,
    /// Structure chosen in the first trial.
    pub selected: PruneResult,
    /// Every structural run's kept positions in the complete basis, in trial order.
    pub selections: Vec<Vec<usize>>,
    pub curves: Vec<CurveRecord>,
    pub models: Vec<(String, Model)>,
    /// Diverged refinement or baseline runs of a learning-rate sweep.
    pub divergences: Vec<Divergence>,
}

impl RunOutput {
    /// How often each complete-basis position survived pruning.
    pub fn selection_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.complete_basis.len()];
        for kept in &self.selections {
            for &i in kept {
                counts[i] += 1;
            }
        }
        counts
    }
}

/// Resolves the experiment, loads its data and runs the comparison.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunOutput, BenchError> {
    config.validate()?;
    let experiment = find_experiment(&config.experiment)?;
    match experiment.workload(config)? {
        Workload::Grid { train, test } => run_grid(config, &train, &test),
        Workload::CrossValidation { data } => run_cross_validation(config, &data),
    }
}

fn fmt_eta(eta: f64) -> String {
    eta.to_string()
}

fn keep_curve(mode: CurveMode, first: bool) -> bool {
    match mode {
        CurveMode::All => true,
        CurveMode::First => first,
        CurveMode::None => false,
    }
}

fn model_of(
    basis: &MonomialBasis,
    params: &NetworkParams,
    tc: &TrainConfig,
    scaler: Option<&MinMaxScaler>,
) -> Result<Model, BenchError> {
    let model = Model::new(
        basis.clone(),
        params.clone(),
        tc.hidden_activation,
        tc.output_activation(),
    )?;
    Ok(match scaler {
        Some(s) => model.with_scaler(s.clone())?,
        None => model,
    })
}

fn metrics(
    params: &NetworkParams,
    basis: &MonomialBasis,
    data: &Dataset,
    tc: &TrainConfig,
) -> Result<Metrics, BenchError> {
    evaluate(
        params,
        basis,
        data,
        tc.hidden_activation,
        tc.output_activation(),
    )
    .map_err(BenchError::train("evaluation"))
}

/// A refinement or baseline run whose objective or weights became non-finite.
#[derive(Debug, Clone, PartialEq)]
pub struct Divergence {
    pub arm: String,
    pub seed: u64,
    pub eta: f64,
    pub iteration: usize,
    pub reason: String,
}

impl Divergence {
    fn into_error(self) -> BenchError {
        BenchError::Train {
            context: format!("{}, seed {}, eta {}", self.arm, self.seed, self.eta),
            source: TrainError::Divergence {
                iteration: self.iteration,
                reason: self.reason,
            },
        }
    }
}

struct Arms {
    structural: PruneResult,
    old: Result<(MonomialBasis, NetworkParams), Divergence>,
    new: Result<NetworkParams, Divergence>,
    curves: Vec<CurveRecord>,
}

/// Splits a training result into trained, diverged, or a hard error.
fn outcome<T>(
    result: Result<(T, TrainLog), TrainError>,
    arm: String,
    seed: u64,
    eta: f64,
    keep: bool,
    curves: &mut Vec<CurveRecord>,
) -> Result<Result<T, Divergence>, BenchError> {
    match result {
        Ok((value, log)) => {
            curves.push(CurveRecord::new(arm, seed, eta, log, keep));
            Ok(Ok(value))
        }
        Err(TrainError::Divergence { iteration, reason }) => {
            curves.push(CurveRecord {
                arm: arm.clone(),
                seed,
                eta,
                initial: f64::NAN,
                last: f64::NAN,
                steps: iteration,
                violations: 0,
                finite: false,
                log: None,
            });
            Ok(Err(Divergence {
                arm,
                seed,
                eta,
                iteration,
                reason,
            }))
        }
        Err(e) => Err(BenchError::train(format!("{arm}, seed {seed}, eta {eta}"))(
            e,
        )),
    }
}

/// Structural optimization at `structural_eta`, then refinement and the
/// baseline at each of `etas`, all from initialization `seed`.
fn train_arms(
    config: &ExperimentConfig,
    train: &Dataset,
    seed: u64,
    etas: &[f64],
    tag: &str,
    keep: bool,
) -> Result<(PruneResult, Vec<Arms>, CurveRecord), BenchError> {
    let sc = config.train_config(config.structural_eta, seed)?;
    let s = algorithm1_structural(&sc, train, config.order).map_err(BenchError::train(format!(
        "structural optimization, seed {seed}"
    )))?;
    let structural_curve = CurveRecord::new(
        format!("structural{tag}"),
        seed,
        sc.eta,
        s.log.clone(),
        keep,
    );
    let mut arms = Vec::with_capacity(etas.len());
    for &eta in etas {
        let tc = config.train_config(eta, seed)?;
        let suffix = if tag.is_empty() {
            format!("-eta{}", fmt_eta(eta))
        } else {
            tag.to_string()
        };
        let mut curves = Vec::with_capacity(2);
        let new = outcome(
            algorithm2_refine(&s.prune, &s.params, &tc, train),
            format!("refine{suffix}"),
            seed,
            eta,
            keep,
            &mut curves,
        )?;
        let old = outcome(
            train_baseline(&tc, train, config.order).map(|(b, p, log)| ((b, p), log)),
            format!("baseline{suffix}"),
            seed,
            eta,
            keep,
            &mut curves,
        )?;
        arms.push(Arms {
            structural: s.prune.clone(),
            old,
            new,
            curves,
        });
    }
    Ok((s.prune, arms, structural_curve))
}

struct GridTrial {
    prune: PruneResult,
    /// `(old, new)` test MSE per η; `None` where training diverged.
    mse: Vec<(Option<f64>, Option<f64>)>,
    curves: Vec<CurveRecord>,
    models: Vec<(String, Model)>,
    divergences: Vec<Divergence>,
}

fn grid_trial(
    config: &ExperimentConfig,
    train: &Dataset,
    test: &Dataset,
    trial: usize,
) -> Result<GridTrial, BenchError> {
    let seed = config.seed + trial as u64;
    let first = trial == 0;
    let keep = keep_curve(config.curves, first);
    let (prune, arms, structural_curve) = train_arms(config, train, seed, &config.etas, "", keep)?;
    let mut curves = vec![structural_curve];
    let mut mse = Vec::with_capacity(arms.len());
    let mut models = Vec::new();
    let mut divergences = Vec::new();
    for (arm, &eta) in arms.into_iter().zip(&config.etas) {
        let tc = config.train_config(eta, seed)?;
        let e = fmt_eta(eta);
        let old = match arm.old {
            Ok((basis, params)) => {
                if first {
                    models.push((format!("old-eta{e}"), model_of(&basis, &params, &tc, None)?));
                }
                Some(metrics(&params, &basis, test, &tc)?.mse)
            }
            Err(d) => {
                divergences.push(d);
                None
            }
        };
        let new = match arm.new {
            Ok(params) => {
                let basis = &arm.structural.pruned_basis;
                if first {
                    models.push((format!("new-eta{e}"), model_of(basis, &params, &tc, None)?));
                }
                Some(metrics(&params, basis, test, &tc)?.mse)
            }
            Err(d) => {
                divergences.push(d);
                None
            }
        };
        mse.push((old, new));
        curves.extend(arm.curves);
    }
    Ok(GridTrial {
        prune,
        mse,
        curves,
        models,
        divergences,
    })
}

/// Mean over trials, infinite if any trial diverged.
fn mean_or_inf(values: impl Iterator<Item = Option<f64>>) -> f64 {
    mean(values.map(|v| v.unwrap_or(f64::INFINITY)))
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    sum / n as f64
}

fn run_grid(
    config: &ExperimentConfig,
    train: &Dataset,
    test: &Dataset,
) -> Result<RunOutput, BenchError> {
    let trials: Vec<GridTrial> = (0..config.trials)
        .into_par_iter()
        .map(|t| grid_trial(config, train, test, t))
        .collect::<Result<_, _>>()?;

    let rows = config
        .etas
        .iter()
        .enumerate()
        .map(|(k, &eta)| ReportRow {
            table: "average".into(),
            label: fmt_eta(eta),
            metric: Metric::TestMse,
            old: mean_or_inf(trials.iter().map(|t| t.mse[k].0)),
            new: mean_or_inf(trials.iter().map(|t| t.mse[k].1)),
        })
        .collect();
    let divergences: Vec<Divergence> = trials.iter().flat_map(|t| t.divergences.clone()).collect();

    let mut metadata = common_metadata(config)?;
    if config.experiment == "gabor" {
        let sign = if config.gabor_literal_sign {
            "literal (growing envelope exp(+(x²+y²)/0.5))"
        } else {
            "corrected (decaying envelope exp(-(x²+y²)/0.5))"
        };
        metadata.push(("gabor_exponent".into(), sign.into()));
    }
    metadata.push(("train_samples".into(), train.len().to_string()));
    metadata.push(("test_samples".into(), test.len().to_string()));
    metadata.push((
        "protocol".into(),
        format!(
            "per seed: structural optimization at eta {}; each eta then refines the pruned network and trains the baseline from the same seed; rows average test MSE over {} seeds",
            config.structural_eta, config.trials
        ),
    ));
    for &eta in &config.etas {
        let count = |prefix: &str| {
            divergences
                .iter()
                .filter(|d| d.eta == eta && d.arm.starts_with(prefix))
                .count()
        };
        let (old, new) = (count("baseline"), count("refine"));
        if old + new > 0 {
            metadata.push((
                format!("diverged_eta_{}", fmt_eta(eta)),
                format!(
                    "baseline {old}/{n}, pipeline {new}/{n} runs (reported mean is inf)",
                    n = config.trials
                ),
            ));
        }
    }

    let mut out = finish(
        config,
        Layout::Sweep,
        metadata,
        rows,
        trials.into_iter().map(|t| (t.prune, t.curves, t.models)),
    )?;
    out.divergences = divergences;
    Ok(out)
}

struct FoldResult {
    prune: PruneResult,
    /// old train, new train, old test, new test
    values: [f64; 4],
    curves: Vec<CurveRecord>,
    models: Vec<(String, Model)>,
}

fn fold_unit(
    config: &ExperimentConfig,
    data: &Dataset,
    plan: &SplitPlan,
    round: usize,
    trial: usize,
    fold: usize,
    task: Task,
) -> Result<FoldResult, BenchError> {
    let (train, test) = plan.split(data, fold);
    let scaler = if config.scale {
        Some(MinMaxScaler::fit(&train)?)
    } else {
        None
    };
    let (train, test) = match &scaler {
        Some(s) => (s.transform(&train), s.transform(&test)),
        None => (train, test),
    };
    let seed = config.seed + trial as u64;
    let first = trial == 0 && fold == 0;
    let keep = keep_curve(config.curves, first);
    let tag = format!("-round{}-fold{}", round + 1, fold + 1);
    let (prune, mut arms, structural_curve) =
        train_arms(config, &train, seed, &config.etas[..1], &tag, keep)?;
    let arm = arms.pop().expect("one learning rate");
    let new_params = arm.new.map_err(Divergence::into_error)?;
    let (old_basis, old_params) = arm.old.map_err(Divergence::into_error)?;
    let tc = config.train_config(config.etas[0], seed)?;
    let pick = |m: Metrics| match task {
        Task::Classification => m.accuracy_pct,
        Task::Approximation => m.mse,
    };
    let new_basis = &arm.structural.pruned_basis;
    let values = [
        pick(metrics(&old_params, &old_basis, &train, &tc)?),
        pick(metrics(&new_params, new_basis, &train, &tc)?),
        pick(metrics(&old_params, &old_basis, &test, &tc)?),
        pick(metrics(&new_params, new_basis, &test, &tc)?),
    ];
    let mut models = Vec::new();
    if first {
        let r = round + 1;
        models.push((
            format!("new-round{r}"),
            model_of(new_basis, &new_params, &tc, scaler.as_ref())?,
        ));
        models.push((
            format!("old-round{r}"),
            model_of(&old_basis, &old_params, &tc, scaler.as_ref())?,
        ));
    }
    let mut curves = vec![structural_curve];
    curves.extend(arm.curves);
    Ok(FoldResult {
        prune,
        values,
        curves,
        models,
    })
}

/// Fold-split seed of a round, decorrelated from the initialization seeds.
fn split_seed(seed: u64, round: usize) -> u64 {
    let mut z = seed ^ (round as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn run_cross_validation(
    config: &ExperimentConfig,
    data: &Dataset,
) -> Result<RunOutput, BenchError> {
    if config.etas.len() != 1 {
        return Err(BenchError::Config(format!(
            "cross validation takes exactly one learning rate, got {}",
            config.etas.len()
        )));
    }
    let task = config.task()?;
    if task == Task::Classification && !data.is_binary() {
        return Err(BenchError::Config(
            "classification needs 0/1 targets; set `labels` to map the label column".into(),
        ));
    }
    let plans: Vec<SplitPlan> = (0..config.rounds)
        .map(|r| kfold(data.len(), config.folds, split_seed(config.seed, r)))
        .collect::<Result<_, _>>()?;
    let units: Vec<(usize, usize, usize)> = (0..config.rounds)
        .flat_map(|r| {
            (0..config.trials).flat_map(move |t| (0..config.folds).map(move |f| (r, t, f)))
        })
        .collect();
    let results: Vec<FoldResult> = units
        .par_iter()
        .map(|&(r, t, f)| fold_unit(config, data, &plans[r], r, t, f, task))
        .collect::<Result<_, _>>()?;

    // Per trial: mean over folds. Per round: mean, best and worst over trials.
    let per_trial: Vec<[f64; 4]> = results
        .chunks(config.folds)
        .map(|folds| std::array::from_fn(|k| mean(folds.iter().map(|f| f.values[k]))))
        .collect();
    let (train_metric, test_metric) = match task {
        Task::Classification => (Metric::TrainAccuracy, Metric::TestAccuracy),
        Task::Approximation => (Metric::TrainMse, Metric::TestMse),
    };
    let higher = test_metric.higher_is_better();
    let best = |a: f64, b: f64| if higher { a.max(b) } else { a.min(b) };
    let worst = |a: f64, b: f64| if higher { a.min(b) } else { a.max(b) };
    let mut rows = Vec::new();
    for (table, reduce) in [
        ("average", None),
        ("best", Some(&best as &dyn Fn(f64, f64) -> f64)),
        ("worst", Some(&worst as &dyn Fn(f64, f64) -> f64)),
    ] {
        let mut per_round = Vec::with_capacity(config.rounds);
        for trials in per_trial.chunks(config.trials) {
            let agg: [f64; 4] = std::array::from_fn(|k| {
                let vals = trials.iter().map(|v| v[k]);
                match reduce {
                    None => mean(vals),
                    Some(f) => vals.reduce(f).unwrap_or(f64::NAN),
                }
            });
            per_round.push(agg);
        }
        let overall: [f64; 4] = std::array::from_fn(|k| mean(per_round.iter().map(|v| v[k])));
        let labelled = per_round
            .iter()
            .enumerate()
            .map(|(r, v)| ((r + 1).to_string(), *v))
            .chain(std::iter::once(("overall".to_string(), overall)));
        for (label, v) in labelled {
            rows.push(ReportRow {
                table: table.into(),
                label: label.clone(),
                metric: train_metric,
                old: v[0],
                new: v[1],
            });
            rows.push(ReportRow {
                table: table.into(),
                label,
                metric: test_metric,
                old: v[2],
                new: v[3],
            });
        }
    }

    let mut metadata = common_metadata(config)?;
    metadata.push(("samples".into(), data.len().to_string()));
    metadata.push(("features".into(), data.n_features().to_string()));
    metadata.push(("rounds".into(), config.rounds.to_string()));
    metadata.push(("folds".into(), config.folds.to_string()));
    metadata.push((
        "scaling".into(),
        if config.scale {
            "features min-max scaled to [0,1] with bounds from the training folds; test fold reuses them".into()
        } else {
            "none".into()
        },
    ));
    metadata.push((
        "protocol".into(),
        format!(
            "each round draws a new {}-fold split; each trial seed trains both arms on every fold; trial score is the fold mean; rows give mean, best and worst over {} trials per round; overall averages the rounds",
            config.folds, config.trials
        ),
    ));
    finish(
        config,
        Layout::Rounds,
        metadata,
        rows,
        results.into_iter().map(|r| (r.prune, r.curves, r.models)),
    )
}

fn common_metadata(config: &ExperimentConfig) -> Result<Vec<(String, String)>, BenchError> {
    let complete = enumerate_complete(config.hidden, config.order)
        .map_err(|e| BenchError::Config(e.to_string()))?;
    let tc = config.train_config(config.etas[0], config.seed)?;
    let etas: Vec<String> = config.etas.iter().map(|e| fmt_eta(*e)).collect();
    Ok(vec![
        ("task".into(), config.task.clone()),
        ("order".into(), config.order.to_string()),
        ("hidden".into(), config.hidden.to_string()),
        ("complete_terms".into(), complete.len().to_string()),
        (
            "selected_terms".into(),
            spsnn_core::basis::count_linear(config.hidden, config.order)
                .map_err(|e| BenchError::Config(e.to_string()))?
                .to_string(),
        ),
        ("trials".into(), config.trials.to_string()),
        ("seed".into(), config.seed.to_string()),
        ("etas".into(), etas.join(" ")),
        ("structural_eta".into(), fmt_eta(config.structural_eta)),
        ("penalty".into(), config.penalty.clone()),
        ("lambda".into(), config.lambda.to_string()),
        ("a".into(), config.a.to_string()),
        (
            "iters_structural".into(),
            config.iters_structural.to_string(),
        ),
        ("iters_refine".into(), config.iters_refine.to_string()),
        ("baseline_iters".into(), tc.baseline_iters().to_string()),
        ("init_range".into(), config.init_range.to_string()),
        ("hidden_activation".into(), tc.hidden_activation.to_string()),
        (
            "output_activation".into(),
            tc.output_activation().to_string(),
        ),
        ("keep_constant".into(), config.keep_constant.to_string()),
    ])
}

type TrialParts = (PruneResult, Vec<CurveRecord>, Vec<(String, Model)>);

fn finish(
    config: &ExperimentConfig,
    layout: Layout,
    metadata: Vec<(String, String)>,
    rows: Vec<ReportRow>,
    trials: impl Iterator<Item = TrialParts>,
) -> Result<RunOutput, BenchError> {
    let complete_basis = enumerate_complete(config.hidden, config.order)
        .map_err(|e| BenchError::Config(e.to_string()))?;
    let mut selected = None;
    let mut selections = Vec::new();
    let mut curves = Vec::new();
    let mut models = Vec::new();
    for (prune, c, m) in trials {
        selections.push(prune.kept_indices.clone());
        selected.get_or_insert(prune);
        curves.extend(c);
        models.extend(m);
    }
    Ok(RunOutput {
        config: config.clone(),
        report: ComparisonReport {
            experiment: config.experiment.clone(),
            layout,
            metadata,
            rows,
        },
        complete_basis,
        selected: selected.ok_or_else(|| BenchError::Config("no trials were run".into()))?,
        selections,
        curves,
        models,
        divergences: Vec::new(),
    })
}
