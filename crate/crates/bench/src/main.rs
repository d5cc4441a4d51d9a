use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use spsnn_bench::config::{CurveMode, ExperimentConfig};
use spsnn_bench::experiment::{experiments, find_experiment};
use spsnn_bench::output::{text_report, write_outputs};
use spsnn_bench::report::basis_summary;
use spsnn_bench::{run_experiment, BenchError};
use spsnn_core::basis::{enumerate_complete, enumerate_linear};
use spsnn_core::data::{load_csv, LabelColumn, LabelMapping};
use spsnn_core::regularizer::penalties;
use spsnn_core::Model;

#[derive(Parser)]
#[command(
    name = "spsnn",
    version,
    about = "Sigma-Pi-Sigma networks with adaptive product layers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment: baseline vs structural optimization + refinement.
    Run(Box<RunArgs>),
    /// List registered experiments and penalties.
    List,
    /// Print a monomial basis.
    Basis {
        /// Number of σ variables.
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 3)]
        order: usize,
        #[arg(long, value_enum, default_value_t = BasisKind::Complete)]
        kind: BasisKind,
        /// Write the `.basis` file format instead of a table.
        #[arg(long)]
        raw: bool,
    },
    /// Evaluate a saved model on a CSV file.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Zero-based label column (default: last).
        #[arg(long)]
        label_column: Option<usize>,
        /// Label mapping such as `R=0,M=1`; labels are numeric otherwise.
        #[arg(long)]
        labels: Option<String>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum BasisKind {
    Complete,
    Linear,
}

#[derive(clap::Args)]
struct RunArgs {
    /// Experiment name (see `spsnn list`); may also come from the config file.
    #[arg(long)]
    experiment: Option<String>,
    /// TOML file with ExperimentConfig keys, applied over the experiment preset.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Learning rates for refinement and the baseline, comma separated.
    #[arg(long, value_delimiter = ',')]
    eta: Option<Vec<f64>>,
    /// Learning rate of structural optimization.
    #[arg(long)]
    structural_eta: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    /// Smoothing half-width of the penalty.
    #[arg(long)]
    a: Option<f64>,
    /// Iterations of structural optimization and of refinement (each).
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    rounds: Option<usize>,
    #[arg(long)]
    folds: Option<usize>,
    /// Width N of the first summation layer.
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    order: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    penalty: Option<String>,
    /// Dataset file (required for `custom`).
    #[arg(long)]
    data: Option<String>,
    #[arg(long)]
    out: Option<String>,
    /// Which error curves to write: first, all or none.
    #[arg(long)]
    curves: Option<CurveMode>,
    /// Use the growing-envelope Gabor formula instead of the decaying one.
    #[arg(long)]
    gabor_literal_sign: bool,
    /// Always keep the constant monomial when pruning.
    #[arg(long)]
    keep_constant: bool,
}

impl RunArgs {
    fn resolve(&self) -> Result<ExperimentConfig, BenchError> {
        let file = match &self.config {
            Some(p) => Some(
                std::fs::read_to_string(p)
                    .map_err(|e| BenchError::Config(format!("cannot read {}: {e}", p.display())))?,
            ),
            None => None,
        };
        let name = match (&self.experiment, &file) {
            (Some(n), _) => n.clone(),
            (None, Some(text)) => {
                let table: toml::Table = toml::from_str(text)
                    .map_err(|e| BenchError::Config(format!("config file: {e}")))?;
                match table.get("experiment").and_then(|v| v.as_str()) {
                    Some(n) => n.to_string(),
                    None => return Err(BenchError::Config("no experiment given".into())),
                }
            }
            (None, None) => {
                return Err(BenchError::Config(
                    "no experiment given; pass --experiment or --config".into(),
                ))
            }
        };
        let mut c = find_experiment(&name)?.defaults();
        if let Some(text) = &file {
            c = c.merge_toml(text)?;
        }
        c.experiment = name;
        if let Some(v) = &self.eta {
            c.etas = v.clone();
        }
        if let Some(v) = self.structural_eta {
            c.structural_eta = v;
        }
        if let Some(v) = self.lambda {
            c.lambda = v;
        }
        if let Some(v) = self.a {
            c.a = v;
        }
        if let Some(v) = self.iters {
            c.iters_structural = v;
            c.iters_refine = v;
        }
        if let Some(v) = self.trials {
            c.trials = v;
        }
        if let Some(v) = self.rounds {
            c.rounds = v;
        }
        if let Some(v) = self.folds {
            c.folds = v;
        }
        if let Some(v) = self.hidden {
            c.hidden = v;
        }
        if let Some(v) = self.order {
            c.order = v;
        }
        if let Some(v) = self.seed {
            c.seed = v;
        }
        if let Some(v) = &self.penalty {
            c.penalty = v.clone();
        }
        if let Some(v) = &self.data {
            c.data_file = Some(v.clone());
        }
        if let Some(v) = &self.out {
            c.output_dir = v.clone();
        }
        if let Some(v) = self.curves {
            c.curves = v;
        }
        c.gabor_literal_sign |= self.gabor_literal_sign;
        c.keep_constant |= self.keep_constant;
        c.validate()?;
        Ok(c)
    }
}

fn parse_labels(spec: &str) -> Result<LabelMapping, BenchError> {
    let pairs = spec
        .split(',')
        .map(|pair| {
            let (k, v) = pair
                .split_once('=')
                .ok_or_else(|| BenchError::Config(format!("bad label mapping `{pair}`")))?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| BenchError::Config(format!("bad label value in `{pair}`")))?;
            Ok((k.trim().to_string(), v))
        })
        .collect::<Result<_, BenchError>>()?;
    Ok(LabelMapping::Map(pairs))
}

fn run(cli: Cli) -> Result<(), BenchError> {
    match cli.command {
        Command::Run(args) => {
            let config = args.resolve()?;
            let out = run_experiment(&config)?;
            write_outputs(&out, config.output_path())?;
            print!("{}", text_report(&out)?);
            println!("\nWrote {}", config.output_path().display());
            if let Some(d) = out.divergences.first() {
                return Err(BenchError::Diverged(format!(
                    "{} training runs diverged; the report marks their means as inf (first: {}, seed {}, eta {}, iteration {}: {})",
                    out.divergences.len(),
                    d.arm,
                    d.seed,
                    d.eta,
                    d.iteration,
                    d.reason
                )));
            }
        }
        Command::List => {
            println!("experiments:");
            for e in experiments() {
                println!("  {:<8} {}", e.name(), e.summary());
            }
            println!("penalties:");
            for p in penalties() {
                println!("  {:<13} {}", p.name, p.summary);
            }
        }
        Command::Basis {
            n,
            order,
            kind,
            raw,
        } => {
            let basis = match kind {
                BasisKind::Complete => enumerate_complete(n, order),
                BasisKind::Linear => enumerate_linear(n, order),
            }
            .map_err(|e| BenchError::Config(e.to_string()))?;
            if raw {
                print!("{}", basis.to_basis_string());
            } else {
                print!("{}", basis_summary(&basis, None));
            }
        }
        Command::Eval {
            model,
            data,
            label_column,
            labels,
        } => {
            let text = std::fs::read_to_string(&model)
                .map_err(|e| BenchError::Config(format!("cannot read {}: {e}", model.display())))?;
            let model: Model = text.parse()?;
            let mapping = match labels {
                Some(spec) => parse_labels(&spec)?,
                None => LabelMapping::Numeric,
            };
            let column = label_column.map_or(LabelColumn::Last, LabelColumn::Index);
            let data = load_csv(&data, column, &mapping)?;
            if data.n_features() != model.n_features() {
                return Err(BenchError::Config(format!(
                    "model takes {} features but the data has {}",
                    model.n_features(),
                    data.n_features()
                )));
            }
            let m = model.evaluate(&data).map_err(|source| BenchError::Train {
                context: "evaluation".into(),
                source,
            })?;
            println!("samples  {}", data.len());
            println!("mse      {}", m.mse);
            println!("accuracy {:.2}%", m.accuracy_pct);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
