//! `hoig`: train models, compute higher-order attributions, verify them and
//! export interaction graphs.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Exit status and message of a failed command.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Numerical(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Numerical(m) => m,
        }
    }
}

impl From<hoig_core::Error> for CliError {
    fn from(e: hoig_core::Error) -> Self {
        use hoig_core::Error as E;
        match e {
            E::Data(e) => CliError::Data(e.to_string()),
            E::InvalidArgument(m) => CliError::Usage(m),
            E::Topology(hoig_core::topology::TopologyError::Json(e)) => CliError::Data(e.to_string()),
            E::Topology(hoig_core::topology::TopologyError::InvalidThreshold(t)) => {
                CliError::Usage(format!("threshold must lie in [0, 1], got {t}"))
            }
            E::Engine(hoig_core::EngineError::Model(hoig_core::ModelError::DimensionMismatch { expected, found })) => {
                CliError::Data(format!("input has {found} features, model expects {expected}"))
            }
            E::Engine(hoig_core::EngineError::OrderCapExceeded { order, cap }) => {
                CliError::Usage(format!("order {order} exceeds the cap of {cap}"))
            }
            other => CliError::Numerical(other.to_string()),
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "hoig", version, about = "Higher-order Integrated Gradients workbench")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate the eight-feature synthetic dataset as CSV.
    Synth(SynthArgs),
    /// Fit a model to a CSV file and write it as JSON.
    Train {
        #[command(subcommand)]
        kind: TrainKind,
    },
    /// Compute attribution tensors of orders 1..=L for one input.
    Explain(ExplainArgs),
    /// Check completeness, marginalization and symmetry of a tensor stack.
    Verify(VerifyArgs),
    /// Turn a tensor stack into an interaction graph (or complex, with order 3).
    ExportGraph(ExportArgs),
    /// Run an end-to-end experiment.
    Experiment {
        #[command(subcommand)]
        kind: ExperimentKind,
    },
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 500)]
    pub samples: usize,
    #[arg(long, default_value_t = 0.1)]
    pub noise: f64,
    /// Output CSV.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone)]
pub struct DataArgs {
    /// CSV file with a header row.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "y")]
    pub target: String,
    /// Columns to ignore, such as row ids. Repeatable.
    #[arg(long)]
    pub exclude: Vec<String>,
    /// Skip malformed rows instead of failing.
    #[arg(long)]
    pub skip_bad_rows: bool,
}

#[derive(Subcommand, Debug)]
pub enum TrainKind {
    /// Gaussian process regression with an RBF kernel.
    Gpr {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        lengthscale: Option<f64>,
        #[arg(long)]
        signal_variance: Option<f64>,
        #[arg(long)]
        noise_variance: Option<f64>,
        #[arg(long)]
        grid_search: bool,
        #[arg(long)]
        center_targets: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Logistic-link model over quadratic features of standardized inputs.
    Glm {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value_t = 200)]
        max_iters: usize,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodArg {
    Hessian,
    Compose,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum RuleArg {
    RightHand,
    Trapezoid,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum FormatArg {
    Json,
    Dot,
}

#[derive(Args, Debug, Clone)]
pub struct QuadratureArgs {
    /// Quadrature points per integration level.
    #[arg(long, default_value_t = 100)]
    pub points: usize,
    #[arg(long, value_enum, default_value_t = RuleArg::RightHand)]
    pub rule: RuleArg,
}

#[derive(Args, Debug)]
pub struct ExplainArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Comma-separated input vector.
    #[arg(long, conflicts_with = "input_row", allow_hyphen_values = true)]
    pub input: Option<String>,
    /// 0-based row of --data to explain.
    #[arg(long, requires = "data")]
    pub input_row: Option<usize>,
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, default_value = "y")]
    pub target: String,
    #[arg(long)]
    pub exclude: Vec<String>,
    /// `zero`, `mean`, or a comma-separated vector. Defaults to `mean` for
    /// models trained on standardized inputs and `zero` otherwise.
    #[arg(long, allow_hyphen_values = true)]
    pub baseline: Option<String>,
    #[arg(long, default_value_t = 2)]
    pub order: usize,
    #[arg(long, value_enum, default_value_t = MethodArg::Compose)]
    pub method: MethodArg,
    #[command(flatten)]
    pub quadrature: QuadratureArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    /// JSON array of tensors written by `explain`; `-` reads stdin.
    #[arg(long)]
    pub tensors: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ExportArgs {
    #[arg(long)]
    pub tensors: PathBuf,
    #[arg(long, default_value_t = hoig_core::topology::DEFAULT_THRESHOLD)]
    pub threshold: f64,
    #[arg(long, value_enum, default_value_t = FormatArg::Json)]
    pub format: FormatArg,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum ExperimentKind {
    /// Structure recovery on the synthetic benchmark.
    Synthetic {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 500)]
        samples: usize,
        #[arg(long, default_value_t = 0.1)]
        noise: f64,
        /// Explain the generating polynomial instead of a fitted GPR.
        #[arg(long)]
        true_model: bool,
        #[command(flatten)]
        quadrature: QuadratureArgs,
        #[arg(long, default_value_t = hoig_core::topology::DEFAULT_THRESHOLD)]
        threshold: f64,
        #[arg(long, default_value_t = hoig_core::experiments::STRUCTURE_THRESHOLD)]
        structure_threshold: f64,
        /// Output directory; defaults to $HOIG_OUT_DIR or `hoig-out`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Explain randomly chosen rows of a price dataset with a fitted GLM.
    Realestate {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value_t = 3)]
        houses: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 2)]
        order: usize,
        #[arg(long, value_enum, default_value_t = MethodArg::Compose)]
        method: MethodArg,
        #[command(flatten)]
        quadrature: QuadratureArgs,
        #[arg(long, default_value_t = hoig_core::topology::DEFAULT_THRESHOLD)]
        threshold: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}
