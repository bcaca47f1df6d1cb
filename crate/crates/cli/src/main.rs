mod commands;
mod input;
mod output;

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Stability of predictors under shifts in unstable causal mechanisms.
#[derive(Parser, Debug)]
#[command(name = "shiftstable", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Decide whether P(target | Z) is stable, using both criteria.
    Stability(StabilityArgs),
    /// Enumerate stable predictor specs at each level and the optimal one.
    Hierarchy(HierarchyArgs),
    /// MSE curves as one unstable coefficient varies.
    Sweep(SweepArgs),
    /// Average regret and worst-case MSE as the environment prior widens.
    Tradeoff(TradeoffArgs),
    /// Sample observed columns from a model.
    Simulate(SimulateArgs),
}

#[derive(Args, Debug)]
struct GraphSource {
    /// Graph JSON file.
    #[arg(long, conflicts_with = "preset")]
    graph: Option<std::path::PathBuf>,
    /// Built-in graph: pneumonia, style-shift, confounded-child, triangle.
    #[arg(long)]
    preset: Option<String>,
}

#[derive(Args, Debug)]
struct ModelSource {
    /// Model JSON file (graph plus coefficients).
    #[arg(long, conflicts_with = "preset")]
    scm: Option<std::path::PathBuf>,
    /// Built-in model: `triangle` (coefficients 5, 1, 1) or `random-triangle` (drawn from --seed).
    #[arg(long)]
    preset: Option<String>,
}

#[derive(Args, Debug)]
struct StabilityArgs {
    #[command(flatten)]
    source: GraphSource,
    /// Comma-separated conditioning set.
    #[arg(long, value_delimiter = ',')]
    condition: Vec<String>,
    /// Write the report as JSON.
    #[arg(long)]
    out: Option<std::path::PathBuf>,
}

#[derive(Args, Debug)]
struct HierarchyArgs {
    #[command(flatten)]
    source: GraphSource,
    /// Largest candidate count for level-1 enumeration.
    #[arg(long, default_value_t = 20)]
    max_level1: usize,
    /// Largest candidate count for level-2 enumeration.
    #[arg(long, default_value_t = 12)]
    max_level2: usize,
    /// CSV output path; stdout when omitted.
    #[arg(long)]
    out: Option<std::path::PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Fit {
    /// Use the model's own coefficients.
    Exact,
    /// Estimate coefficients from a sample of --n-train rows.
    Estimated,
}

#[derive(Args, Debug)]
struct FitArgs {
    /// Where predictor weights and auxiliary coefficients come from.
    #[arg(long, value_enum)]
    fit: Option<Fit>,
    /// Training rows for `--fit estimated`.
    #[arg(long, default_value_t = 10_000)]
    n_train: usize,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    source: ModelSource,
    #[command(flatten)]
    fit: FitArgs,
    /// Edge to sweep, as `A->B`; required when several directed edges are unstable.
    #[arg(long)]
    edge: Option<String>,
    /// Coefficient grid `lo:hi:steps`.
    #[arg(long)]
    lambda_grid: String,
    #[arg(long)]
    seed: Option<u64>,
    /// CSV output path; stdout when omitted. Metadata goes to `<out>.meta.json`.
    #[arg(long)]
    out: Option<std::path::PathBuf>,
}

#[derive(Args, Debug)]
struct TradeoffArgs {
    #[command(flatten)]
    source: ModelSource,
    #[command(flatten)]
    fit: FitArgs,
    #[arg(long)]
    seed: u64,
    /// Environments drawn per spread.
    #[arg(long, default_value_t = 1000)]
    n_mc: usize,
    /// Prior spread grid `lo:hi:steps`.
    #[arg(long, default_value = "1:4:50")]
    sigma_grid: String,
    #[arg(long, default_value = "source")]
    weights_mode: String,
    /// CSV output path; stdout when omitted. Metadata goes to `<out>.meta.json`.
    #[arg(long)]
    out: Option<std::path::PathBuf>,
    /// Stepwise trace CSV.
    #[arg(long)]
    trace_out: Option<std::path::PathBuf>,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    source: ModelSource,
    #[arg(long)]
    seed: u64,
    /// Number of rows.
    #[arg(long)]
    n: usize,
    /// Replace coefficients before sampling, as `A->B=0.5,C->D=-1`.
    #[arg(long, value_delimiter = ',')]
    coefficients: Vec<String>,
    /// CSV output path; stdout when omitted.
    #[arg(long)]
    out: Option<std::path::PathBuf>,
}

/// Failure classes with their exit codes.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Io(String),
    Parse(String),
    Spec(String),
    Disagreement(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) | Failure::Io(_) => 1,
            Failure::Parse(_) => 2,
            Failure::Spec(_) => 3,
            Failure::Disagreement(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m)
            | Failure::Io(m)
            | Failure::Parse(m)
            | Failure::Spec(m)
            | Failure::Disagreement(m) => m,
        }
    }
}

impl From<shiftstable::Error> for Failure {
    fn from(e: shiftstable::Error) -> Self {
        use shiftstable::Error as E;
        match e {
            E::Parse(_) | E::Csv(_) => Failure::Parse(e.to_string()),
            E::Capacity { .. } => Failure::Spec(format!(
                "{e}; raise --max-level1/--max-level2 or shrink the candidate set"
            )),
            _ => Failure::Spec(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Stability(a) => commands::stability(a),
        Command::Hierarchy(a) => commands::hierarchy(a),
        Command::Sweep(a) => commands::sweep(a),
        Command::Tradeoff(a) => commands::tradeoff(a),
        Command::Simulate(a) => commands::simulate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
