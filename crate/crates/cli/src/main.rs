//! Batch command-line front end.
//!
//! Results go to stdout, diagnostics and the effective configuration to
//! stderr. Exit codes: 0 success, 1 usage error, 2 domain error, 3 internal
//! error.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "autoderive", version, about = "Formula derivation by template rewriting with learned rule choice")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Global {
    /// Rule file; defaults to the packaged ODE rules.
    #[arg(long, global = true)]
    pub rule_file: Option<PathBuf>,
    /// Symbol table file; defaults to the canonical codes.
    #[arg(long, global = true)]
    pub table: Option<PathBuf>,
    /// Encoding length; overrides the table's own value.
    #[arg(long, global = true)]
    pub l_max: Option<usize>,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, global = true, default_value_t = 50)]
    pub step_cap: usize,
    /// Run batch work on the calling thread only.
    #[arg(long, global = true)]
    pub sequential: bool,
    /// Do not echo the effective configuration.
    #[arg(long, short, global = true)]
    pub quiet: bool,
}

/// A formula given inline or read from a file.
#[derive(Debug, Args, Clone)]
#[group(required = true, multiple = false)]
pub struct FormulaArg {
    /// Constructor text, e.g. `Equal(Sym("a"),Sym("b"))`.
    #[arg(long)]
    pub formula: Option<String>,
    /// File holding constructor text.
    #[arg(long)]
    pub file: Option<PathBuf>,
}

#[derive(Debug, Args, Clone)]
#[group(required = true, multiple = false)]
pub struct GoalArg {
    /// Template with `?` wildcards that must match at the root.
    #[arg(long)]
    pub goal_pattern: Option<String>,
    /// Exact target formula.
    #[arg(long)]
    pub goal_exact: Option<String>,
    /// Variable that must be isolated on the left of `=`.
    #[arg(long)]
    pub goal_solved: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Learner {
    Supervised,
    Q,
    Hybrid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Selection {
    Greedy,
    Epsilon,
    Sample,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse a formula and print its canonical text.
    Parse(FormulaArg),
    /// Print a formula's feature vector.
    Encode(FormulaArg),
    /// Positional difference between two formulas' encodings.
    Dist {
        /// File holding the first formula.
        #[arg(long)]
        a: PathBuf,
        /// File holding the second formula.
        #[arg(long)]
        b: PathBuf,
    },
    /// List every site where a template matches.
    Match {
        #[command(flatten)]
        input: FormulaArg,
        /// Template text; `?` leaves become fresh pattern variables.
        #[arg(long)]
        template: String,
        /// Comma-separated symbol names that act as pattern variables.
        #[arg(long, value_delimiter = ',')]
        vars: Vec<String>,
    },
    /// Apply one rule and print the result.
    Apply {
        #[command(flatten)]
        input: FormulaArg,
        #[arg(long)]
        rule: String,
        /// Site such as `[0,1]`; defaults to the first match.
        #[arg(long)]
        site: Option<String>,
    },
    /// Derive from a start formula with a learned model or the search oracle.
    Derive {
        /// File holding the start formula.
        #[arg(long, conflicts_with = "formula")]
        start: Option<PathBuf>,
        /// Start formula as text.
        #[arg(long)]
        formula: Option<String>,
        #[command(flatten)]
        goal: GoalArg,
        #[arg(long)]
        policy: Option<PathBuf>,
        #[arg(long)]
        qtable: Option<PathBuf>,
        /// Use breadth-first search instead of a model.
        #[arg(long, conflicts_with_all = ["policy", "qtable"])]
        bfs: bool,
        #[arg(long, default_value_t = 12)]
        depth_cap: usize,
        #[arg(long, value_enum, default_value_t = Selection::Greedy)]
        mode: Selection,
        #[arg(long, default_value_t = 0.1)]
        epsilon: f64,
        /// Let the model pick rules that do not apply.
        #[arg(long)]
        unmasked: bool,
        /// Trace file to write; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate an ODE corpus directory.
    Gen {
        #[arg(long, default_value_t = 500)]
        count: usize,
        #[arg(long, default_value_t = 4)]
        max_degree: u32,
        #[arg(long, default_value_t = 5)]
        coef_max: u32,
        #[arg(long, default_value_t = 0.6)]
        separable_fraction: f64,
        #[arg(long, default_value_t = 0.25)]
        quotient_fraction: f64,
        #[arg(long)]
        constants_only: bool,
        #[arg(long, default_value_t = 12)]
        depth_cap: usize,
        #[arg(long, default_value_t = 0.2)]
        test_fraction: f64,
        /// Accept corpora in which some rule is never used.
        #[arg(long)]
        allow_gaps: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a policy or a Q-table on a corpus.
    Train {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, value_enum, default_value_t = Learner::Supervised)]
        learner: Learner,
        #[arg(long, default_value_t = 1000)]
        epochs: usize,
        /// Gradient step size.
        #[arg(long, default_value_t = 2.0)]
        step: f64,
        #[arg(long, default_value_t = 64)]
        hidden: usize,
        #[arg(long, default_value_t = 0.9)]
        gamma: f64,
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
        /// Exploration probability for Q-learning.
        #[arg(long, default_value_t = 0.1)]
        epsilon: f64,
        #[arg(long, default_value_t = 5000)]
        episodes: usize,
        #[arg(long, default_value_t = 32)]
        batch: usize,
        /// Policy checkpoint guiding unseen states (hybrid learner).
        #[arg(long)]
        policy: Option<PathBuf>,
        /// Checkpoint or Q-table file to write.
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a model on a corpus's held-out split.
    Eval {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        policy: Option<PathBuf>,
        #[arg(long)]
        qtable: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .target(env_logger::Target::Stderr)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let outcome = std::panic::catch_unwind(|| commands::run(&cli));
    match outcome {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(e.exit_code())
        }
        Err(_) => ExitCode::from(3),
    }
}
