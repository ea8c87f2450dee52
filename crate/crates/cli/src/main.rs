//! `sage`: command-line front end for modeling, solving, verification,
//! simulation, slicing and corpus evaluation.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::commands::Failure;

const AFTER_HELP: &str = "\
Settings are taken from, in decreasing precedence: command-line flags,
SAGE_* environment variables (SAGE_SEED, SAGE_BUDGETS_MODELING, ...),
the config file (--config, else $SAGE_CONFIG, else ./sage.toml) and
built-in defaults. The remote backend reads its bearer token from
SAGE_API_KEY.

Exit codes: 0 success; 1 pipeline failure (budget exhausted, criteria
unmet, defects found, generator or runtime fault); 2 usage, config or
input error.";

#[derive(Debug, Parser)]
#[command(name = "sage", version, about = "Generate, verify and solve agent-based models", after_help = AFTER_HELP)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// Config file (TOML).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Text generator: mock or remote [config: backend].
    #[arg(long, global = true)]
    backend: Option<String>,
    /// Chat-completion URL for the remote backend [config: endpoint].
    #[arg(long, global = true)]
    endpoint: Option<String>,
    /// Model name sent to the remote backend [config: model].
    #[arg(long = "llm-model", global = true, value_name = "NAME")]
    llm_model: Option<String>,
    /// Per-request timeout in seconds [config: timeout_s].
    #[arg(long, global = true, value_name = "SECONDS")]
    timeout_s: Option<String>,
    /// Retries after a timeout or transient HTTP failure [config: max_retries].
    #[arg(long, global = true, value_name = "N")]
    max_retries: Option<String>,
    /// Concurrent remote requests [config: max_in_flight].
    #[arg(long, global = true, value_name = "N")]
    max_in_flight: Option<String>,
    /// Mock fixtures directory holding manifest.json [config: fixtures_dir].
    #[arg(long, global = true, value_name = "DIR")]
    fixtures_dir: Option<PathBuf>,
    /// Root of run artifact directories [config: runs_dir].
    #[arg(long, global = true, value_name = "DIR")]
    runs_dir: Option<PathBuf>,
    /// Name of this run's artifact directory under the runs root.
    #[arg(long, global = true, value_name = "ID")]
    run_id: Option<String>,
    /// More log output on stderr (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Simulation seed [config: seed].
    #[arg(long)]
    seed: Option<String>,
    /// Simulation steps [config: steps].
    #[arg(long)]
    steps: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ReportFormat {
    Json,
    Table,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a program from a conceptual representation and repair it.
    Model {
        #[arg(long, value_name = "PATH")]
        scenario: PathBuf,
        /// Where to write the resulting program.
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
        /// Repair rounds [config: budgets.modeling].
        #[arg(long)]
        budget: Option<String>,
    },
    /// Propose and verify solutions for an objective on a program.
    Solve {
        #[arg(long, value_name = "PATH")]
        objective: PathBuf,
        #[arg(long, value_name = "PATH")]
        model: PathBuf,
        #[command(flatten)]
        run: RunArgs,
        /// Solution iterations [config: budgets.solving].
        #[arg(long)]
        budget: Option<String>,
        /// Repair rounds after each patch [config: budgets.inner_repair].
        #[arg(long)]
        inner_budget: Option<String>,
        /// Also judge the result on this many consecutive seeds.
        #[arg(long, value_name = "N")]
        eval_seeds: Option<u64>,
        /// Where to write the resulting program.
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },
    /// Run a program and print its trace.
    Simulate {
        model: PathBuf,
        #[command(flatten)]
        run: RunArgs,
        /// Write the trace here instead of stdout.
        #[arg(long, value_name = "PATH")]
        trace_out: Option<PathBuf>,
    },
    /// Report verifier-level1 defects as JSON lines (`[]` when clean).
    Verify {
        model: PathBuf,
        /// Conceptual representation to check declared activities against.
        #[arg(long, value_name = "PATH")]
        scenario: Option<PathBuf>,
    },
    /// Judge a candidate program against an objective and a baseline program.
    VerifySolution {
        #[arg(long, value_name = "PATH")]
        objective: PathBuf,
        /// Candidate program.
        #[arg(long, value_name = "PATH")]
        model: PathBuf,
        /// Original program providing the baseline trace.
        #[arg(long, value_name = "PATH")]
        baseline: PathBuf,
        /// One predicate per criterion, one per line; compiled by the
        /// backend when absent.
        #[arg(long, value_name = "PATH")]
        predicates: Option<PathBuf>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Print the backward slice of recorded metrics.
    Slice {
        model: PathBuf,
        /// Metric to slice; every recorder when absent.
        #[arg(long)]
        metric: Option<String>,
    },
    /// Evaluate the modeling (and solving) stage over a corpus.
    Eval {
        #[arg(long, value_name = "DIR")]
        corpus: PathBuf,
        /// Write the report here instead of stdout.
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = ReportFormat::Json)]
        format: ReportFormat,
        /// CodeBLEU weights `ngram,weighted_ngram,ast,dataflow` [config: weights.*].
        #[arg(long, value_name = "W,W,W,W")]
        weights: Option<String>,
        #[command(flatten)]
        run: RunArgs,
        /// Repair rounds per sample [config: budgets.modeling].
        #[arg(long)]
        budget: Option<String>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return ExitCode::from(code.clamp(0, 255) as u8);
        }
    };
    let level = match cli.global.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        2 => log::LevelFilter::Debug,
        _ => log::LevelFilter::Trace,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .parse_env("SAGE_LOG")
        .target(env_logger::Target::Stderr)
        .init();
    match commands::run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(Failure { code, error }) => {
            eprintln!("error: {error:#}");
            ExitCode::from(code)
        }
    }
}
