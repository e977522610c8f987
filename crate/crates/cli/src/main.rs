mod commands;

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

/// Learn influence diagrams from one explained example, solve them and
/// simulate belief revision across stages.
#[derive(Debug, Parser)]
#[command(name = "tbil", version, about)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Scenario file (JSON).
    #[arg(value_name = "SCENARIO")]
    pub path: Option<PathBuf>,
    /// Scenario file, as an alternative to the positional argument.
    #[arg(long = "scenario", value_name = "PATH", conflicts_with = "path")]
    pub scenario: Option<PathBuf>,
    /// Write machine-readable results to PATH (`-` for stdout).
    #[arg(long, value_name = "PATH")]
    pub json: Option<PathBuf>,
    /// Override every instrument's measurement cost (utils).
    #[arg(long, value_name = "UTILS")]
    pub cost: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Prove the example, generalize the proof and print the influence diagram.
    Explain {
        #[command(flatten)]
        common: Common,
        /// Write the influence diagram in Graphviz format.
        #[arg(long, value_name = "PATH")]
        dot: Option<PathBuf>,
        /// Explain a node of the generalized explanation, e.g. `PathDecision`.
        #[arg(long, value_name = "EVENT")]
        why: Option<String>,
    },
    /// Solve the decision problem by decision-tree rollback.
    Solve {
        #[command(flatten)]
        common: Common,
        /// Also print the compiled decision tree.
        #[arg(long)]
        tree: bool,
    },
    /// Value of perfect or sample information.
    Voi {
        #[command(flatten)]
        common: Common,
        /// Chance variable to observe perfectly before every decision.
        #[arg(long, value_name = "VARIABLE", required_unless_present = "instrument", conflicts_with = "instrument")]
        perfect: Option<String>,
        /// Instrument (or its measurement decision) to value.
        #[arg(long, value_name = "NAME")]
        instrument: Option<String>,
    },
    /// Revise the belief in the latent hypothesis after one observation.
    Update {
        #[command(flatten)]
        common: Common,
        /// Observed outcome, e.g. `Resists`.
        #[arg(long, value_name = "OUTCOME")]
        observation: String,
        /// Prior odds of the hypothesis (default: the scenario's prior).
        #[arg(long, conflicts_with = "prior")]
        odds: Option<f64>,
        /// Prior probability of the hypothesis.
        #[arg(long)]
        prior: Option<f64>,
        #[arg(long, default_value = "aggregate", value_name = "aggregate|exact")]
        mode: String,
        /// Information state for exact mode, e.g. `MeasuredDensity=.4` (repeatable).
        #[arg(long, value_name = "VAR=VALUE")]
        given: Vec<String>,
    },
    /// Run the decide, observe and update loop.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the per-stage trace as CSV.
        #[arg(long, value_name = "PATH")]
        trace: Option<PathBuf>,
    },
    /// Independent simulation runs over seeds `seed .. seed + runs`.
    Replicate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        runs: u64,
    },
    /// Belief at which the policy switches and the expected number of
    /// observations to reach it.
    PredictSwitch {
        #[command(flatten)]
        common: Common,
        /// Latent outcome assumed true (default: the alternative to the hypothesis).
        #[arg(long)]
        truth: Option<String>,
        #[arg(long, default_value = "aggregate", value_name = "aggregate|exact")]
        mode: String,
        /// Use this average likelihood ratio instead of deriving it.
        #[arg(long, value_name = "L")]
        avg_l: Option<f64>,
        /// Prior odds of the hypothesis (default: the scenario's prior).
        #[arg(long)]
        odds: Option<f64>,
        /// Switch belief P(H) (default: derived from the diagram).
        #[arg(long, value_name = "P")]
        threshold: Option<f64>,
    },
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Number of stages (default: the scenario's horizon).
    #[arg(long)]
    pub stages: Option<usize>,
    #[arg(long, default_value = "aggregate", value_name = "aggregate|exact")]
    pub mode: String,
    /// Latent outcome that holds in every stage (default: drawn from the prior).
    #[arg(long)]
    pub truth: Option<String>,
    /// Keep acting on the initial policy.
    #[arg(long)]
    pub frozen: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(e.exit_code())
        }
    }
}
