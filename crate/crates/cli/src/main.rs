//! `netshock` command-line pipelines.

mod commands;
mod manifest;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "netshock", version, about = "Production-network shock analysis pipelines")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// Input directory; repeat to search several directories in order.
    #[arg(long, global = true)]
    pub input: Vec<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    /// Key-value config file layered over the built-in defaults.
    #[arg(long, global = true, env = "NETSHOCK_CONFIG")]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; defaults to all cores.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    /// First day of the study window (YYYY-MM-DD).
    #[arg(long, global = true)]
    pub window_start: Option<String>,
    /// Last day of the study window (YYYY-MM-DD).
    #[arg(long, global = true)]
    pub window_end: Option<String>,
    /// First post-period month (YYYY-MM).
    #[arg(long, global = true)]
    pub post_start: Option<String>,
    /// Fail on the first malformed row.
    #[arg(long, global = true, conflicts_with = "lenient")]
    pub strict: bool,
    /// Skip and count malformed rows.
    #[arg(long, global = true)]
    pub lenient: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic economy and its shipment and accounting records.
    Simulate {
        /// Replace the accounting panel with one carrying this post-period
        /// sales effect per standard deviation of eigenvector centrality change.
        #[arg(long)]
        centrality_effect: Option<f64>,
    },
    /// Validate and filter raw records.
    Ingest,
    /// Build the establishment-pair monthly panel with conflict exposure.
    Panel,
    /// Yearly firm-level flows and input-output matrices.
    Network,
    /// Centrality change predicted from removing conflict-area firms.
    Centrality {
        /// eigenvector, betweenness, degree, indegree or outdegree.
        #[arg(long)]
        kind: Option<String>,
        /// identity or log1p; defaults to log1p for betweenness.
        #[arg(long)]
        transform: Option<String>,
    },
    /// Outside demand backed out from revenues and the network.
    Demand,
    /// Counterfactual scenarios and their revenue distributions.
    Counterfactual {
        /// baseline, destruction, adjustment, outside_demand, total or all.
        #[arg(long, default_value = "all")]
        preset: String,
    },
    /// Adjustment path with demand pinned at the pre-period.
    Dynamics,
    /// Difference-in-differences estimation.
    Did {
        /// Named preset or path to a key-value spec file.
        #[arg(long, visible_alias = "preset")]
        spec: String,
    },
    /// Region-level adjustment counterfactual.
    Aggregate {
        /// province or district.
        #[arg(long)]
        level: Option<String>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            eprintln!("error[usage]: {}", e.kind());
            let _ = e.print();
            return ExitCode::from(2);
        }
    };
    match commands::run(&cli.global, &cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {}", e.category(), e.to_string().replace('\n', " "));
            ExitCode::from(1)
        }
    }
}
