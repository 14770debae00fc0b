mod explore;
mod partition;

use clap::{Parser, Subcommand};
use std::process::ExitCode;

/// Balanced multi-robot exploration on weighted topological graph Voronoi partitions.
#[derive(Parser, Debug)]
#[command(name = "topovor", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run exploration episodes on a scenario and write metrics.
    Explore(explore::ExploreArgs),
    /// Partition a graph snapshot among centers, optionally balancing the loads.
    Partition(partition::PartitionArgs),
}

/// Exit codes beyond 0/1.
pub const EXIT_PARSE: u8 = 2;
pub const EXIT_TRAPPED: u8 = 3;
pub const EXIT_ORPHANS: u8 = 3;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let res = match cli.cmd {
        Command::Explore(a) => explore::run(&a),
        Command::Partition(a) => partition::run(&a),
    };
    match res {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
