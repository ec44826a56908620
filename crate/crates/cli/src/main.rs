use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use mmab_cli::{execute, load_plan, Overrides};

#[derive(Parser)]
#[command(
    name = "mmab",
    version,
    about = "Multi-player bandit experiment runner"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a seeded batch and write CSV, JSON and plot artifacts.
    Simulate(SimulateArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Flat `key = value` experiment file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Number of arms.
    #[arg(long = "K")]
    arms: Option<usize>,
    /// Number of players.
    #[arg(long = "M")]
    players: Option<usize>,
    /// Horizon in slots.
    #[arg(long = "T")]
    horizon: Option<u64>,
    #[arg(long)]
    runs: Option<usize>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// proposed, oracle or uniform.
    #[arg(long)]
    policy: Option<String>,
    /// Best mean of a linear profile.
    #[arg(long = "mu-top")]
    mu_top: Option<f64>,
    /// Worst mean of a linear profile.
    #[arg(long = "mu-bottom")]
    mu_bottom: Option<f64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp
                | ErrorKind::DisplayVersion
                | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    let Command::Simulate(args) = cli.command;
    let overrides = Overrides {
        arms: args.arms,
        players: args.players,
        horizon: args.horizon,
        runs: args.runs,
        seed: args.seed,
        policy: args.policy,
        mu_top: args.mu_top,
        mu_bottom: args.mu_bottom,
        out: args.out,
    };
    let result = load_plan(args.config.as_deref(), &overrides).and_then(|plan| execute(&plan));
    match result {
        Ok(report) => {
            let runs = report.records.len();
            println!(
                "{runs} runs, {} optimal assignments, final mean regret {:.3}",
                report.successes(),
                report.final_mean_regret()
            );
            for f in &report.files {
                println!("wrote {}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
