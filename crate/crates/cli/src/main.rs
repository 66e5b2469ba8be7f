use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use regosense_cli::commands::{
    cmd_analyze, cmd_defaults, cmd_evaluate, cmd_simulate, SimulateOverrides,
};

/// Deterministic quadruped terrain-sensing simulator and analysis toolkit.
#[derive(Parser)]
#[command(name = "regosense", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print a complete scenario configuration as TOML.
    Defaults {
        /// Built-in scenario: exp1-crawl, exp1-trot, exp2-crawl, exp2-trot.
        #[arg(long)]
        scenario: Option<String>,
    },
    /// Run a seeded batch of trials into a run directory.
    Simulate {
        /// Scenario configuration file (TOML).
        #[arg(long)]
        config: PathBuf,
        /// Run directory to create (relative paths resolve against
        /// $REGOSENSE_OUT_ROOT when set).
        #[arg(long)]
        out: PathBuf,
        /// Override the batch seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the number of trials.
        #[arg(long)]
        trials: Option<usize>,
        /// Override the terrain preset.
        #[arg(long)]
        preset: Option<String>,
    },
    /// Analyze a run directory's logs into a per-step estimates table.
    Analyze {
        /// Run directory produced by `simulate`.
        #[arg(long)]
        run: PathBuf,
    },
    /// Score estimates into a JSON report and CSV plot tables.
    Evaluate {
        /// Run directories produced by `simulate` + `analyze`; repeatable.
        #[arg(long = "run", required = true)]
        runs: Vec<PathBuf>,
        /// Output directory for the report (default: first run directory).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Defaults { scenario } => {
            cmd_defaults(scenario.as_deref()).map(|text| print!("{text}"))
        }
        Command::Simulate {
            config,
            out,
            seed,
            trials,
            preset,
        } => cmd_simulate(
            config,
            out,
            &SimulateOverrides {
                seed: *seed,
                trials: *trials,
                preset: preset.clone(),
            },
        )
        .map(|m| {
            println!(
                "simulated {} trial(s) of '{}' (seed {})",
                m.trials, m.scenario_name, m.seed
            );
        }),
        Command::Analyze { run } => cmd_analyze(run).map(|outcomes| {
            println!("analyzed {} step(s)", outcomes.len());
        }),
        Command::Evaluate { runs, out } => {
            cmd_evaluate(runs, out.as_deref()).map(|report| {
                for s in &report.runs {
                    println!(
                        "{}: {} steps, sensitivity {:.3}, specificity {:.3}",
                        s.run,
                        s.report.n_steps,
                        s.report.sensitivity,
                        s.report.specificity
                    );
                }
            })
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
