use std::path::PathBuf;
use std::process::{Command, ExitCode};

use arma_rcd::cli::{cmd_analyze, cmd_simulate, cmd_validate, render_report, SimulateOptions};
use arma_rcd::config::Overrides;
use arma_rcd::sim::Hypothesis;
use arma_rcd::Error;
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "arma-rcd", version, about = "Running consensus detection of ARMA signals in ARMA noise")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum HypArg {
    #[value(name = "H0")]
    H0,
    #[value(name = "H1")]
    H1,
    #[value(name = "both")]
    Both,
}

impl From<HypArg> for Hypothesis {
    fn from(h: HypArg) -> Self {
        match h {
            HypArg::H0 => Hypothesis::H0,
            HypArg::H1 => Hypothesis::H1,
            HypArg::Both => Hypothesis::Both,
        }
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Check model assumptions and the network for every agent.
    Validate { config: PathBuf },
    /// Print the asymptotic report as JSON.
    Analyze {
        config: PathBuf,
        #[arg(long)]
        gamma: Option<f64>,
        /// Write the JSON here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo error curves plus a run manifest.
    Simulate {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        horizon: Option<usize>,
        /// Worker threads; 0 uses every core.
        #[arg(long, default_value_t = 0)]
        workers: usize,
        #[arg(long, value_enum)]
        hypothesis: Option<HypArg>,
        #[arg(long, allow_negative_numbers = true)]
        gamma: Option<f64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        stride: Option<usize>,
        /// Also write the per-step trace of trial 0.
        #[arg(long)]
        trace: bool,
    },
    /// Render error_curves.csv with the bundled matplotlib script.
    Plot {
        csv: PathBuf,
        #[arg(long, default_value = "error_curves.png")]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Cmd::Validate { config } => {
            let report = cmd_validate(&config)?;
            print!("{}", report.render());
            Ok(if report.ok { ExitCode::SUCCESS } else { ExitCode::from(2) })
        }
        Cmd::Analyze { config, gamma, out } => {
            let report = cmd_analyze(&config, gamma)?;
            let json = serde_json::to_string_pretty(&report)? + "\n";
            match out {
                Some(p) => {
                    std::fs::write(&p, json)?;
                    println!("{}", render_report(&report));
                }
                None => print!("{json}"),
            }
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Simulate { config, seed, trials, horizon, workers, hypothesis, gamma, out, stride, trace } => {
            let opts = SimulateOptions {
                overrides: Overrides {
                    seed,
                    trials,
                    horizon,
                    hypothesis: hypothesis.map(Into::into),
                    gamma,
                    stride,
                },
                workers,
                out_dir: out,
                trace,
            };
            let summary = cmd_simulate(&config, &opts)?;
            println!("{}", summary.line());
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Plot { csv, out } => {
            let script = concat!(env!("CARGO_MANIFEST_DIR"), "/scripts/plot_error_curves.py");
            let status = Command::new("python3").arg(script).arg(&csv).arg(&out).status()?;
            Ok(if status.success() { ExitCode::SUCCESS } else { ExitCode::from(3) })
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
