// Licensed under the Apache License, Version 2.0 (the "License"); you may
// not use this file except in compliance with the License. You may obtain
// a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS, WITHOUT
// WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the
// License for the specific language governing permissions and limitations
// under the License.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use ssbv_cli::commands::{self, COUNTS_SCHEMA};
use ssbv_cli::{exit_code, load_config, Overrides};
use ssbv_core::dd::Fallback;

#[derive(Parser)]
#[command(
    name = "ssbv",
    version,
    about = "Single-shot Bernstein-Vazirani speedup pipeline"
)]
struct Cli {
    /// Experiment config (TOML, schema "ssbv-experiment/1").
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed for simulation and bootstrap streams.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// heavy-hex-27, chain, chain:<n> or complete:<n>.
    #[arg(long, global = true)]
    layout: Option<String>,
    #[arg(long, global = true)]
    shots: Option<u64>,
    /// none, ur4, ur14, ur18 or ur:<n>.
    #[arg(long, global = true)]
    dd: Option<String>,
    /// DD pulse length in dt.
    #[arg(long, global = true)]
    dd_pulse_duration: Option<u64>,
    #[arg(long, global = true, value_enum)]
    dd_fallback: Option<FallbackArg>,
    /// No per-oracle progress output.
    #[arg(long, short, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum FallbackArg {
    Ladder,
    Idle,
}

#[derive(Subcommand)]
enum Command {
    /// Route and DD-dress every oracle in scope and write circuit files.
    Generate,
    /// Simulate every oracle in scope and write count files.
    Simulate,
    /// Validate external count files and register them.
    Ingest {
        /// Count files or directories of *.counts files.
        #[arg(required = true)]
        paths: Vec<PathBuf>,
        #[arg(long, default_value = COUNTS_SCHEMA)]
        schema: String,
    },
    /// Compute TTS, exponent fits and success matrices.
    Analyze,
    /// Rewrite the plot files from an existing report.
    PlotData,
}

fn run(cli: Cli) -> ssbv_core::Result<()> {
    let overrides = Overrides {
        seed: cli.seed,
        out: cli.out,
        layout: cli.layout,
        shots: cli.shots,
        dd: cli.dd,
        dd_pulse_duration: cli.dd_pulse_duration,
        dd_fallback: cli.dd_fallback.map(|f| match f {
            FallbackArg::Ladder => Fallback::Ladder,
            FallbackArg::Idle => Fallback::Idle,
        }),
        quiet: cli.quiet,
    };
    let cfg = load_config(cli.config.as_deref(), &overrides)?;
    match cli.command {
        Command::Generate => {
            let m = commands::generate(&cfg)?;
            println!(
                "{} circuit files in {}",
                m.circuits.len(),
                cfg.out.display()
            );
        }
        Command::Simulate => {
            let m = commands::simulate(&cfg)?;
            println!("{} count files in {}", m.tables.len(), cfg.out.display());
        }
        Command::Ingest { paths, schema } => {
            let m = commands::ingest(&cfg, &paths, &schema)?;
            println!("{} count files in {}", m.tables.len(), cfg.out.display());
        }
        Command::Analyze => {
            let r = commands::analyze(&cfg)?;
            match (&r.quantum_fit, r.terminated_at) {
                (Some(f), t) => {
                    println!(
                        "lambda = {:.3} [{:.3}, {:.3}] over [{}, {}]",
                        f.lambda, f.ci_low, f.ci_high, f.window.0, f.window.1
                    );
                    if let Some(n) = t {
                        println!("TTS terminates at n = {n}");
                    }
                }
                (None, _) => println!(
                    "no exponent fit: {}",
                    r.quantum_fit_error.as_deref().unwrap_or("-")
                ),
            }
        }
        Command::PlotData => {
            for p in commands::plot_data(&cfg)? {
                println!("{}", p.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
