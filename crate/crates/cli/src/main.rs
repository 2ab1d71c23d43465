//! `circlab`: energies of circle maps from the command line.
//!
//! Exit status: 0 when every check passes, 2 when an expected signature or
//! check fails, 1 on configuration or runtime errors.

mod commands;
mod config;

use anyhow::{Context, Result};
use circlab::studies::Functional;
use clap::{Parser, Subcommand};
use commands::Report;
use config::{Defaults, Flags, Format, RunConfig};
use std::io::Write;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "circlab",
    version,
    about = "Energies of circle homeomorphisms and their harmonic extensions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Level-resolved functionals for one map at paired (p, alpha, lambda) points.
    Energy(Flags),
    /// Region labels and E1/I1/I2 classifications over the grid of all combinations.
    Sweep(Flags),
    /// Finite/divergent signatures of the Cantor-type examples and the identity map.
    Examples(Flags),
    /// A_p constants under trial doubling and the Jones factorization.
    WeightsCheck(Flags),
    /// Monotonicity and convexity of the Orlicz functions.
    OrliczCheck(Flags),
}

const ALL: &[Functional] = &Functional::ALL;

fn run(cli: Cli) -> Result<Report> {
    let (name, flags, defaults, run): (&str, Flags, Defaults, fn(&RunConfig) -> Result<Report>) =
        match cli.command {
            Command::Energy(f) => (
                "energy",
                f,
                Defaults {
                    map: "identity",
                    p: &[2.0],
                    alpha: &[0.0],
                    lambda: &[0.0],
                    levels: 12,
                    functionals: ALL,
                },
                commands::energy,
            ),
            Command::Sweep(f) => (
                "sweep",
                f,
                Defaults {
                    map: "identity",
                    p: &[1.5, 2.0, 3.0],
                    alpha: &[-1.0, -0.5, 0.0, 0.5],
                    lambda: &[-2.0, 0.0, 2.0],
                    levels: 12,
                    functionals: ALL,
                },
                commands::sweep,
            ),
            Command::Examples(f) => (
                "examples",
                f,
                Defaults {
                    map: "identity",
                    p: &[1.5, 3.0],
                    alpha: &[0.0],
                    lambda: &[0.0],
                    levels: 14,
                    functionals: ALL,
                },
                commands::examples,
            ),
            Command::WeightsCheck(f) => (
                "weights-check",
                f,
                Defaults {
                    map: "identity",
                    p: &[2.0],
                    alpha: &[-0.5, 0.0, 0.5],
                    lambda: &[-2.0, 0.0, 2.0],
                    levels: 12,
                    functionals: ALL,
                },
                commands::weights_check,
            ),
            Command::OrliczCheck(f) => (
                "orlicz-check",
                f,
                Defaults {
                    map: "identity",
                    p: &[1.5, 2.0, 3.0],
                    alpha: &[0.0],
                    lambda: &[-2.0, 0.0, 2.0],
                    levels: 12,
                    functionals: ALL,
                },
                commands::orlicz_check,
            ),
        };
    let cfg = RunConfig::resolve(name, flags, &defaults)?;
    let report = run(&cfg).with_context(|| format!("{name} failed"))?;
    let json = serde_json::to_string_pretty(&report.json)? + "\n";
    if let Some(dir) = &cfg.out {
        std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
        for (ext, text) in [("json", &json), ("csv", &report.csv)] {
            let path = dir.join(format!("{}.{ext}", report.name));
            std::fs::write(&path, text)
                .with_context(|| format!("cannot write {}", path.display()))?;
        }
    }
    let mut out = std::io::stdout().lock();
    match cfg.format {
        Format::Json => out.write_all(json.as_bytes())?,
        Format::Csv => out.write_all(report.csv.as_bytes())?,
    }
    Ok(report)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(r) if r.failed => {
            eprintln!("error: {} checks failed", r.name);
            ExitCode::from(2)
        }
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
