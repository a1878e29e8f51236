//! Command-line front end for the Sierpiński carpet laboratory.

mod commands;
mod config;

use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use serde_json::json;

use commands::{FunctionArg, GraphKindArg, ModeArg, Outcome, Suite};
use config::{Config, Format, Overrides, Provenance, UsageError};

#[derive(Parser)]
#[command(name = "carpet", version, about = "Discrete energies and resistances on the Sierpinski carpet")]
struct Cli {
    #[command(flatten)]
    overrides: Overrides,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Export the vertex and cell graphs of one level.
    Graph {
        #[arg(long, value_enum, default_value = "carpet")]
        mode: ModeArg,
        #[arg(long, value_enum, default_value = "both")]
        kind: GraphKindArg,
    },
    /// Corner and cell resistances with the scaling fit.
    Resistance,
    /// Exact rational identities.
    Identities {
        /// Perturb one edge weight so the suite must fail.
        #[arg(long, hide = true)]
        corrupt: bool,
    },
    /// Run one empirical verification suite.
    Verify {
        #[arg(value_enum)]
        suite: Suite,
    },
    /// Level energies and partial Besov sums of a test function.
    Energy {
        #[arg(long, value_enum, default_value = "good")]
        function: FunctionArg,
        #[arg(long)]
        beta: Option<f64>,
    },
    /// The harmonic minimizers converging to the good function.
    GoodFunction,
    /// Green function scaling on balls of the infinite carpet graph.
    Green {
        #[arg(long, value_delimiter = ',', default_value = "3,9,27,81")]
        radii: Vec<u32>,
        /// Center in level-0 lattice units (half the unit length).
        #[arg(long, default_value = "0,0", value_parser = parse_center)]
        center: (u64, u64),
    },
}

fn parse_center(s: &str) -> std::result::Result<(u64, u64), String> {
    let (x, y) = s.split_once(',').ok_or("expected x,y")?;
    let coord = |t: &str| t.trim().parse::<u64>().map_err(|e| format!("{t:?}: {e}"));
    Ok((coord(x)?, coord(y)?))
}

fn run(cli: Cli) -> Result<bool> {
    let mut cfg = Config::resolve(&cli.overrides)?;
    if let Some(n) = cfg.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    let outcome = match cli.command {
        Command::Graph { mode, kind } => commands::graph(&mut cfg, mode, kind)?,
        Command::Resistance => commands::resistance(&mut cfg)?,
        Command::Identities { corrupt } => commands::identities(&mut cfg, corrupt)?,
        Command::Verify { suite } => commands::verify(&mut cfg, suite)?,
        Command::Energy { function, beta } => commands::energy(&mut cfg, function, beta)?,
        Command::GoodFunction => commands::good_function(&mut cfg)?,
        Command::Green { radii, center } => commands::green(&mut cfg, &radii, center)?,
    };
    write_report(&cfg, &outcome)?;
    Ok(outcome.hard_passed())
}

fn write_report(cfg: &Config, out: &Outcome) -> Result<()> {
    std::fs::create_dir_all(&cfg.out).with_context(|| format!("creating {}", cfg.out.display()))?;
    let provenance = Provenance::of(cfg);
    let path = match cfg.format {
        Format::Json => {
            let doc = json!({
                "command": out.name,
                "config": cfg,
                "result": out.result,
                "checks": out.checks,
                "hard_checks_passed": out.hard_passed(),
                "provenance": provenance,
            });
            let path = cfg.out.join(format!("{}.json", out.name));
            std::fs::write(&path, serde_json::to_string_pretty(&doc)? + "\n")?;
            path
        }
        Format::Csv => {
            let mut text = format!(
                "# version={} config_hash={}\n",
                provenance.version, provenance.config_hash
            );
            text.push_str(&out.csv);
            let path = cfg.out.join(format!("{}.csv", out.name));
            std::fs::write(&path, text)?;
            path
        }
    };
    for note in &out.notes {
        eprintln!("{note}");
    }
    for c in &out.checks {
        let tag = match (c.passed, c.hard) {
            (true, _) => "PASS",
            (false, true) => "FAIL",
            (false, false) => "WARN",
        };
        if c.detail.is_empty() {
            println!("{tag} {}", c.name);
        } else {
            println!("{tag} {}: {}", c.name, c.detail);
        }
    }
    println!("report written to {}", path.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) if e.is::<UsageError>() => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(3)
        }
    }
}
