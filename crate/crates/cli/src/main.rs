//! `rank1-phase`: batch driver for threshold, state-evolution and AMP runs.
//!
//! Every subcommand reads the same experiment config (TOML, or JSON), writes
//! CSV/JSON files into `--out`, and prints a one-line JSON summary. Failures
//! go to stderr as JSON with a non-zero exit code.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use serde_json::json;

use config::{Config, OracleCheck};
use output::Output;

const WORKERS_ENV: &str = "RANK1_PHASE_WORKERS";

#[derive(Parser, Debug)]
#[command(name = "rank1-phase", version, about = "Phase transitions of rank-one matrix estimation")]
struct Cli {
    /// Experiment config (TOML, or JSON by extension or content).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory; defaults to `output.dir` of the config, then `.`.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
    /// Worker threads; RANK1_PHASE_WORKERS takes precedence.
    #[arg(long, global = true, value_name = "N")]
    workers: Option<usize>,
    /// Base node count of the adaptive Gaussian quadrature.
    #[arg(long, global = true, value_name = "N")]
    quad_order: Option<usize>,
    /// Convergence tolerance of the iterative solvers.
    #[arg(long, global = true, value_name = "FLOAT")]
    tol: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Potential curves and their stationary points on `grid.delta`.
    Potential,
    /// Algorithmic and information-theoretic thresholds of the prior.
    Thresholds,
    /// Thresholds over `grid.rho` for `grid.family`.
    PhaseDiagram {
        /// Also tabulate Δ_Opt·4ρ|ln ρ| on this many log-spaced densities in [1e-4, 1e-2].
        #[arg(long, value_name = "POINTS", num_args = 0..=1, default_missing_value = "5")]
        small_rho: Option<usize>,
        /// Locate the end of the first-order region inside [LO, HI].
        #[arg(long, num_args = 2, value_names = ["LO", "HI"])]
        boundary: Option<Vec<f64>>,
    },
    /// State-evolution trajectories on `grid.delta`.
    Se,
    /// Spatially coupled state evolution on the `geometry.l`, `geometry.w` chain.
    CoupledSe {
        /// Run the threshold-saturation experiment on `grid.delta`.
        #[arg(long)]
        saturation: bool,
    },
    /// AMP on synthetic instances, coupled when `geometry.l` and `geometry.w` are set.
    Amp,
    /// Leading-eigenvector estimates on synthetic instances.
    Spectral,
    /// Two-group graphs with AMP and spectral overlaps.
    Community,
    /// Monte Carlo and exact-enumeration checks.
    Oracle {
        #[arg(long, value_enum)]
        check: Option<OracleCheck>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Self::Potential => "potential",
            Self::Thresholds => "thresholds",
            Self::PhaseDiagram { .. } => "phase-diagram",
            Self::Se => "se",
            Self::CoupledSe { .. } => "coupled-se",
            Self::Amp => "amp",
            Self::Spectral => "spectral",
            Self::Community => "community",
            Self::Oracle { .. } => "oracle",
        }
    }
}

fn workers(flag: Option<usize>) -> Result<Option<usize>> {
    let n = match std::env::var(WORKERS_ENV) {
        Ok(v) => Some(v.trim().parse::<usize>().with_context(|| format!("{WORKERS_ENV}={v:?}"))?),
        Err(std::env::VarError::NotPresent) => flag,
        Err(e) => bail!("{WORKERS_ENV}: {e}"),
    };
    if n == Some(0) {
        bail!("worker count must be at least 1");
    }
    Ok(n)
}

/// Config with the command-line overrides applied.
fn effective_config(cli: &Cli) -> Result<Config> {
    let mut cfg = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    if let Some(s) = cli.seed {
        cfg.run.seed = s;
    }
    if let Some(t) = cli.tol {
        if !(t > 0.0 && t.is_finite()) {
            bail!("--tol must be positive, got {t}");
        }
        cfg.run.tol = Some(t);
    }
    if let Some(q) = cli.quad_order {
        cfg.run.quad_order = Some(q);
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<serde_json::Value> {
    let workers = workers(cli.workers)?;
    if let Some(n) = workers {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("worker pool")?;
    }
    let mut cfg = effective_config(cli)?;
    let dir = cli.out.clone().or_else(|| cfg.output.dir.as_ref().map(PathBuf::from)).unwrap_or_else(|| ".".into());
    // the output location does not change results, so it stays out of the hash
    cfg.output.dir = None;
    let name = cli.command.name();
    let out = Output::new(&dir, name, cfg.run.seed, &cfg.hash())?;
    {
        use std::io::Write;
        let mut f = out.text("config.toml")?;
        f.write_all(cfg.to_toml()?.as_bytes())?;
        f.flush()?;
    }

    let failures = match &cli.command {
        Command::Potential => commands::potential(&cfg, &out),
        Command::Thresholds => commands::thresholds_cmd(&cfg, &out),
        Command::PhaseDiagram { small_rho, boundary } => {
            let boundary = boundary.as_ref().map(|b| (b[0], b[1]));
            commands::phase_diagram_cmd(&cfg, &out, *small_rho, boundary)
        }
        Command::Se => commands::se(&cfg, &out),
        Command::CoupledSe { saturation } => commands::coupled_se(&cfg, &out, *saturation),
        Command::Amp => commands::amp(&cfg, &out),
        Command::Spectral => commands::spectral(&cfg, &out),
        Command::Community => commands::community(&cfg, &out),
        Command::Oracle { check } => commands::oracle(&cfg, &out, check.unwrap_or(cfg.oracle.check)),
    }?;

    let summary = json!({
        "status": if failures.is_empty() { "ok" } else { "incomplete" },
        "command": name,
        "out": dir.display().to_string(),
        "files": out.files(),
        "workers": rayon::current_num_threads(),
        "config_hash": cfg.hash(),
        "failures": failures,
    });
    Ok(summary)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(summary) => {
            println!("{summary}");
            if summary["status"] == "ok" {
                ExitCode::SUCCESS
            } else {
                eprintln!("{summary}");
                ExitCode::from(2)
            }
        }
        Err(e) => {
            let causes: Vec<String> = e.chain().map(ToString::to_string).collect();
            let err = json!({
                "status": "error",
                "command": cli.command.name(),
                "error": format!("{e:#}"),
                "causes": causes,
            });
            eprintln!("{err}");
            ExitCode::FAILURE
        }
    }
}
