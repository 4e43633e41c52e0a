use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use floquet_cli::{run, ConfigError, Mode, RunConfig, RunError, RunOptions};

/// Quasi-bound states and scattering for a square well under a periodic drive.
#[derive(Debug, Parser)]
#[command(name = "floquet", version)]
struct Args {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Run mode; overrides `mode` in the config.
    #[arg(long)]
    mode: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for grid modes.
    #[arg(long)]
    workers: Option<usize>,
    /// Dotted config key and TOML value, e.g. drive.F2=0.1. Repeatable.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// pole-trace: continue the trajectory already in the output directory.
    #[arg(long)]
    resume: bool,
}

fn configure(args: &Args) -> Result<RunConfig, ConfigError> {
    let mut cfg = match &args.config {
        Some(path) => RunConfig::load(path, &args.overrides)?,
        None => RunConfig::from_toml("", &args.overrides)?,
    };
    if let Some(m) = &args.mode {
        cfg.mode = Some(m.parse::<Mode>()?);
    }
    cfg.mode.ok_or(ConfigError::MissingMode)?;
    if let Some(out) = &args.out {
        cfg.out = Some(out.clone());
    }
    if let Some(w) = args.workers {
        if w == 0 {
            return Err(ConfigError::Invalid { key: "workers", reason: "must be at least 1".into() });
        }
        cfg.workers = w;
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let args = Args::parse();
    let cfg = match configure(&args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(RunError::from(e).exit_code());
        }
    };
    let w = &cfg.well;
    println!(
        "well: V0 = {}, d = {}, A_over_pi = {}, p = {}",
        w.v0,
        w.d.unwrap_or(f64::NAN),
        w.a_over_pi.unwrap_or(f64::NAN),
        w.p
    );
    match run(&cfg, &RunOptions { resume: args.resume }) {
        Ok(outcome) => {
            for f in &outcome.files {
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
