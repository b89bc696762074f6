//! `pn`: configuration-driven experiment runner for the reduced nonlocal
//! dislocation model. Every subcommand writes its artifacts plus a manifest
//! (config echo, config hash, versions, per-check pass/fail) into `--out`.

mod commands;
mod manifest;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;

/// Parses plain floats or small fractions like `4/3`.
fn parse_ratio(s: &str) -> Result<f64, String> {
    if let Some((num, den)) = s.split_once('/') {
        let n: f64 = num.trim().parse().map_err(|e| format!("{e}"))?;
        let d: f64 = den.trim().parse().map_err(|e| format!("{e}"))?;
        if d == 0.0 {
            return Err("zero denominator".into());
        }
        Ok(n / d)
    } else {
        s.trim().parse().map_err(|e| format!("{e}"))
    }
}

#[derive(Debug, Args, Clone)]
struct Common {
    /// JSON config file; command-line flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for tables, field files, and the manifest.
    #[arg(long, default_value = "pn-out")]
    out: PathBuf,
    /// Seed for every randomized generation step.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Solver tolerance override.
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Debug, Args)]
struct KernelArgs {
    #[command(flatten)]
    common: Common,
    /// Anisotropy parameters beta = 1 - nu (repeat or comma-separate).
    #[arg(long, value_parser = parse_ratio, value_delimiter = ',', num_args = 1..)]
    beta: Vec<f64>,
    #[arg(long)]
    nodes: Option<usize>,
    #[arg(long)]
    quad_order: Option<usize>,
}

#[derive(Debug, Args)]
struct ProfileArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_parser = parse_ratio)]
    beta_tilde: Option<f64>,
    /// Misfit potential kind; only the built-in sinusoidal one is runnable
    /// from the command line.
    #[arg(long)]
    potential: Option<String>,
    #[arg(long)]
    half_width: Option<f64>,
    #[arg(long)]
    n: Option<usize>,
}

#[derive(Debug, Args)]
struct Solve2dArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_parser = parse_ratio)]
    beta: Option<f64>,
    #[arg(long)]
    l1: Option<f64>,
    #[arg(long)]
    l2: Option<f64>,
    #[arg(long)]
    n1: Option<usize>,
    #[arg(long)]
    n2: Option<usize>,
    /// Amplitude of the band-limited noise added to the straight profile.
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    max_mode: Option<usize>,
}

#[derive(Debug, Args)]
struct StabilityArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_parser = parse_ratio)]
    beta: Option<f64>,
    /// Ball radii for the monitored energy trend.
    #[arg(long, value_parser = parse_ratio, value_delimiter = ',', num_args = 1..)]
    radii: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
struct ExtendArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_parser = parse_ratio)]
    nu: Option<f64>,
    #[arg(long)]
    n1: Option<usize>,
    #[arg(long)]
    n2: Option<usize>,
    /// Height of the exported displacement slice.
    #[arg(long)]
    x3: Option<f64>,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    #[command(flatten)]
    common: Common,
    /// Skip the slower cross-validation items.
    #[arg(long, default_value_t = false)]
    quick: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Angular kernel tables, closed-form anchors, and ODE residuals.
    Kernel(KernelArgs),
    /// 1D bistable profile solve with the exact-solution oracle.
    Profile(ProfileArgs),
    /// 2D solve from a seeded noisy start, with flatness diagnostics.
    Solve2d(Solve2dArgs),
    /// Stability certificates and monitored energy ratios.
    Stability(StabilityArgs),
    /// Half-space elastic extension with traction checks.
    Extend(ExtendArgs),
    /// Run the cross-module invariant suite.
    Validate(ValidateArgs),
}

#[derive(Debug, Parser)]
#[command(name = "pn", about, version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let all_passed = match cli.command {
        Command::Kernel(a) => commands::run_kernel(a)?,
        Command::Profile(a) => commands::run_profile(a)?,
        Command::Solve2d(a) => commands::run_solve2d(a)?,
        Command::Stability(a) => commands::run_stability(a)?,
        Command::Extend(a) => commands::run_extend(a)?,
        Command::Validate(a) => commands::run_validate(a)?,
    };
    if !all_passed {
        std::process::exit(1);
    }
    Ok(())
}
