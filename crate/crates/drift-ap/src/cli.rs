//! Command-line interface: `run`, `tables` and `check`.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::{mode_name, scheme_name, side_assignment_note, RunConfig};
use crate::tables::{reproduce_tables, write_tables, Preset, TableOptions};
use crate::{check, harness, output, HarnessError};

/// Exit status for success.
pub const EXIT_OK: u8 = 0;
/// Runtime failure, or a diverged run under `--strict`.
pub const EXIT_RUNTIME: u8 = 1;
/// Invalid flags or values.
pub const EXIT_USAGE: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "drift-ap", version, about = "Asymptotic-preserving Euler-Lorentz solver and experiment harness")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one configuration and write its outputs.
    Run(RunArgs),
    /// Reproduce a table preset.
    Tables(TablesArgs),
    /// Run the fast self-check suite.
    Check,
}

/// Flags of `run`. Every flag overrides the value read from `--config`.
#[derive(Debug, Args, Default)]
pub struct RunArgs {
    /// `key = value` file with the same keys as the flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// ap | conventional | drift-limit
    #[arg(long)]
    pub scheme: Option<String>,
    /// resolved | nonresolved
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub epsilon: Option<String>,
    #[arg(long = "epsilon-prime")]
    pub epsilon_prime: Option<String>,
    /// prepared | unprepared
    #[arg(long)]
    pub case: Option<String>,
    #[arg(long)]
    pub cfl: Option<String>,
    #[arg(long)]
    pub nx: Option<String>,
    #[arg(long)]
    pub ny: Option<String>,
    #[arg(long = "t-final")]
    pub t_final: Option<String>,
    /// Comma-separated observation times before the final time.
    #[arg(long)]
    pub snapshots: Option<String>,
    #[arg(long = "max-steps")]
    pub max_steps: Option<String>,
    /// Output directory (default `results`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Exit with status 1 when the run diverges.
    #[arg(long)]
    pub strict: bool,
}

#[derive(Debug, Args)]
pub struct TablesArgs {
    /// errors-resolved | errors-nonresolved | dt-table | cpu-table | eps1-compare | unprepared
    #[arg(long)]
    pub preset: String,
    #[arg(long, default_value = "results")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 100)]
    pub nx: usize,
    #[arg(long, default_value_t = 100)]
    pub ny: usize,
    #[arg(long, default_value_t = 0.5)]
    pub cfl: f64,
}

/// Resolves a configuration: defaults, then the config file, then flags.
pub fn resolve_config(args: &RunArgs) -> Result<RunConfig, HarnessError> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &args.config {
        cfg.apply_text(&std::fs::read_to_string(path)?)?;
    }
    let flags = [
        ("scheme", &args.scheme),
        ("mode", &args.mode),
        ("epsilon", &args.epsilon),
        ("epsilon-prime", &args.epsilon_prime),
        ("case", &args.case),
        ("cfl", &args.cfl),
        ("nx", &args.nx),
        ("ny", &args.ny),
        ("t-final", &args.t_final),
        ("snapshots", &args.snapshots),
        ("max-steps", &args.max_steps),
    ];
    for (key, value) in flags {
        if let Some(v) = value {
            cfg.set(key, v).map_err(|e| match e {
                HarnessError::Value { value, .. } => HarnessError::Value { key: format!("--{key}"), value },
                other => other,
            })?;
        }
    }
    if let Some(out) = &args.out {
        cfg.out_dir = Some(out.clone());
    }
    if cfg.out_dir.is_none() {
        cfg.out_dir = Some(PathBuf::from("results"));
    }
    cfg.validate().map_err(|e| match e {
        HarnessError::Value { key, value } if !key.starts_with("--") => HarnessError::Value { key: format!("--{key}"), value },
        other => other,
    })?;
    Ok(cfg)
}

fn is_usage(e: &HarnessError) -> bool {
    matches!(
        e,
        HarnessError::Value { .. }
            | HarnessError::UnknownKey(_)
            | HarnessError::Syntax { .. }
            | HarnessError::Precondition(_)
            | HarnessError::UnknownPreset(_)
    )
}

fn report_error(e: &HarnessError) -> u8 {
    eprintln!("error: {e}");
    if is_usage(e) {
        EXIT_USAGE
    } else {
        EXIT_RUNTIME
    }
}

fn cmd_run(args: &RunArgs) -> u8 {
    let cfg = match resolve_config(args) {
        Ok(c) => c,
        Err(e) => return report_error(&e),
    };
    let out = cfg.out_dir.clone().unwrap_or_else(|| PathBuf::from("results"));
    // Echo the resolved config before running so a failed run still leaves
    // its provenance behind.
    let echo = || -> std::io::Result<()> {
        std::fs::create_dir_all(&out)?;
        std::fs::write(out.join("config_resolved.txt"), cfg.render() + &side_assignment_note())
    };
    if let Err(e) = echo() {
        return report_error(&e.into());
    }
    let report = match harness::run(&cfg) {
        Ok(r) => r,
        Err(e) => return report_error(&e),
    };
    if let Err(e) = output::write_run(&report, &out) {
        return report_error(&e.into());
    }
    print_summary(&report, &out);
    match &report.diverged {
        Some(e) => {
            eprintln!("warning: run diverged at t = {:e}: {e}", report.final_time);
            if args.strict {
                EXIT_RUNTIME
            } else {
                EXIT_OK
            }
        }
        None => EXIT_OK,
    }
}

fn print_summary(r: &harness::RunReport, out: &Path) {
    let m = r.metrics;
    println!(
        "{} {} eps={:e} t={:e} steps={} max_dt={:e} wall={:.3}s",
        scheme_name(r.config.scheme),
        mode_name(r.config.effective_mode()),
        r.config.epsilon,
        r.final_time,
        r.steps,
        r.max_dt(),
        r.wall_seconds
    );
    println!(
        "difference to drift limit: n {:.3e} %  nu_x {:.3e} %  nu_y {:.3e} %  |nu_z| {:.3e}",
        m.n_rel_pct, m.mx_rel_pct, m.my_rel_pct, m.mz_abs
    );
    println!("outputs in {}", out.display());
}

fn cmd_tables(args: &TablesArgs) -> u8 {
    let preset: Preset = match args.preset.parse() {
        Ok(p) => p,
        Err(e) => return report_error(&e),
    };
    if args.nx < 2 || args.ny < 2 || !(args.cfl > 0.0 && args.cfl <= 1.0) {
        return report_error(&HarnessError::Value { key: "--nx/--ny/--cfl".into(), value: "out of range".into() });
    }
    let opts = TableOptions { nx: args.nx, ny: args.ny, cfl: args.cfl, ..Default::default() };
    let tables = match reproduce_tables(preset, &opts) {
        Ok(t) => t,
        Err(e) => return report_error(&e),
    };
    if let Err(e) = write_tables(&tables, &args.out) {
        return report_error(&e.into());
    }
    for t in &tables {
        println!("{}", t.to_markdown());
    }
    EXIT_OK
}

fn cmd_check() -> u8 {
    let results = check::run_checks();
    for p in &results {
        println!("{} {}: {}", if p.passed { "ok  " } else { "FAIL" }, p.name, p.detail);
    }
    match results.iter().find(|p| !p.passed) {
        Some(p) => {
            eprintln!("check failed: {}", p.name);
            EXIT_RUNTIME
        }
        None => EXIT_OK,
    }
}

/// Dispatches a parsed command line and returns the exit status.
pub fn execute(cli: &Cli) -> u8 {
    match &cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Tables(args) => cmd_tables(args),
        Command::Check => cmd_check(),
    }
}
