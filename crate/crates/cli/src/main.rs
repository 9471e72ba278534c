//! Command-line simulator for the distributed bandit primal-dual method.
//!
//! Exit codes: 0 success, 1 configuration or I/O error, 2 invariant
//! violation, 3 comparator failure.

use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use banditpd::engine::{InvariantMode, Variant};
use banditpd::experiment::{run_experiment, ExperimentConfig, SeriesSummary, PRESETS};
use banditpd::Error;
use clap::{Parser, ValueEnum};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum VariantArg {
    Paper,
    ClippedPrimal,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum InvariantArg {
    Strict,
    Off,
}

#[derive(Debug, Parser)]
#[command(
    name = "banditpd",
    version,
    about = "Simulate distributed bandit online optimization with time-varying constraints"
)]
struct Args {
    /// TOML configuration; may name a base preset via a top-level `preset` key.
    #[arg(long, value_name = "PATH", conflicts_with = "preset")]
    config: Option<PathBuf>,

    /// Built-in preset.
    #[arg(long, value_name = "NAME", value_parser = clap::builder::PossibleValuesParser::new(PRESETS))]
    preset: Option<String>,

    /// Comma-separated seeds, overriding the configured list.
    #[arg(long, value_name = "CSV", value_delimiter = ',')]
    seed_list: Option<Vec<u64>>,

    /// Horizon T; rounds 1..T-1 are simulated.
    #[arg(long, value_name = "N")]
    horizon: Option<usize>,

    /// Output directory.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,

    #[arg(long, value_enum)]
    variant: Option<VariantArg>,

    /// Skip the offline comparator and regret columns.
    #[arg(long)]
    no_regret: bool,

    #[arg(long, value_enum)]
    check_invariants: Option<InvariantArg>,
}

fn resolve(args: Args) -> banditpd::Result<ExperimentConfig> {
    let mut cfg = match (&args.config, &args.preset) {
        (Some(path), _) => ExperimentConfig::from_path(path)?,
        (None, Some(name)) => ExperimentConfig::preset(name)?,
        (None, None) => ExperimentConfig::preset("desk-convex-c05")?,
    };
    if let Some(seeds) = args.seed_list {
        cfg.seeds = seeds;
    }
    if let Some(t) = args.horizon {
        cfg.horizon = t;
    }
    if let Some(out) = args.out {
        cfg.output_dir = out;
    }
    if let Some(v) = args.variant {
        cfg.variant = match v {
            VariantArg::Paper => Variant::Paper,
            VariantArg::ClippedPrimal => Variant::ClippedPrimal,
        };
    }
    if args.no_regret {
        cfg.metrics.regret = false;
    }
    if let Some(m) = args.check_invariants {
        cfg.check_invariants = match m {
            InvariantArg::Strict => InvariantMode::Strict,
            InvariantArg::Off => InvariantMode::Off,
        };
    }
    cfg.validate()?;
    Ok(cfg)
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvariantViolation { .. } => 2,
        Error::ComparatorNotConverged(_) => 3,
        _ => 1,
    }
}

fn print_summary(cfg: &ExperimentConfig, m: &SeriesSummary) -> io::Result<()> {
    let mut w = io::stdout().lock();
    writeln!(w, "{} seeds, T = {}", cfg.seeds.len(), cfg.horizon)?;
    if let Some(r) = m.net_regret {
        writeln!(w, "mean net regret  {r:.6e}")?;
    }
    if let Some(v) = m.net_ccv {
        writeln!(w, "mean net CCV     {v:.6e}")?;
    }
    for (label, fit) in [("regret", &m.regret_slope), ("CCV", &m.ccv_slope)] {
        if let Some(fit) = fit {
            match fit.slope {
                Some(s) => writeln!(w, "{label} log-log slope  {s:.4}")?,
                None => writeln!(
                    w,
                    "{label} log-log slope  n/a ({})",
                    fit.error.as_deref().unwrap_or("")
                )?,
            }
        }
    }
    writeln!(w, "wrote {}", cfg.output_dir.display())
}

fn main() -> ExitCode {
    // Usage errors are configuration errors; clap's own code 2 would read
    // as an invariant violation.
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) if e.use_stderr() => {
            let _ = e.print();
            return ExitCode::from(1);
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
    };
    let result = resolve(args).and_then(|cfg| {
        let out = run_experiment(&cfg)?;
        Ok((cfg, out))
    });
    match result {
        Ok((cfg, out)) => {
            // A closed pipe should not turn a finished run into a panic.
            let _ = print_summary(&cfg, &out.report.mean);
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
