use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use fw_core::schedules::cumulative_product_check;
use fw_core::{GrowthMode, Measure, Schedule};
use fw_harness::{run_certify, run_experiment, write_certificate, ExperimentConfig, HarnessError, Overrides};

#[derive(Parser)]
#[command(name = "fw", version, about = "Frank-Wolfe step-size experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every schedule on a configured instance and write traces.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated schedule specs, e.g. fixed:2,fixed:4,logadaptive.
        #[arg(long, value_delimiter = ',')]
        schedule: Option<Vec<String>>,
        #[arg(long = "T")]
        horizon: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// f64 or double-double.
        #[arg(long)]
        precision: Option<String>,
    },
    /// Estimate a growth constant for a configured instance.
    Certify {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        mode: GrowthMode,
        #[arg(long)]
        r: f64,
        #[arg(long, default_value_t = 400)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the certificate as CSV here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the cumulative-product bound for one schedule.
    Lemma {
        #[arg(long)]
        schedule: Schedule,
        #[arg(long = "S")]
        s: u64,
        #[arg(long)]
        eps: f64,
        #[arg(long)]
        t: u64,
    },
}

/// Set when `lemma` finds a violation.
struct Violated;

fn run(cli: Cli) -> Result<Option<Violated>> {
    match cli.command {
        Command::Run { config, schedule, horizon, out, seed, precision } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            cfg.apply(Overrides { schedules: schedule, horizon, out, seed, precision });
            let output = run_experiment(&cfg)?;
            println!("f* = {:.12e} ({:?}), beta = {:.6e}", output.manifest.f_star, output.manifest.f_star_source, output.manifest.beta);
            for row in output.summary.iter().filter(|r| r.measure == Measure::Subopt) {
                let fmt = |v: Option<f64>| v.map(|x| format!("{x:.4e}")).unwrap_or_else(|| "-".into());
                println!("{:<14} final subopt {:>12}  slope {:>10}", row.schedule, fmt(row.final_value), fmt(row.slope));
            }
            println!("wrote {}", cfg.run.out.join("manifest.json").display());
        }
        Command::Certify { config, mode, r, samples, seed, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            let result = run_certify(&cfg, mode, r, samples, seed)?;
            let c = &result.certificate;
            println!("mode {} r {} M_hat {:.6e} ({} samples, {} skipped)", c.mode, c.r, c.m_hat, c.samples, c.skipped);
            println!(
                "revalidation at {}x: {} of {} pairs above ({:.3}%)",
                result.revalidation.margin,
                result.revalidation.violations,
                result.revalidation.pairs,
                100.0 * result.revalidation.rate()
            );
            if let Some(path) = out {
                write_certificate(&path, &result).with_context(|| format!("writing {}", path.display()))?;
            }
        }
        Command::Lemma { schedule, s, eps, t } => {
            let check = cumulative_product_check(&schedule, s, eps, t)?;
            println!("lhs {:.15e}  rhs {:.15e}  {}", check.lhs, check.rhs, if check.satisfied { "ok" } else { "VIOLATED" });
            if !check.satisfied {
                return Ok(Some(Violated));
            }
        }
    }
    Ok(None)
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if let Some(h) = err.downcast_ref::<HarnessError>() {
        return h.exit_code() as u8;
    }
    if let Some(core) = err.downcast_ref::<fw_core::FwError>() {
        return HarnessError::Core(core.clone()).exit_code() as u8;
    }
    1
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(None) => ExitCode::SUCCESS,
        Ok(Some(Violated)) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
