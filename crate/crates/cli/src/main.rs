use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lcnn::Exec;
use lcnn_cli::commands::{bounds, regret, sample, synth, verify};
use lcnn_cli::{ExperimentConfig, Overrides, Result};

/// Sampling, verification and bound calculations for l1-constrained single-hidden-layer
/// networks.
///
/// Settings are resolved as: command-line flags, then the JSON config file, then built-in
/// defaults. The output directory falls back to $LCNN_OUTPUT_DIR and then ./lcnn-out.
/// Exit codes: 0 success, 1 I/O failure, 2 invalid configuration, 3 sampler failure,
/// 4 failed oracle check.
#[derive(Parser)]
#[command(name = "lcnn", version)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON experiment config; unknown keys are rejected.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed for data, chains and Monte Carlo checks.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, short = 'o', global = true)]
    output_dir: Option<PathBuf>,
    /// Fixed inverse temperature, replacing the configured schedule.
    #[arg(long, global = true)]
    beta: Option<f64>,
    /// Number of hidden units.
    #[arg(long, global = true)]
    k: Option<usize>,
    /// Input dimension including the constant column.
    #[arg(long, global = true)]
    d: Option<usize>,
    /// Sample size of synthetic data.
    #[arg(long, global = true)]
    n: Option<usize>,
    /// Grid resolution; selects the discrete prior.
    #[arg(long, global = true)]
    m: Option<usize>,
    /// Dataset CSV, replacing the configured data source.
    #[arg(long, global = true)]
    data: Option<PathBuf>,
    /// Execution policy for data-parallel loops.
    #[arg(long, global = true, value_enum)]
    exec: Option<ExecArg>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ExecArg {
    Sequential,
    Parallel,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset and its teacher sidecar.
    Synth {
        /// Dataset path; defaults to data.csv in the output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Draw from the posterior and write chains with a log-concavity certificate.
    Sample,
    /// Run property suites; all of them when none are named.
    Verify {
        #[arg(value_enum)]
        suites: Vec<verify::Suite>,
    },
    /// Tabulate every bound kind for the inputs in a JSON file.
    Bounds {
        #[arg(long)]
        inputs: PathBuf,
    },
    /// Exact regret ledger under the grid prior, with realized regret against its bound.
    Regret,
}

fn load(common: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    cfg.apply(&Overrides {
        seed: common.seed,
        beta: common.beta,
        n: common.n,
        k: common.k,
        d: common.d,
        m: common.m,
        data: common.data.clone(),
        exec: common.exec.map(|e| match e {
            ExecArg::Sequential => Exec::Sequential,
            ExecArg::Parallel => Exec::Parallel,
        }),
        output_dir: common.output_dir.clone(),
    })?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    let cfg = load(&cli.common)?;
    match cli.command {
        Command::Synth { out } => {
            let s = synth::run(&cfg, out.as_deref())?;
            println!("wrote {} rows (d = {}) to {}", s.n, s.d, s.data.display());
            println!("teacher: {}", s.teacher.display());
        }
        Command::Sample => {
            let c = sample::run(&cfg)?;
            println!(
                "{}: {} draws, posterior mean at probe {}, conditions hold: {}",
                c.method,
                c.draws,
                c.posterior_mean_at_probe,
                c.conditions.all_hold()
            );
            if let Some(q) = &c.quadrature {
                println!(
                    "reference {} relative error {:.4} (tolerance {})",
                    q.reference, q.relative_error, q.tolerance
                );
            }
            println!("outputs in {}", cfg.resolve_output_dir().display());
        }
        Command::Verify { suites } => {
            let results = verify::run(&cfg, &suites)?;
            for r in &results {
                println!(
                    "{} {:<14} metric {:.6e} threshold {:.6e} ({:.2} s) {}",
                    if r.pass { "PASS" } else { "FAIL" },
                    r.suite.to_possible_value().expect("named").get_name(),
                    r.metric,
                    r.threshold,
                    r.seconds,
                    r.detail
                );
            }
            verify::verdict(&results)?;
        }
        Command::Bounds { inputs } => {
            let (_, text) = bounds::run(&cfg, &inputs)?;
            print!("{text}");
        }
        Command::Regret => {
            let s = regret::run(&cfg)?;
            for r in &s.rows {
                println!(
                    "N {:>6} beta {:.4e} avg square regret {:.6e} bound {:.6e} {}",
                    r.n,
                    r.beta,
                    r.avg_square,
                    r.bound,
                    if r.holds { "ok" } else { "EXCEEDED" }
                );
            }
            println!("outputs in {}", cfg.resolve_output_dir().display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
