use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};
use tpwake::config::Config;
use tpwake::run::{self, Output};

#[derive(Parser)]
#[command(name = "tpwake", version, about = "Time-periodic wake decay experiments")]
struct Cli {
    /// JSON configuration file; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for all sampled point sets.
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    /// Output directory (overrides `output_dir` in the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Kernel tables and bound checks.
    Kernel {
        #[command(subcommand)]
        action: KernelAction,
    },
    /// Convolution-lemma verifiers.
    Conv {
        #[command(subcommand)]
        action: ConvAction,
    },
    /// Spectral solves on the periodic box.
    Solve {
        #[command(subcommand)]
        kind: SolveKind,
    },
    /// Far-field sampling and decay fits.
    Decay {
        #[command(subcommand)]
        action: DecayAction,
    },
    /// Residual of the far-field fixed-point equation.
    Fixedpoint {
        #[command(subcommand)]
        action: FixedpointAction,
    },
    /// Exponential shift inequality battery; exits nonzero on violations.
    Selfcheck,
}

#[derive(Subcommand)]
enum KernelAction {
    Eval,
    Verify,
}

#[derive(Subcommand)]
enum ConvAction {
    Verify,
}

#[derive(Subcommand)]
enum SolveKind {
    Linear,
    Nonlinear,
}

#[derive(Subcommand)]
enum DecayAction {
    Fit {
        /// Field dump to analyse instead of solving.
        #[arg(long)]
        field: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum FixedpointAction {
    Residual {
        #[arg(long)]
        field: Option<PathBuf>,
    },
}

fn status(passed: bool) -> &'static str {
    if passed {
        "pass"
    } else {
        "FAIL"
    }
}

fn execute(cli: Cli) -> Result<bool> {
    let cfg = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    let dir = cli.out.clone().or_else(|| cfg.output_dir.clone().map(PathBuf::from)).unwrap_or_else(|| PathBuf::from("out"));
    let out = Output::new(&dir)?;
    let seed = cli.seed;
    match cli.command {
        Command::Kernel { action: KernelAction::Eval } => {
            let p = run::kernel_eval(&cfg, &out)?;
            println!("wrote {}", p.display());
        }
        Command::Kernel { action: KernelAction::Verify } => {
            let r = run::kernel_verify(&cfg, seed, &out)?;
            println!("kernel verify: {}", status(r.passed));
        }
        Command::Conv { action: ConvAction::Verify } => {
            let r = run::conv_verify(&cfg, &out)?;
            for v in &r.verifiers {
                println!("{}: change {:.4} {}", v.name, v.change, status(v.passed));
            }
            println!("newton: {:.6} {}", r.newton.value, status(r.newton.passed));
        }
        Command::Solve { kind } => {
            let (_, r) = run::solve(&cfg, matches!(kind, SolveKind::Nonlinear), &out)?;
            println!("{} solve: max divergence {:.3e}, dump {}", r.kind, r.max_divergence, r.dump);
        }
        Command::Decay { action: DecayAction::Fit { field } } => {
            let r = run::decay_fit(&cfg, field.as_deref(), &out)?;
            for f in r.fits.iter().chain(&r.surrogate) {
                match f {
                    Ok(f) => println!("{}: p = {:.3}, alpha = {:.3}", f.quantity, f.p, f.alpha),
                    Err(e) => println!("fit failed: {e}"),
                }
            }
        }
        Command::Fixedpoint { action: FixedpointAction::Residual { field } } => {
            let r = run::fixedpoint(&cfg, field.as_deref(), seed, &out)?;
            println!("fixed-point residual: worst ratio {:.4} {}", r.worst_ratio, status(r.passed));
        }
        Command::Selfcheck => {
            let r = run::selfcheck(&cfg, seed, &out)?;
            for b in &r.battery {
                println!("a = {}, S = {}: {} violations", b.a, b.s, b.violations);
            }
            return Ok(r.passed);
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    if let Ok(n) = std::env::var("TPWAKE_THREADS") {
        if let Ok(n) = n.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
