use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use wavekernel::config::ExperimentConfig;
use wavekernel::report::{aggregate, exit_code, write_suite};
use wavekernel::suites::{run_suite, Suite};
use wavekernel::Error;

#[derive(Parser)]
#[command(name = "wavekernel", version, about = "Low-frequency wave kernel and dispersive bound verification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Dump kernel grids and cross-check the oscillatory quadrature
    KernelEval(Common),
    /// Free kernel decay, time-integral and low-frequency kernel bounds
    FreeDecay(Common),
    /// Resolvent bounds, the decay condition on V and the T operator
    Resolvent(Common),
    /// Perturbed evolution: λ-sweeps, fixed-point residual and h-sweeps
    Born(Common),
    /// Exact scaling laws of the kernels
    Scaling(Common),
    /// Aggregate the suite reports under --out into one summary
    Report(Common),
}

#[derive(Args)]
struct Common {
    /// TOML experiment config; an empty file selects the defaults
    #[arg(long)]
    config: PathBuf,
    /// output directory (overrides `out` in the config)
    #[arg(long)]
    out: Option<PathBuf>,
    /// cap on worker threads
    #[arg(long)]
    threads: Option<usize>,
    /// dimension (overrides `n`)
    #[arg(long)]
    n: Option<u32>,
    /// h-sweep, comma separated (overrides `h`)
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    h: Option<Vec<f64>>,
}

fn resolve(c: &Common) -> Result<ExperimentConfig, Error> {
    let mut cfg = ExperimentConfig::load(&c.config)?;
    if let Some(n) = c.n {
        cfg.n = n;
    }
    if let Some(h) = &c.h {
        cfg.h = h.clone();
    }
    if let Some(out) = &c.out {
        cfg.out = out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (suite, common) = match &cli.command {
        Command::KernelEval(c) => (Some(Suite::KernelEval), c),
        Command::FreeDecay(c) => (Some(Suite::FreeDecay), c),
        Command::Resolvent(c) => (Some(Suite::Resolvent), c),
        Command::Born(c) => (Some(Suite::Born), c),
        Command::Scaling(c) => (Some(Suite::Scaling), c),
        Command::Report(c) => (None, c),
    };
    let cfg = match resolve(common) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if let Some(t) = common.threads {
        if t == 0 {
            eprintln!("error: config error: field `--threads`: must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(3);
        }
    }
    let result = match suite {
        Some(s) => {
            let rep = run_suite(s, &cfg);
            write_suite(&cfg.out.join(s.name()), &cfg, &rep)
        }
        None => aggregate(&cfg.out, &cfg),
    };
    match result {
        Ok(run) => {
            for su in &run.suites {
                for c in &su.checks {
                    println!("{:<6} {}/{}: {}", format!("{:?}", c.status).to_uppercase(), su.suite, c.name, c.summary);
                }
            }
            ExitCode::from(exit_code(run.status) as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { 2 } else { 3 })
        }
    }
}
