//! Command-line front end: TOML run configurations, bundled presets and the
//! `solve`, `verify` and `study` commands.
//!
//! Exit status: 0 success, 2 configuration or hash error, 3 solver failure,
//! 4 estimate failure. `TDKS_WORKERS` sets the worker thread count.

pub mod commands;
pub mod config;
pub mod presets;
pub mod study;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub use commands::{
    solve, verify, write_solve, write_verify, Failure, SolveRun, EXIT_CONFIG, EXIT_ESTIMATE, EXIT_OK, EXIT_SOLVER,
};
pub use config::{build, Built, RunConfig};
pub use study::{run_study, StudyKind};

use crate::fixedpoint::Mode;

#[derive(Debug, Parser)]
#[command(name = "tdks", version, about = "Spectral-Galerkin TDKS solver and estimate checker")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Certified,
    Practical,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum StudyArg {
    Modes,
    Timestep,
    Epsilon,
    Lipschitz,
    Schedule,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Config file, or `preset:NAME` for a bundled preset.
    #[arg(long)]
    pub config: String,
    /// Output directory (default: `run.out` from the config, else `out`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Mollifier radius; adds a `[regularization]` section if missing.
    #[arg(long)]
    pub eps: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the configured problem and check the energy estimates.
    Solve(Common),
    /// Re-check the estimates on a stored trajectory.
    Verify {
        /// `trajectory.bin` written by `solve`; its `.json` sidecar must sit next to it.
        #[arg(long)]
        trajectory: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Parameter ladders and probes, written as CSV.
    Study {
        #[arg(value_enum)]
        kind: StudyArg,
        #[command(flatten)]
        common: Common,
    },
    /// List bundled presets, or print one.
    Presets { name: Option<String> },
}

fn load(common: &Common) -> Result<RunConfig, Failure> {
    let mut cfg = RunConfig::load(&common.config).map_err(Failure::config)?;
    if let Some(m) = common.mode {
        cfg.fixedpoint.mode = match m {
            ModeArg::Certified => Mode::Certified,
            ModeArg::Practical => Mode::Practical,
        };
    }
    if let Some(s) = common.seed {
        cfg.run.seed = s;
    }
    if let Some(e) = common.eps {
        match &mut cfg.regularization {
            Some(r) => r.epsilon = e,
            None => {
                cfg.regularization = Some(config::RegularizationConfig {
                    epsilon: e,
                    probe_trials: 20,
                })
            }
        }
    }
    cfg.validate().map_err(Failure::config)?;
    Ok(cfg)
}

fn out_dir(common: &Common, cfg: &RunConfig) -> PathBuf {
    common
        .out
        .clone()
        .or_else(|| cfg.run.out.clone())
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn set_workers() {
    if let Some(n) = std::env::var("TDKS_WORKERS").ok().and_then(|v| v.parse::<usize>().ok()) {
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
}

fn execute(cli: Cli) -> Result<i32, Failure> {
    set_workers();
    match cli.command {
        Command::Presets { name: None } => {
            for n in presets::NAMES {
                println!("{n}");
            }
            Ok(EXIT_OK)
        }
        Command::Presets { name: Some(n) } => match presets::get(&n) {
            Some(text) => {
                print!("{text}");
                Ok(EXIT_OK)
            }
            None => Err(Failure::config(crate::Error::InvalidConfig(format!("unknown preset '{n}'")))),
        },
        Command::Solve(common) => {
            let cfg = load(&common)?;
            let out = out_dir(&common, &cfg);
            let run = solve(&cfg)?;
            write_solve(&cfg, &run, &out).map_err(Failure::solver)?;
            let report = run.report();
            println!(
                "solved [0, {}] in {} subintervals, norm drift {:.3e}, estimates {}",
                report.horizon,
                report.subintervals.len(),
                report.norm_drift,
                if run.passed() { "pass" } else { "FAIL" }
            );
            for (k, e) in report.estimates.iter().enumerate() {
                for f in e.failures() {
                    eprintln!("subinterval {}: {} observed {:e} > bound {:e}", k + 1, f.id, f.observed, f.bound);
                }
            }
            Ok(if run.passed() { EXIT_OK } else { EXIT_ESTIMATE })
        }
        Command::Verify { trajectory, common } => {
            let cfg = load(&common)?;
            let out = out_dir(&common, &cfg);
            let report = verify(&cfg, &trajectory)?;
            write_verify(&cfg, &report, &trajectory, &out).map_err(Failure::solver)?;
            for s in &report.summary {
                println!(
                    "{:<10} {} observed {:e} bound {:e}",
                    s.id,
                    if s.pass { "pass" } else { "FAIL" },
                    s.observed,
                    s.bound
                );
            }
            Ok(if report.passed() { EXIT_OK } else { EXIT_ESTIMATE })
        }
        Command::Study { kind, common } => {
            let cfg = load(&common)?;
            let out = out_dir(&common, &cfg);
            let kind = match kind {
                StudyArg::Modes => StudyKind::Modes,
                StudyArg::Timestep => StudyKind::Timestep,
                StudyArg::Epsilon => StudyKind::Epsilon,
                StudyArg::Lipschitz => StudyKind::Lipschitz,
                StudyArg::Schedule => StudyKind::Schedule,
            };
            run_study(kind, &cfg, &out)?;
            println!("wrote {}", out.join(format!("study_{}.csv", kind.name())).display());
            Ok(EXIT_OK)
        }
    }
}

/// Parse `args` and run; returns the process exit status.
pub fn run_from_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match execute(cli) {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {f}");
            f.code
        }
    }
}
