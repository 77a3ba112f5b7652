mod cascade_cmd;
mod config;
mod fields_cmd;
mod grids;
mod kernel_cmd;
mod run;
mod stokes_cmd;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::run::{CliError, Context};

/// Stochastic-cascade Navier-Stokes toolkit.
#[derive(Debug, Parser)]
#[command(name = "nscascade", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON config or a manifest emitted by an earlier run.
    #[arg(long, global = true, env = "NSCASCADE_CONFIG")]
    config: Option<PathBuf>,

    /// Master seed; overrides the config.
    #[arg(long, global = true, env = "NSCASCADE_SEED")]
    seed: Option<u64>,

    /// Worker threads (default: all cores). Never changes numeric output.
    #[arg(long, global = true, env = "NSCASCADE_THREADS")]
    threads: Option<usize>,

    /// Output directory.
    #[arg(long, global = true, env = "NSCASCADE_OUT", default_value = "out")]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Certify (h∗h) ≤ B|ξ|^θ h on sample frequencies.
    KernelVerify,
    /// Evaluate a kernel at points.
    KernelEval,
    /// Validate the branching-pair sampler against its density.
    SamplerCheck,
    /// Linear warm-up cascade against its closed form.
    LinearRun,
    /// Cascade estimates of û(ξ,t).
    NsRun,
    /// Generation-truncated cascade (Picard iterates).
    NsTruncated,
    /// Steady-state cascade.
    NsSteady,
    /// Self-similarity z-scores.
    NsSelfsim,
    /// Leray projection of a spectral grid.
    FieldsProject,
    /// Sampled F-norm and its scale relation.
    FieldsNorm,
    /// Pressure from a velocity grid.
    FieldsPressure,
    /// Oseen tensor values and spectral Stokes evolution.
    StokesEval,
    /// Fourier, semigroup and divergence checks of the Oseen tensor.
    StokesCheck,
    /// Analyticity inequality on random samples.
    ChecksInequality,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::KernelVerify => "kernel-verify",
            Command::KernelEval => "kernel-eval",
            Command::SamplerCheck => "sampler-check",
            Command::LinearRun => "linear-run",
            Command::NsRun => "ns-run",
            Command::NsTruncated => "ns-truncated",
            Command::NsSteady => "ns-steady",
            Command::NsSelfsim => "ns-selfsim",
            Command::FieldsProject => "fields-project",
            Command::FieldsNorm => "fields-norm",
            Command::FieldsPressure => "fields-pressure",
            Command::StokesEval => "stokes-eval",
            Command::StokesCheck => "stokes-check",
            Command::ChecksInequality => "checks-inequality",
        }
    }
}

fn dispatch(cli: &Cli) -> Result<bool, CliError> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("--threads: {e}")))?;
    }
    let ctx = Context::new(cli.command.name(), cli.config.clone(), cli.seed, cli.out.clone());
    match cli.command {
        Command::KernelVerify => kernel_cmd::verify(ctx),
        Command::KernelEval => kernel_cmd::eval(ctx),
        Command::SamplerCheck => kernel_cmd::sampler_check(ctx),
        Command::LinearRun => cascade_cmd::linear(ctx),
        Command::NsRun => cascade_cmd::run(ctx),
        Command::NsTruncated => cascade_cmd::truncated(ctx),
        Command::NsSteady => cascade_cmd::steady(ctx),
        Command::NsSelfsim => cascade_cmd::selfsim(ctx),
        Command::FieldsProject => fields_cmd::project(ctx),
        Command::FieldsNorm => fields_cmd::norm(ctx),
        Command::FieldsPressure => fields_cmd::pressure(ctx),
        Command::StokesEval => stokes_cmd::eval(ctx),
        Command::StokesCheck => stokes_cmd::check(ctx),
        Command::ChecksInequality => fields_cmd::inequality(ctx),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("{}: validation failed", cli.command.name());
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
