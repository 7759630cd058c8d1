//! `releg`: batch front-end for relegation normal forms and stability
//! certificates. Exit code 0 means the run completed inside the certified
//! regime, 2 means it completed but the sufficient conditions failed, and 1
//! is a hard error.

mod config;
mod pipeline;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use pipeline::{exit_code, VerifyOptions};

#[derive(Parser)]
#[command(name = "releg", version, about = "Relegation normal forms with certified estimates")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GlobalArgs {
    /// Run configuration (TOML, or JSON by extension).
    #[arg(long, global = true, default_value = "releg.toml")]
    config: PathBuf,
    /// Output directory for artifacts.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads; defaults to all cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Seed for sampled test points.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Measure norms from a completed relegation run instead of relying on
    /// the a-priori bounds alone.
    #[arg(long = "a-posteriori", global = true)]
    a_posteriori: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run the normal-form recursion and write the series files.
    Relegate,
    /// Evaluate the estimate pipeline and write a certificate.
    Estimate,
    /// Check a completed run: residual decay and orbit drift bounds.
    Verify {
        /// Manifest written by `relegate`.
        #[arg(long)]
        manifest: PathBuf,
        /// Also integrate at dt/2 and report the energy-error ratio.
        #[arg(long)]
        dt_halving: bool,
    },
    /// Split the perturbation into Fourier shells and check their decay.
    Split,
    /// Print the weighted norms of the configured Hamiltonian.
    Norm,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.global.threads {
        // A second build attempt in the same process is harmless.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    match run(&cli) {
        Ok(outcome) => ExitCode::from(exit_code(outcome)),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: &Cli) -> anyhow::Result<pipeline::Outcome> {
    let cfg = pipeline::load_config(&cli.global.config)?;
    match &cli.command {
        Command::Relegate => pipeline::cmd_relegate(&cfg, &cli.global.out),
        Command::Estimate => {
            pipeline::cmd_estimate(&cfg, &cli.global.out, cli.global.a_posteriori)
        }
        Command::Verify {
            manifest,
            dt_halving,
        } => pipeline::cmd_verify(
            &cfg,
            &cli.global.out,
            &VerifyOptions {
                manifest: manifest.clone(),
                seed: cli.global.seed,
                dt_halving: *dt_halving,
            },
        ),
        Command::Split => pipeline::cmd_split(&cfg, &cli.global.out),
        Command::Norm => pipeline::cmd_norm(&cfg),
    }
}
