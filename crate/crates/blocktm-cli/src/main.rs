//! `blocktm`: identity verification, band/exponent/sum-rule scans and
//! spectral data export for block-tridiagonal chains.

mod commands;
mod config;
mod output;

use clap::{Parser, Subcommand};

const EXIT_IDENTITY_FAILURE: i32 = 1;
const EXIT_CONFIG_ERROR: i32 = 2;

#[derive(Parser)]
#[command(
    name = "blocktm",
    version,
    about = "Transfer matrices of block-tridiagonal chains and their spectral identities",
    after_help = "Set BLOCKTM_THREADS to cap worker threads."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full identity suite and report the worst residual per identity.
    Verify(commands::VerifyArgs),
    /// Eigenvalue tracks of the phase-twisted Hamiltonian over one period.
    Bands(commands::BandsArgs),
    /// Finite-size characteristic exponents over an energy grid and ensemble.
    Lyapunov(commands::LyapunovArgs),
    /// Both Thouless-type sum rules over a real energy grid.
    Thouless(commands::ThoulessArgs),
    /// Spectra of the transfer matrix and the twisted Hamiltonian.
    Spectrum(commands::SpectrumArgs),
}

fn main() {
    configure_threads();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Verify(args) => commands::run_verify(&args),
        Command::Bands(args) => commands::run_bands(&args),
        Command::Lyapunov(args) => commands::run_lyapunov(&args),
        Command::Thouless(args) => commands::run_thouless(&args),
        Command::Spectrum(args) => commands::run_spectrum(&args),
    };
    match outcome {
        Ok(code) => std::process::exit(code),
        Err(message) => {
            eprintln!("error: {message}");
            std::process::exit(EXIT_CONFIG_ERROR);
        }
    }
}

fn configure_threads() {
    if let Ok(raw) = std::env::var("BLOCKTM_THREADS") {
        match raw.trim().parse::<usize>() {
            Ok(threads) if threads > 0 => {
                // ignore the error if a pool already exists
                let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
            }
            _ => eprintln!("warning: ignoring invalid BLOCKTM_THREADS={raw}"),
        }
    }
}
