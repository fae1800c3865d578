//! `rs-engine`: risk-sharing contract pricing from the command line.
//!
//! Exit codes: 0 success, 1 verification failure, 2 configuration error,
//! 3 solver failure.

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use rs_engine_cli::run::{cmd_margin_check, cmd_price, cmd_sweep, cmd_verify, CommonArgs, SweepParam};
use rs_engine_core::EngineError;

#[derive(Parser)]
#[command(
    name = "rs-engine",
    version,
    about = "Negotiated price and optimal variation margin for bilateral contracts \
             under default risk and asymmetric funding"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve for the negotiated price on a scenario
    Price {
        #[command(flatten)]
        common: CommonArgs,
        /// Starting point for the root bracket (defaults to the
        /// full-collateralization price)
        #[arg(long)]
        bracket_hint: Option<f64>,
    },
    /// Run the built-in verification oracles against the scenario
    Verify {
        #[command(flatten)]
        common: CommonArgs,
        /// Deliberately corrupt the closed-form margin rule to prove the
        /// oracles catch a wrong formula (self-test; forces exit 1)
        #[arg(long)]
        mutate: bool,
    },
    /// Re-solve the price across a parameter grid (common random numbers)
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        /// Parameter to sweep
        #[arg(long, value_enum)]
        param: SweepParam,
        /// Grid as start:end:count
        #[arg(long)]
        grid: String,
    },
    /// Check the full-margin (zero-exposure) optimality conditions
    MarginCheck {
        #[command(flatten)]
        common: CommonArgs,
    },
}

fn exit_code_for(error: &EngineError) -> ExitCode {
    match error {
        EngineError::Config { .. } => ExitCode::from(2),
        _ => ExitCode::from(3),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Price { common, bracket_hint } => {
            common.thread_pool().and_then(|pool| {
                pool.install(|| cmd_price(common, *bracket_hint)).map(|()| ExitCode::SUCCESS)
            })
        }
        Command::Verify { common, mutate } => common.thread_pool().and_then(|pool| {
            pool.install(|| cmd_verify(common, *mutate)).map(|all_pass| {
                if all_pass {
                    ExitCode::SUCCESS
                } else {
                    ExitCode::from(1)
                }
            })
        }),
        Command::Sweep { common, param, grid } => common.thread_pool().and_then(|pool| {
            pool.install(|| cmd_sweep(common, *param, grid)).map(|()| ExitCode::SUCCESS)
        }),
        Command::MarginCheck { common } => common.thread_pool().and_then(|pool| {
            pool.install(|| cmd_margin_check(common)).map(|()| ExitCode::SUCCESS)
        }),
    };
    match result {
        Ok(code) => code,
        Err(error) => {
            eprintln!("error: {error}");
            exit_code_for(&error)
        }
    }
}
