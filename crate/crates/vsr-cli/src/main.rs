//! `vsr` — operator surface for the self-configuring super-resolution
//! toolkit.
//!
//! Every subcommand takes a JSON run-configuration document (unknown keys
//! rejected); selected flags override file values. Diagnostics go to
//! stderr, stdout carries output paths only. Exit codes: 2 configuration
//! error, 3 I/O error, 4 training divergence, 5 gradient check failure.

mod commands;
mod config;

use std::process::ExitCode;

use clap::{Parser, Subcommand};


#[derive(Parser)]
#[command(name = "vsr", version, about = "Self-configuring video super-resolution toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a training dataset of capture-simulated pairs
    Datagen(commands::datagen::Args),
    /// Train the network on a dataset directory
    Train(commands::train::Args),
    /// Upscale a frame sequence with the dual-rate pipeline
    Infer(commands::infer::Args),
    /// Parameter/ops accounting for a topology
    CountOps(commands::count_ops::Args),
    /// Verify adjoint gradients against finite differences
    GradCheck(commands::grad_check::Args),
    /// Render a stretched PSF kernel as PFM + PNG heatmap
    PsfPreview(commands::psf_preview::Args),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Datagen(args) => commands::datagen::run(args),
        Command::Train(args) => commands::train::run(args),
        Command::Infer(args) => commands::infer::run(args),
        Command::CountOps(args) => commands::count_ops::run(args),
        Command::GradCheck(args) => commands::grad_check::run(args),
        Command::PsfPreview(args) => commands::psf_preview::run(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}
