use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use tlme_embed::{run, Command, Flags};

/// Embeds time-local master equations into Lindblad form and runs the
/// associated simulations.
#[derive(Parser, Debug)]
#[command(name = "tlme-embed", version)]
struct Cli {
    #[arg(value_enum)]
    command: Command,

    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,

    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,

    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,

    /// Runs the micromaser sweep at the full pump rate (slow).
    #[arg(long)]
    paper_scale: bool,

    /// Fills the wall_time_s column; output is then no longer reproducible.
    #[arg(long)]
    timing: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let flags = Flags {
        seed: cli.seed,
        paper_scale: cli.paper_scale,
        timing: cli.timing,
    };
    let mut warn = |msg: &str| eprintln!("warning: {msg}");
    match run(cli.command, &cli.config, &cli.out, flags, &mut warn) {
        Ok(report) => {
            for line in &report.summary {
                println!("{line}");
            }
            for file in &report.files {
                println!("wrote {}", file.display());
            }
            if report.passed {
                ExitCode::SUCCESS
            } else {
                eprintln!("check failed");
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
