use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use krotov_cli::{run_command, Command, RunOptions};

#[derive(Parser)]
#[command(name = "krotov", version, about = "Krotov optimal control with spectral and state constraints")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(clap::Args)]
struct Common {
    /// Run configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `[output] dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Suppress progress output.
    #[arg(long)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Sub {
    /// Run the optimization described by the config.
    Optimize {
        #[command(flatten)]
        common: Common,
        /// Override the iteration limit.
        #[arg(long)]
        max_iter: Option<usize>,
    },
    /// Propagate a guess or saved pulse and write population traces.
    Propagate {
        #[command(flatten)]
        common: Common,
    },
    /// Scan the two-parameter control landscape.
    Landscape {
        #[command(flatten)]
        common: Common,
    },
    /// Write the spectrum of a guess or saved pulse.
    Spectrum {
        #[command(flatten)]
        common: Common,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, common, max_iter) = match cli.command {
        Sub::Optimize { common, max_iter } => (Command::Optimize, common, max_iter),
        Sub::Propagate { common } => (Command::Propagate, common, None),
        Sub::Landscape { common } => (Command::Landscape, common, None),
        Sub::Spectrum { common } => (Command::Spectrum, common, None),
    };
    let options = RunOptions {
        out: common.out,
        max_iter,
        quiet: common.quiet,
    };
    match run_command(command, &common.config, &options) {
        Ok(summary) => {
            if !options.quiet {
                for (k, v) in &summary.facts {
                    eprintln!("{k}: {v}");
                }
                eprintln!("wrote {} files to {}", summary.files.len(), summary.out_dir.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
