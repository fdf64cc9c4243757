use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fracdnl_cli::commands::{self, RunOptions};
use fracdnl_cli::config::StudyChoice;

/// Solver for doubly nonlinear time-fractional parabolic inclusions.
#[derive(Parser)]
#[command(name = "fracdnl", version)]
struct Cli {
    /// Worker threads for parameter studies.
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `[output] dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write long-format `plot_data.csv`.
    #[arg(long)]
    emit_plot_data: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one problem.
    Solve(Common),
    /// Run a parameter study.
    Study {
        #[command(flatten)]
        common: Common,
        /// Overrides `[study] kind`.
        #[arg(long, value_enum)]
        kind: Option<StudyChoice>,
    },
    /// Check a configuration against the standing assumptions.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// List the named problems.
    Presets,
}

fn options(c: Common, kind: Option<StudyChoice>) -> RunOptions {
    RunOptions { config: c.config, out: c.out, emit_plot_data: c.emit_plot_data, kind }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("FRACDNL_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    if let Some(k) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(k).build_global() {
            eprintln!("error: --jobs: {e}");
            return ExitCode::from(3);
        }
    }
    let result = match cli.command {
        Command::Solve(c) => commands::solve(&options(c, None)).map(drop),
        Command::Study { common, kind } => commands::study(&options(common, kind)).map(drop),
        Command::Validate { config } => {
            commands::validate(&RunOptions { config, ..RunOptions::default() }).map(drop)
        }
        Command::Presets => {
            print!("{}", commands::presets());
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
