use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use lpl_cli::{execute, CliError, RunConfig};

#[derive(Parser)]
#[command(name = "lpl", version, about = "Perpetuities driven by Lévy processes and branching Lévy processes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON config.
    Run {
        config: PathBuf,
        /// Overrides `output_dir` in the config (default: current directory).
        #[arg(long)]
        output_dir: Option<PathBuf>,
        /// Overrides `seed` in the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads; results do not depend on it.
        #[arg(long, env = "LPL_THREADS")]
        threads: Option<usize>,
    },
}

fn main() -> ExitCode {
    let Command::Run { config, output_dir, seed, threads } = Cli::parse().command;
    let result = (|| {
        if let Some(n) = threads {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| CliError::config("--threads", e.to_string()))?;
        }
        let text = std::fs::read_to_string(&config)
            .map_err(|e| CliError::config("$", format!("cannot read {}: {e}", config.display())))?;
        let dir = match output_dir {
            Some(d) => d,
            None => RunConfig::parse(&text)?.output_dir.unwrap_or_else(|| PathBuf::from(".")),
        };
        execute(&text, &dir, seed)?;
        Ok::<_, CliError>(dir)
    })();
    match result {
        Ok(dir) => {
            println!("{}", dir.join("report.json").display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("lpl: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
