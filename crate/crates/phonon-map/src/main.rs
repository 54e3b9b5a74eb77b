use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use phonon_map::run::{run_file, Overrides};
use phonon_map::presets;

#[derive(Parser)]
#[command(name = "phonon-map", version, about = "Phonon-selective spin mapping: pulse design and analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (default: current directory).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        threads: Option<usize>,
        /// Overrides `control.seed`.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Print a bundled config, or list them without a name.
    Preset { name: Option<String> },
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run { config, out, threads, seed } => match run_file(&config, &Overrides { out_dir: out, threads, seed }) {
            Ok(s) => {
                println!("{}", s.manifest_path.display());
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(e.exit_code() as u8)
            }
        },
        Command::Preset { name: None } => {
            for (n, _) in presets::PRESETS {
                println!("{n}");
            }
            ExitCode::SUCCESS
        }
        Command::Preset { name: Some(n) } => match presets::text(&n) {
            Some(t) => {
                print!("{t}");
                ExitCode::SUCCESS
            }
            None => {
                eprintln!("error: unknown preset `{n}`");
                ExitCode::from(1)
            }
        },
    }
}
