use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use obs_transport_cli::{execute, load_config, presets_text, EXIT_INVALID, EXIT_PASS};

#[derive(Parser)]
#[command(name = "otlab", version, about = "Experiments for the observable transport equations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config.
    Run {
        config: PathBuf,
        /// Output directory, overriding `output_dir` in the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a config without running it.
    Validate { config: PathBuf },
    /// List experiment kinds, kernels and initial-condition presets.
    Presets,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let code = match Cli::parse().command {
        Command::Run { config, out } => {
            let outcome = execute(&config, out.as_deref());
            if outcome.exit_code == EXIT_PASS {
                println!("{}", outcome.message);
            } else {
                eprintln!("{}", outcome.message);
            }
            if let Some(dir) = outcome.output_dir {
                println!("summary: {}", dir.join("summary.json").display());
            }
            outcome.exit_code
        }
        Command::Validate { config } => match load_config(&config) {
            Ok((cfg, _)) => {
                println!("{}: ok ({})", config.display(), cfg.kind);
                EXIT_PASS
            }
            Err(e) => {
                eprintln!("{e}");
                EXIT_INVALID
            }
        },
        Command::Presets => {
            print!("{}", presets_text());
            EXIT_PASS
        }
    };
    ExitCode::from(code as u8)
}
