//! Thin command-line front end: `gmix run <config> [--out DIR] [--threads N]`.
//!
//! Exit codes: 0 success, 2 config error, 3 capacity error, 4 an internal
//! acceptance flag failed in a self-checking run. `GMIX_SEED` overrides the
//! seed in the config file.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gmix::experiment::{load_config, run};
use gmix::GmixError;

#[derive(Parser)]
#[command(name = "gmix", version, about = "chain mixing-rate experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        /// Path to the TOML experiment config.
        config: PathBuf,
        /// Output directory (overrides the config).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads (0 = automatic).
        #[arg(long)]
        threads: Option<usize>,
    },
}

fn error_json(err: &GmixError) -> String {
    serde_json::json!({
        "error": err.to_string(),
        "exit_code": err.exit_code(),
    })
    .to_string()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, out, threads } => {
            let mut cfg = match load_config(&config) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("{}", error_json(&e));
                    return ExitCode::from(e.exit_code() as u8);
                }
            };
            if let Ok(seed_text) = std::env::var("GMIX_SEED") {
                match seed_text.parse::<u64>() {
                    Ok(s) => cfg.seed = s,
                    Err(_) => {
                        let e = GmixError::Config(format!("GMIX_SEED is not a u64: {seed_text}"));
                        eprintln!("{}", error_json(&e));
                        return ExitCode::from(2);
                    }
                }
            }
            match run(&cfg, out, threads) {
                Ok(outcome) => {
                    println!(
                        "{}",
                        serde_json::json!({
                            "out_dir": outcome.out_dir,
                            "flags_ok": outcome.flags_ok,
                        })
                    );
                    if outcome.flags_ok {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::from(4)
                    }
                }
                Err(e) => {
                    eprintln!("{}", error_json(&e));
                    ExitCode::from(e.exit_code() as u8)
                }
            }
        }
    }
}
