use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use handface_cli::commands::{evaluate_command, expand_session_paths, simulate, train_command};
use handface_cli::config::SourceConfig;
use handface_cli::serve::serve_blocking;
use handface_cli::{CliError, RunConfig};

#[derive(Parser)]
#[command(name = "handface", version, about = "Hand-over-face gesture recognition from shoulder bio-impedance")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration; missing keys take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed (overrides the config file).
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a simulated corpus of session files plus a manifest.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        subjects: Option<u32>,
        #[arg(long)]
        sessions: Option<u32>,
    },
    /// Train one classifier on the given sessions (files or directories).
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(required = true)]
        sessions: Vec<PathBuf>,
    },
    /// Leave-one-session-out evaluation per subject.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        epochs: Option<usize>,
        /// Use a predictor that returns the true labels.
        #[arg(long)]
        oracle: bool,
        #[arg(required = true)]
        sessions: Vec<PathBuf>,
    },
    /// Stream a session over WebSocket and record labeled sessions.
    Serve {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        port: Option<u16>,
        #[arg(long)]
        speed: Option<f64>,
        /// Replay this session file instead of simulating one.
        #[arg(long)]
        replay: Option<PathBuf>,
    },
}

fn load(common: &Common) -> Result<RunConfig, CliError> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn print_json(value: serde_json::Value) {
    println!("{value}");
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate { common, subjects, sessions } => {
            let mut cfg = load(&common)?;
            if let Some(s) = subjects {
                cfg.corpus.subjects = s;
            }
            if let Some(s) = sessions {
                cfg.corpus.sessions = s;
            }
            let manifest = simulate(&cfg, &common.out)?;
            print_json(serde_json::json!({"files": manifest.files.len(), "out": common.out}));
        }
        Command::Train { common, epochs, sessions } => {
            let mut cfg = load(&common)?;
            if let Some(e) = epochs {
                cfg.train.epochs = e;
            }
            let report = train_command(&cfg, &expand_session_paths(&sessions)?, &common.out)?;
            print_json(serde_json::json!({"epochs": report.epochs, "final_loss": report.epoch_losses.last(), "out": common.out}));
        }
        Command::Evaluate { common, epochs, oracle, sessions } => {
            let mut cfg = load(&common)?;
            if let Some(e) = epochs {
                cfg.train.epochs = e;
            }
            cfg.oracle |= oracle;
            let summary = evaluate_command(&cfg, &expand_session_paths(&sessions)?, &common.out)?;
            print_json(serde_json::json!({
                "subjects": summary.subjects.len(),
                "mean_macro_f1": summary.mean_macro_f1,
                "out": common.out,
            }));
        }
        Command::Serve { common, port, speed, replay } => {
            let mut cfg = load(&common)?;
            if let Some(p) = port {
                cfg.serve.port = p;
            }
            if let Some(s) = speed {
                cfg.serve.speed = s;
            }
            if let Some(path) = replay {
                cfg.serve.source = SourceConfig::Replay { path };
            }
            serve_blocking(&cfg, &common.out)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.machine_line());
            ExitCode::FAILURE
        }
    }
}
