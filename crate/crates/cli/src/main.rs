use std::path::PathBuf;
use std::process::ExitCode;

use byrne::pipeline::{run_replay, ReplayConfig};
use clap::Parser;

/// Replays a game log through a commentator character and writes speech
/// scripts, face timelines and traces.
#[derive(Debug, Parser)]
#[command(name = "commentate", version)]
struct Args {
    /// Game log: (tick …) and (fact … relevance: n) lines.
    #[arg(long)]
    log: PathBuf,
    /// Character profile.
    #[arg(long)]
    character: PathBuf,
    /// Style file for the face and voice.
    #[arg(long)]
    style: PathBuf,
    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,
    /// Length of a clock tick in seconds.
    #[arg(long, default_value_t = 1.0, value_parser = positive)]
    tick_seconds: f64,
    /// Echoed in the commentary trace header.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Print each commentary event to standard output.
    #[arg(long)]
    trace: bool,
}

fn positive(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        _ => Err(format!("expected a positive number of seconds, got {s:?}")),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("BYRNE_LOG_LEVEL", "warn"))
        .format_timestamp(None)
        .init();
    let args = Args::parse();
    let config = ReplayConfig {
        tick_seconds: args.tick_seconds,
        seed: args.seed,
    };
    match run_replay(&args.log, &args.character, &args.style, &args.out, config) {
        Ok(replay) => {
            if args.trace {
                for e in &replay.events {
                    println!("{}", e.trace_line());
                }
            }
            log::info!(
                "{} events, {} files written to {}",
                replay.events.len(),
                replay.files.len(),
                args.out.display()
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("commentate: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
