//! Campaign runner: drives simulated users against the platform and
//! writes the resulting summary as JSON.

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use livelab_sim::{run_inproc, run_wire, Scenario};
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "sim", about = "synthetic user campaigns for the living lab")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Mode {
    /// Everything in one process; fastest.
    Inproc,
    /// App, server, and stub systems behind loopback HTTP.
    Wire,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one campaign and emit its summary.
    Run {
        /// Scenario TOML; a built-in demo scenario when absent.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Override the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the session count.
        #[arg(long)]
        sessions: Option<usize>,
        #[arg(long, value_enum, default_value_t = Mode::Inproc)]
        mode: Mode,
        /// Write the summary here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| "info".into()),
        )
        .with_writer(std::io::stderr)
        .init();

    let Cli { cmd } = Cli::parse();
    match cmd {
        Cmd::Run {
            config,
            seed,
            sessions,
            mode,
            out,
        } => {
            let mut scenario = match &config {
                Some(path) => {
                    let text = std::fs::read_to_string(path)
                        .with_context(|| format!("read {}", path.display()))?;
                    Scenario::from_toml(&text)?
                }
                None => Scenario::demo(),
            };
            if let Some(seed) = seed {
                scenario.seed = seed;
            }
            if let Some(sessions) = sessions {
                scenario.sessions = sessions;
            }

            let outcome = match mode {
                Mode::Inproc => run_inproc(&scenario).await?,
                Mode::Wire => run_wire(&scenario).await?,
            };
            let summary = &outcome.summary;
            tracing::info!(
                sessions = summary.sessions,
                rankings = summary.stats.rankings,
                rec_panels = summary.stats.rec_panels,
                clicks = summary.stats.clicks,
                segments = summary.stats.segments,
                "campaign complete"
            );

            let json = summary.to_json();
            match out {
                Some(path) => std::fs::write(&path, json.as_bytes())
                    .with_context(|| format!("write {}", path.display()))?,
                None => println!("{json}"),
            }
        }
    }
    Ok(())
}
