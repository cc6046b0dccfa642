use anyhow::Context;
use clap::{Parser, Subcommand};
use livelab_app::http::AppState;
use livelab_app::{build_app, AppConfig};
use std::path::PathBuf;
use std::sync::Arc;

#[derive(Parser)]
#[command(name = "app", about = "Site-side serving component", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Serve the public endpoints described by a TOML config.
    Serve {
        #[arg(long)]
        config: PathBuf,
    },
    /// Print a log directory's records as JSON lines: events to stdout
    /// first, then outcomes, in append order.
    Replay {
        #[arg(long)]
        log_dir: PathBuf,
    },
}

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| "info".into()),
        )
        .init();
    match Cli::parse().command {
        Command::Serve { config } => serve(config).await,
        Command::Replay { log_dir } => replay(log_dir),
    }
}

async fn serve(config_path: PathBuf) -> anyhow::Result<()> {
    let config = AppConfig::load(&config_path)?;
    let base_dir = config_path
        .parent()
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("."));
    let built = build_app(config, &base_dir).await?;

    let state = Arc::new(AppState {
        core: built.core.clone(),
        sink: built.sink,
    });
    let router = livelab_app::http::router(state);
    let listener = tokio::net::TcpListener::bind(&built.listen)
        .await
        .with_context(|| format!("bind {}", built.listen))?;
    tracing::info!(app_id = %built.core.app_id(), addr = %listener.local_addr()?, "serving");
    axum::serve(listener, router).await?;
    Ok(())
}

fn replay(log_dir: PathBuf) -> anyhow::Result<()> {
    let (events, outcomes) =
        livelab_app::logstore::replay_dir(&log_dir).context("read logs")?;
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    for record in &events {
        serde_json::to_writer(&mut out, record)?;
        use std::io::Write as _;
        writeln!(out)?;
    }
    for record in &outcomes {
        serde_json::to_writer(&mut out, record)?;
        use std::io::Write as _;
        writeln!(out)?;
    }
    eprintln!(
        "replayed {} event records, {} outcome records",
        events.len(),
        outcomes.len()
    );
    Ok(())
}
