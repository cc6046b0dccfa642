use anyhow::Context;
use clap::{Parser, Subcommand};
use livelab_server::{ServerConfig, ServerCore};
use std::path::PathBuf;
use std::sync::Arc;

#[derive(Parser)]
#[command(name = "server", about = "Central aggregation server", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Serve the registry, snapshot intake, and dashboard.
    Serve {
        #[arg(long)]
        config: PathBuf,
    },
    /// Render the dashboard from a server data directory and exit.
    Report {
        #[arg(long)]
        config: PathBuf,
        /// Write the text report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Emit JSON instead of text.
        #[arg(long)]
        json: bool,
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
        Command::Report { config, out, json } => report(config, out, json),
    }
}

fn load(config_path: &PathBuf) -> anyhow::Result<(ServerConfig, ServerCore)> {
    let config = ServerConfig::load(config_path)?;
    let base_dir = config_path
        .parent()
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("."));
    let core = ServerCore::from_config(&config, &base_dir)?;
    Ok((config, core))
}

async fn serve(config_path: PathBuf) -> anyhow::Result<()> {
    let (config, core) = load(&config_path)?;
    let router = livelab_server::http::router(Arc::new(core));
    let listener = tokio::net::TcpListener::bind(&config.listen)
        .await
        .with_context(|| format!("bind {}", config.listen))?;
    tracing::info!(addr = %listener.local_addr()?, "serving");
    axum::serve(listener, router).await?;
    Ok(())
}

fn report(config_path: PathBuf, out: Option<PathBuf>, json: bool) -> anyhow::Result<()> {
    let (_, core) = load(&config_path)?;
    let report = core.report();
    let rendered = if json {
        report.to_json()
    } else {
        report.render_text()
    };
    match out {
        Some(path) => std::fs::write(&path, rendered)
            .with_context(|| format!("write {}", path.display()))?,
        None => print!("{rendered}"),
    }
    Ok(())
}
