use std::path::PathBuf;

use clap::Parser;
use labgrader_testbed::{start, HashSource, TestbedConfig};

/// Runs one testbed coordinator.
#[derive(Parser)]
#[command(version)]
struct Args {
    /// Path to the coordinator TOML config.
    #[arg(long)]
    config: PathBuf,
}

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()))
        .init();
    let args = Args::parse();
    let cfg = TestbedConfig::load(&args.config)?;
    let running = start(cfg, HashSource::File(args.config)).await?;
    println!("listening on {}", running.addr);
    tokio::signal::ctrl_c().await?;
    running.shutdown();
    Ok(())
}
