use std::path::PathBuf;
use std::sync::Arc;

use clap::{Parser, Subcommand};
use labgrader_server::clock::SystemClock;
use labgrader_server::config::ServerConfig;

#[derive(Parser)]
#[command(version, about = "Lab autograder server")]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Serve the API and dispatch jobs to testbeds.
    Serve {
        #[arg(long)]
        config: PathBuf,
    },
    /// Print a credential hash for the `password_hash` config field.
    HashPassword { password: String },
}

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    match Args::parse().command {
        Command::HashPassword { password } => {
            println!("{}", labgrader_server::auth::hash_password(&password));
        }
        Command::Serve { config } => {
            tracing_subscriber::fmt()
                .with_env_filter(
                    tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
                )
                .init();
            let cfg = ServerConfig::load(&config)?;
            let running = labgrader_server::start(cfg, Arc::new(SystemClock)).await?;
            println!("listening on {}", running.base_url);
            tokio::signal::ctrl_c().await?;
            running.shutdown();
        }
    }
    Ok(())
}
