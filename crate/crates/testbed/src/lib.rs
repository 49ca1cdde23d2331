//! Testbed coordinator: presents one simulated DUT and its capture engine to
//! the grading server over HTTP, and advertises itself with heartbeats.

pub mod config;
pub mod coordinator;
pub mod heartbeat;
pub mod http;

use std::net::SocketAddr;
use std::sync::Arc;
use std::time::{Duration, Instant};

pub use config::{ConfigError, TestbedConfig};
pub use coordinator::{Coordinator, EngineFault};
pub use heartbeat::HashSource;

/// A coordinator serving on a bound socket. Dropping the handle does not
/// stop it; call [`RunningCoordinator::shutdown`] or drop the runtime.
pub struct RunningCoordinator {
    pub addr: SocketAddr,
    pub endpoint: String,
    pub coordinator: Arc<Coordinator>,
    tasks: Vec<tokio::task::JoinHandle<()>>,
}

impl RunningCoordinator {
    pub fn shutdown(self) {
        for t in self.tasks {
            t.abort();
        }
    }
}

/// Binds the HTTP listener and starts the heartbeat and retention tasks on
/// the current runtime.
pub async fn start(cfg: TestbedConfig, hash_source: HashSource) -> Result<RunningCoordinator, StartError> {
    let listener = tokio::net::TcpListener::bind(cfg.listen).await?;
    let addr = listener.local_addr()?;
    let endpoint = cfg.advertise_url.clone().unwrap_or_else(|| format!("http://{addr}"));
    let coordinator = Arc::new(Coordinator::new(cfg)?);

    let app = http::router(coordinator.clone());
    let server = tokio::spawn(async move {
        if let Err(e) = axum::serve(listener, app).await {
            tracing::error!(error = %e, "coordinator http server stopped");
        }
    });
    let beats = tokio::spawn(heartbeat::run(coordinator.clone(), hash_source, endpoint.clone()));
    let purge = {
        let c = coordinator.clone();
        tokio::spawn(async move {
            let mut tick = tokio::time::interval(Duration::from_secs(60));
            loop {
                tick.tick().await;
                c.purge_expired(Instant::now());
            }
        })
    };
    tracing::info!(%addr, testbed = %coordinator.config().testbed_id.as_str(), "coordinator listening");
    Ok(RunningCoordinator {
        addr,
        endpoint,
        coordinator,
        tasks: vec![server, beats, purge],
    })
}

#[derive(Debug, thiserror::Error)]
pub enum StartError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Config(#[from] ConfigError),
}
