//! Grading server: REST API with role-based access control, an in-memory
//! store with compare-and-set submission transitions, the testbed registry
//! fed by heartbeats, and one dispatch worker per online testbed.

pub mod api;
pub mod auth;
pub mod client;
pub mod clock;
pub mod config;
pub mod error;
pub mod grading;
pub mod rbac;
pub mod registry;
pub mod scheduler;
pub mod store;

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::Arc;
use std::time::Duration;

use api::AppState;
use clock::Clock;
use config::ServerConfig;
use labgrader_core::domain::UserId;
use registry::Registry;
use scheduler::{SchedulerContext, WorkerPool};
use store::{Fifo, Store, StoreError};

pub struct RunningServer {
    pub addr: SocketAddr,
    pub base_url: String,
    pub state: Arc<AppState>,
    tasks: Vec<tokio::task::JoinHandle<()>>,
}

impl RunningServer {
    pub fn shutdown(self) {
        self.state.pool.shutdown();
        for t in self.tasks {
            t.abort();
        }
    }
}

impl AppState {
    /// Creates an account with a freshly hashed password.
    pub fn create_account(&self, username: &str, display_name: &str, password: &str) -> Result<UserId, StoreError> {
        self.store.create_user(username, display_name, auth::hash_password(password))
    }
}

#[derive(Debug, thiserror::Error)]
pub enum StartError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Config(#[from] config::ConfigError),
    #[error(transparent)]
    Store(#[from] StoreError),
}

/// Builds the state, spawns the reaper and worker reconciliation loops and
/// serves the API on the current runtime.
pub async fn start(cfg: ServerConfig, clock: Arc<dyn Clock>) -> Result<RunningServer, StartError> {
    cfg.validate()?;
    let store = Arc::new(Store::new());
    for account in &cfg.accounts {
        let credential = match (&account.password_hash, &account.password) {
            (Some(hash), _) => hash.clone(),
            (None, Some(plain)) => auth::hash_password(plain),
            (None, None) => unreachable!("validated"),
        };
        let display = account.display_name.as_deref().unwrap_or(&account.username);
        store.create_user(&account.username, display, credential)?;
    }
    let registry = Arc::new(Registry::new());
    let tokens: HashMap<_, _> = cfg.testbeds.iter().map(|t| (t.testbed_id.clone(), t.token.clone())).collect();
    let http = reqwest::Client::builder()
        .timeout(cfg.scheduler.request_timeout())
        .build()
        .expect("http client");
    let ctx = Arc::new(SchedulerContext {
        store: store.clone(),
        registry: registry.clone(),
        clock: clock.clone(),
        cfg: cfg.scheduler.clone(),
        tokens: tokens.clone(),
        policy: Arc::new(Fifo),
        grading_timeout: Duration::from_secs(cfg.grading_timeout_s),
        http,
    });
    let pool = Arc::new(WorkerPool::new(ctx));
    let state = Arc::new(AppState {
        store: store.clone(),
        registry,
        pool: pool.clone(),
        clock: clock.clone(),
        testbed_tokens: tokens,
        session_ttl: chrono::Duration::hours(i64::from(cfg.session_ttl_hours)),
    });

    let listener = tokio::net::TcpListener::bind(cfg.listen).await?;
    let addr = listener.local_addr()?;
    let app = api::router(state.clone());
    let server = tokio::spawn(async move {
        if let Err(e) = axum::serve(listener, app).await {
            tracing::error!(error = %e, "http server stopped");
        }
    });
    let reaper = {
        let store = store.clone();
        let clock = clock.clone();
        let every = Duration::from_millis(cfg.scheduler.reaper_interval_ms);
        tokio::spawn(async move {
            let mut tick = tokio::time::interval(every);
            loop {
                tick.tick().await;
                let n = store.reap_expired(clock.now());
                if n > 0 {
                    tracing::warn!(count = n, "requeued submissions with expired leases");
                }
            }
        })
    };
    let reconcile = {
        let pool = pool.clone();
        let every = Duration::from_millis(cfg.scheduler.reconcile_interval_ms);
        tokio::spawn(async move {
            let mut tick = tokio::time::interval(every);
            loop {
                tick.tick().await;
                pool.reconcile();
            }
        })
    };
    tracing::info!(%addr, "server listening");
    Ok(RunningServer {
        addr,
        base_url: format!("http://{addr}"),
        state,
        tasks: vec![server, reaper, reconcile],
    })
}
