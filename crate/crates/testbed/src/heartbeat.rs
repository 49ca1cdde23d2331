use std::path::PathBuf;
use std::sync::Arc;

use labgrader_core::protocol::TestbedDescriptor;
use tokio::time::MissedTickBehavior;

use crate::config;
use crate::coordinator::Coordinator;

pub const HEARTBEAT_PATH: &str = "/testbeds/heartbeat";

/// Where the config hash comes from. A file is re-read on every beat so an
/// edit on disk shows up in the next heartbeat.
#[derive(Clone, Debug)]
pub enum HashSource {
    File(PathBuf),
    InMemory,
}

pub fn current_descriptor(c: &Coordinator, source: &HashSource, endpoint: &str) -> TestbedDescriptor {
    let hash = match source {
        HashSource::File(path) => config::hash_file(path).unwrap_or_else(|e| {
            tracing::warn!(error = %e, "config file unreadable, advertising in-memory hash");
            c.config().hash()
        }),
        HashSource::InMemory => c.config().hash(),
    };
    c.descriptor(hash, endpoint.to_owned())
}

/// Sends a heartbeat every interval until the task is dropped. Delivery
/// failures are logged and retried on the next tick.
pub async fn run(c: Arc<Coordinator>, source: HashSource, endpoint: String) {
    let client = reqwest::Client::new();
    let url = format!("{}{HEARTBEAT_PATH}", c.config().server_url.trim_end_matches('/'));
    let mut tick = tokio::time::interval(c.config().heartbeat_interval());
    tick.set_missed_tick_behavior(MissedTickBehavior::Delay);
    loop {
        tick.tick().await;
        let descriptor = current_descriptor(&c, &source, &endpoint);
        let sent = client
            .post(&url)
            .bearer_auth(&c.config().token)
            .json(&descriptor)
            .timeout(c.config().heartbeat_interval())
            .send()
            .await
            .and_then(|r| r.error_for_status());
        if let Err(e) = sent {
            tracing::debug!(error = %e, "heartbeat not delivered");
        }
    }
}
