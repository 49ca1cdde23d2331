use std::net::SocketAddr;
use std::path::Path;
use std::time::Duration;

use labgrader_core::domain::TestbedId;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ServerConfig {
    #[serde(default = "default_listen")]
    pub listen: SocketAddr,
    #[serde(default)]
    pub accounts: Vec<AccountConfig>,
    /// Pre-issued token per testbed; a heartbeat must present its own.
    #[serde(default)]
    pub testbeds: Vec<TestbedToken>,
    #[serde(default)]
    pub scheduler: SchedulerConfig,
    #[serde(default = "default_session_hours")]
    pub session_ttl_hours: u32,
    #[serde(default = "default_grading_timeout")]
    pub grading_timeout_s: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AccountConfig {
    pub username: String,
    #[serde(default)]
    pub display_name: Option<String>,
    /// Output of `labgrader-server hash-password`.
    #[serde(default)]
    pub password_hash: Option<String>,
    /// Plain password, hashed at startup and then discarded. For local use.
    #[serde(default)]
    pub password: Option<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TestbedToken {
    pub testbed_id: TestbedId,
    pub token: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct SchedulerConfig {
    /// Bounds of the randomized wait between empty polls.
    pub poll_min_ms: u64,
    pub poll_max_ms: u64,
    pub lease_s: u64,
    /// Requeues allowed before a submission is marked failed.
    pub max_retries: u32,
    /// Interval between coordinator status polls while a job runs.
    pub job_poll_ms: u64,
    pub request_timeout_ms: u64,
    /// Upper bound on one job's wall time on a coordinator.
    pub job_timeout_s: u64,
    pub reaper_interval_ms: u64,
    pub reconcile_interval_ms: u64,
}

impl Default for SchedulerConfig {
    fn default() -> Self {
        Self {
            poll_min_ms: 500,
            poll_max_ms: 1500,
            lease_s: 120,
            max_retries: 2,
            job_poll_ms: 200,
            request_timeout_ms: 5000,
            job_timeout_s: 600,
            reaper_interval_ms: 1000,
            reconcile_interval_ms: 1000,
        }
    }
}

impl SchedulerConfig {
    pub fn lease(&self) -> chrono::Duration {
        chrono::Duration::seconds(self.lease_s as i64)
    }

    pub fn request_timeout(&self) -> Duration {
        Duration::from_millis(self.request_timeout_ms)
    }
}

fn default_listen() -> SocketAddr {
    SocketAddr::from(([127, 0, 0, 1], 8080))
}

fn default_session_hours() -> u32 {
    12
}

fn default_grading_timeout() -> u64 {
    30
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self {
            listen: default_listen(),
            accounts: Vec::new(),
            testbeds: Vec::new(),
            scheduler: SchedulerConfig::default(),
            session_ttl_hours: default_session_hours(),
            grading_timeout_s: default_grading_timeout(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("reading config: {0}")]
    Io(#[from] std::io::Error),
    #[error("parsing config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("account {0} needs exactly one of password or password_hash")]
    Credential(String),
    #[error("poll bounds must satisfy 0 < min <= max")]
    PollBounds,
}

impl ServerConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(&std::fs::read_to_string(path)?)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        for a in &self.accounts {
            if a.password.is_some() == a.password_hash.is_some() {
                return Err(ConfigError::Credential(a.username.clone()));
            }
        }
        let s = &self.scheduler;
        if s.poll_min_ms == 0 || s.poll_min_ms > s.poll_max_ms {
            return Err(ConfigError::PollBounds);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn example_config_is_valid() {
        let cfg: ServerConfig = toml::from_str(include_str!("../../../config/server.example.toml")).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.testbeds.len(), 2);
        assert_eq!(cfg.scheduler.max_retries, 2);
    }

    #[test]
    fn parses_minimal_file() {
        let cfg: ServerConfig = toml::from_str(
            r#"
listen = "0.0.0.0:9000"
[[accounts]]
username = "ada"
password = "pw"
[[testbeds]]
testbed_id = "tb-1"
token = "t1"
[scheduler]
max_retries = 3
"#,
        )
        .unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.scheduler.max_retries, 3);
        assert_eq!(cfg.scheduler.poll_min_ms, 500);
        assert_eq!(cfg.testbeds[0].testbed_id.as_str(), "tb-1");
    }

    #[test]
    fn account_needs_one_credential() {
        let mut cfg = ServerConfig::default();
        cfg.accounts.push(AccountConfig {
            username: "x".into(),
            display_name: None,
            password_hash: None,
            password: None,
        });
        assert!(matches!(cfg.validate(), Err(ConfigError::Credential(_))));
    }
}
