use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::Path;
use std::time::Duration;

use labgrader_core::domain::TestbedId;
use labgrader_core::dut::DutProfile;
use labgrader_core::Pin;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestbedConfig {
    pub testbed_id: TestbedId,
    /// `dut-v1` or `dut-v2`.
    pub profile: String,
    pub server_url: String,
    /// Shared with the server: sent on heartbeats, required on every job request.
    pub token: String,
    #[serde(default = "default_heartbeat")]
    pub heartbeat_interval_s: f64,
    #[serde(default = "default_listen")]
    pub listen: SocketAddr,
    /// URL advertised to the server; defaults to `http://{bound address}`.
    #[serde(default)]
    pub advertise_url: Option<String>,
    /// Added to every job to stand in for flashing and capture wall time.
    #[serde(default)]
    pub service_delay_ms: u64,
    #[serde(default = "default_retention")]
    pub artifact_retention_s: u64,
    /// Engine channel name to DUT pin.
    #[serde(default = "default_wiring")]
    pub wiring: BTreeMap<String, Pin>,
}

fn default_heartbeat() -> f64 {
    10.0
}

fn default_listen() -> SocketAddr {
    SocketAddr::from(([127, 0, 0, 1], 0))
}

fn default_retention() -> u64 {
    24 * 3600
}

fn default_wiring() -> BTreeMap<String, Pin> {
    BTreeMap::from([("ch0".to_owned(), Pin(0)), ("ch1".to_owned(), Pin(1))])
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading config: {0}")]
    Io(#[from] std::io::Error),
    #[error("parsing config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("unknown dut profile `{0}`")]
    UnknownProfile(String),
    #[error("channel {channel} is wired to {pin}, which {profile} does not have")]
    BadWiring { channel: String, pin: Pin, profile: String },
    #[error("heartbeat interval must be positive")]
    Heartbeat,
}

impl TestbedConfig {
    pub fn new(testbed_id: &str, profile: &DutProfile, server_url: &str, token: &str) -> Self {
        Self {
            testbed_id: TestbedId::new(testbed_id),
            profile: profile.id.to_owned(),
            server_url: server_url.to_owned(),
            token: token.to_owned(),
            heartbeat_interval_s: default_heartbeat(),
            listen: default_listen(),
            advertise_url: None,
            service_delay_ms: 0,
            artifact_retention_s: default_retention(),
            wiring: default_wiring(),
        }
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let profile = self.dut_profile()?;
        for (channel, pin) in &self.wiring {
            if !profile.has_pin(*pin) {
                return Err(ConfigError::BadWiring {
                    channel: channel.clone(),
                    pin: *pin,
                    profile: profile.id.to_owned(),
                });
            }
        }
        if self.heartbeat_interval_s.is_nan() || self.heartbeat_interval_s <= 0.0 {
            return Err(ConfigError::Heartbeat);
        }
        Ok(())
    }

    pub fn dut_profile(&self) -> Result<DutProfile, ConfigError> {
        DutProfile::lookup(&self.profile).ok_or_else(|| ConfigError::UnknownProfile(self.profile.clone()))
    }

    pub fn heartbeat_interval(&self) -> Duration {
        Duration::from_secs_f64(self.heartbeat_interval_s)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Digest of this configuration in canonical form.
    pub fn hash(&self) -> String {
        canonical_hash(&self.to_toml()).expect("own serialization parses")
    }
}

/// SHA-256 over the file re-serialized with sorted keys, so formatting and
/// comments do not change the digest.
pub fn canonical_hash(text: &str) -> Result<String, ConfigError> {
    let value: toml::Table = toml::from_str(text)?;
    let canonical = toml::to_string(&value).expect("table serializes");
    Ok(hex::encode(Sha256::digest(canonical.as_bytes())))
}

pub fn hash_file(path: &Path) -> Result<String, ConfigError> {
    canonical_hash(&std::fs::read_to_string(path)?)
}
