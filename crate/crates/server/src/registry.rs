use std::collections::HashMap;
use std::sync::Mutex;

use chrono::{DateTime, Utc};
use labgrader_core::domain::TestbedId;
use labgrader_core::protocol::TestbedDescriptor;
use serde::{Deserialize, Serialize};

/// A testbed silent for longer than this many heartbeat intervals is offline.
pub const OFFLINE_AFTER_INTERVALS: f64 = 3.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Liveness {
    Online,
    Offline,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RegistryEntry {
    pub descriptor: TestbedDescriptor,
    pub last_heartbeat: DateTime<Utc>,
    pub liveness: Liveness,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Upsert {
    New,
    Changed,
    Unchanged,
}

#[derive(Default)]
pub struct Registry {
    entries: Mutex<HashMap<TestbedId, (TestbedDescriptor, DateTime<Utc>)>>,
}

pub fn liveness(descriptor: &TestbedDescriptor, last: DateTime<Utc>, now: DateTime<Utc>) -> Liveness {
    let limit_ms = (OFFLINE_AFTER_INTERVALS * descriptor.heartbeat_interval_s * 1000.0).round() as i64;
    if now - last > chrono::Duration::milliseconds(limit_ms) {
        Liveness::Offline
    } else {
        Liveness::Online
    }
}

impl Registry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn upsert(&self, descriptor: TestbedDescriptor, now: DateTime<Utc>) -> Upsert {
        let mut g = self.entries.lock().expect("registry lock");
        let outcome = match g.get(&descriptor.testbed_id) {
            None => Upsert::New,
            Some((old, _))
                if old.config_hash != descriptor.config_hash
                    || old.endpoint != descriptor.endpoint
                    || old.dut_profile != descriptor.dut_profile =>
            {
                Upsert::Changed
            }
            Some(_) => Upsert::Unchanged,
        };
        g.insert(descriptor.testbed_id.clone(), (descriptor, now));
        outcome
    }

    pub fn entry(&self, id: &TestbedId, now: DateTime<Utc>) -> Option<RegistryEntry> {
        let g = self.entries.lock().expect("registry lock");
        g.get(id).map(|(d, last)| RegistryEntry {
            descriptor: d.clone(),
            last_heartbeat: *last,
            liveness: liveness(d, *last, now),
        })
    }

    pub fn entries(&self, now: DateTime<Utc>) -> Vec<RegistryEntry> {
        let g = self.entries.lock().expect("registry lock");
        let mut out: Vec<RegistryEntry> = g
            .values()
            .map(|(d, last)| RegistryEntry {
                descriptor: d.clone(),
                last_heartbeat: *last,
                liveness: liveness(d, *last, now),
            })
            .collect();
        out.sort_by(|a, b| a.descriptor.testbed_id.cmp(&b.descriptor.testbed_id));
        out
    }

    pub fn online(&self, now: DateTime<Utc>) -> Vec<TestbedDescriptor> {
        self.entries(now)
            .into_iter()
            .filter(|e| e.liveness == Liveness::Online)
            .map(|e| e.descriptor)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use labgrader_core::protocol::{Capabilities, TestbedStatus};

    fn descriptor(hash: &str) -> TestbedDescriptor {
        TestbedDescriptor {
            testbed_id: TestbedId::new("tb"),
            dut_profile: "dut-v1".into(),
            capabilities: Capabilities { max_sample_rate_hz: 1_000_000, pins: vec![] },
            wiring: Default::default(),
            status: TestbedStatus::Idle,
            config_hash: hash.into(),
            endpoint: "http://x".into(),
            heartbeat_interval_s: 10.0,
        }
    }

    #[test]
    fn offline_strictly_after_three_intervals() {
        let r = Registry::new();
        let t = Utc::now();
        assert_eq!(r.upsert(descriptor("a"), t), Upsert::New);
        assert_eq!(r.upsert(descriptor("a"), t), Upsert::Unchanged);
        assert_eq!(r.upsert(descriptor("b"), t), Upsert::Changed);
        assert_eq!(r.online(t + chrono::Duration::seconds(30)).len(), 1);
        assert!(r.online(t + chrono::Duration::milliseconds(30_001)).is_empty());
        let e = r.entry(&TestbedId::new("tb"), t + chrono::Duration::seconds(31)).unwrap();
        assert_eq!(e.liveness, Liveness::Offline);
    }
}
