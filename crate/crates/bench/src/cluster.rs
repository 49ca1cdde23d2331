//! An in-process deployment: one server and T coordinators on loopback.
//! Each coordinator owns a thread and runtime so that killing it drops its
//! listener and every open connection at once, like a process exit.

use std::net::SocketAddr;
use std::sync::mpsc;
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use labgrader_core::domain::TestbedId;
use labgrader_core::dut::DutProfile;
use labgrader_server::clock::SystemClock;
use labgrader_server::config::{SchedulerConfig, ServerConfig, TestbedToken};
use labgrader_server::RunningServer;
use labgrader_testbed::{HashSource, TestbedConfig};
use tokio::sync::oneshot;

use crate::{BenchError, Credentials, Target};

const INSTRUCTOR: &str = "bench-instructor";
const STUDENT: &str = "bench-student";
const PASSWORD: &str = "bench";

#[derive(Clone, Debug)]
pub struct ClusterConfig {
    pub testbeds: usize,
    pub delay: Duration,
    pub heartbeat_interval_s: f64,
    pub scheduler: SchedulerConfig,
}

impl ClusterConfig {
    pub fn new(testbeds: usize, delay: Duration) -> Self {
        Self {
            testbeds,
            delay,
            heartbeat_interval_s: 0.5,
            scheduler: SchedulerConfig {
                job_poll_ms: 50,
                ..SchedulerConfig::default()
            },
        }
    }
}

struct CoordinatorThread {
    addr: SocketAddr,
    stop: oneshot::Sender<()>,
    thread: thread::JoinHandle<()>,
}

struct Slot {
    cfg: TestbedConfig,
    running: Option<CoordinatorThread>,
}

pub struct LocalCluster {
    pub server: RunningServer,
    slots: Vec<Slot>,
}

pub fn testbed_name(i: usize) -> String {
    format!("bench-tb{i}")
}

fn spawn_coordinator(cfg: TestbedConfig) -> Result<CoordinatorThread, BenchError> {
    let (ready_tx, ready_rx) = mpsc::channel();
    let (stop, stop_rx) = oneshot::channel::<()>();
    let name = cfg.testbed_id.to_string();
    let thread = thread::Builder::new()
        .name(name.clone())
        .spawn(move || {
            let rt = tokio::runtime::Builder::new_multi_thread()
                .worker_threads(2)
                .enable_all()
                .build()
                .expect("coordinator runtime");
            let started = rt.block_on(labgrader_testbed::start(cfg, HashSource::InMemory));
            match started {
                Ok(running) => {
                    let _ = ready_tx.send(Ok(running.addr));
                    let _ = rt.block_on(stop_rx);
                }
                Err(e) => {
                    let _ = ready_tx.send(Err(e.to_string()));
                }
            }
            rt.shutdown_background();
        })?;
    let addr = ready_rx
        .recv()
        .map_err(|_| BenchError::Setup(format!("{name} exited during startup")))?
        .map_err(|e| BenchError::Setup(format!("{name}: {e}")))?;
    Ok(CoordinatorThread { addr, stop, thread })
}

impl LocalCluster {
    pub async fn start(cfg: &ClusterConfig) -> Result<Self, BenchError> {
        let profile = DutProfile::V1;
        let names: Vec<String> = (0..cfg.testbeds).map(testbed_name).collect();
        let server_cfg = ServerConfig {
            listen: "127.0.0.1:0".parse().expect("addr"),
            testbeds: names
                .iter()
                .map(|n| TestbedToken {
                    testbed_id: TestbedId::new(n.as_str()),
                    token: format!("{n}-token"),
                })
                .collect(),
            scheduler: cfg.scheduler.clone(),
            ..ServerConfig::default()
        };
        let server = labgrader_server::start(server_cfg, Arc::new(SystemClock))
            .await
            .map_err(|e| BenchError::Setup(e.to_string()))?;
        for user in [INSTRUCTOR, STUDENT] {
            server
                .state
                .create_account(user, user, PASSWORD)
                .map_err(|e| BenchError::Setup(e.to_string()))?;
        }
        let mut slots = Vec::new();
        for n in &names {
            let mut tb = TestbedConfig::new(n, &profile, &server.base_url, &format!("{n}-token"));
            tb.heartbeat_interval_s = cfg.heartbeat_interval_s;
            tb.service_delay_ms = cfg.delay.as_millis() as u64;
            let running = spawn_coordinator(tb.clone())?;
            slots.push(Slot { cfg: tb, running: Some(running) });
        }
        let cluster = Self { server, slots };
        cluster.wait_online(cfg.testbeds, Duration::from_secs(10)).await?;
        Ok(cluster)
    }

    pub fn target(&self) -> Target {
        let creds = |u: &str| Credentials {
            username: u.to_owned(),
            password: PASSWORD.to_owned(),
        };
        Target {
            base_url: self.server.base_url.clone(),
            instructor: creds(INSTRUCTOR),
            student: creds(STUDENT),
        }
    }

    pub fn online(&self) -> usize {
        self.server.state.pool.running().len()
    }

    /// Waits until exactly `n` testbeds have a dispatch worker.
    pub async fn wait_online(&self, n: usize, limit: Duration) -> Result<(), BenchError> {
        let start = Instant::now();
        while self.online() != n {
            if start.elapsed() > limit {
                return Err(BenchError::Setup(format!("{} of {n} testbeds online", self.online())));
            }
            tokio::time::sleep(Duration::from_millis(20)).await;
        }
        Ok(())
    }

    /// Stops coordinator `i` abruptly: in-flight jobs and artifacts are lost.
    pub async fn kill(&mut self, i: usize) {
        if let Some(c) = self.slots[i].running.take() {
            self.slots[i].cfg.listen = c.addr;
            let _ = c.stop.send(());
            let _ = tokio::task::spawn_blocking(move || c.thread.join()).await;
        }
    }

    /// Starts coordinator `i` again on the port it had before.
    pub fn restart(&mut self, i: usize) -> Result<(), BenchError> {
        if self.slots[i].running.is_none() {
            self.slots[i].running = Some(spawn_coordinator(self.slots[i].cfg.clone())?);
        }
        Ok(())
    }

    pub async fn shutdown(mut self) {
        for i in 0..self.slots.len() {
            self.kill(i).await;
        }
        self.server.shutdown();
    }
}
