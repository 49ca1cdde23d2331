mod common;

use std::sync::Arc;
use std::time::Duration;

use chrono::{TimeZone, Utc};
use common::*;
use labgrader_core::domain::TestbedId;
use labgrader_core::protocol::TestbedDescriptor;
use labgrader_server::clock::ManualClock;
use labgrader_server::RunningServer;
use reqwest::StatusCode;

async fn beat(srv: &RunningServer, descriptor: &TestbedDescriptor, token: &str) -> StatusCode {
    reqwest::Client::new()
        .post(format!("{}/testbeds/heartbeat", srv.base_url))
        .bearer_auth(token)
        .json(descriptor)
        .send()
        .await
        .unwrap()
        .status()
}

async fn settle() {
    // a few reconcile ticks
    tokio::time::sleep(Duration::from_millis(250)).await;
}

fn online(srv: &RunningServer) -> Vec<TestbedId> {
    let mut ids: Vec<TestbedId> = srv
        .state
        .registry
        .online(srv.state.clock.now())
        .into_iter()
        .map(|d| d.testbed_id)
        .collect();
    ids.sort();
    ids
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn workers_follow_heartbeats() {
    let clock = Arc::new(ManualClock::new(Utc.with_ymd_and_hms(2026, 3, 2, 9, 0, 0).unwrap()));
    let srv = server(clock.clone(), &["tb-a", "tb-b"]).await;
    let a = fake_descriptor("tb-a", "http://127.0.0.1:9");
    let b = fake_descriptor("tb-b", "http://127.0.0.1:9");

    assert_eq!(beat(&srv, &a, "wrong").await, StatusCode::UNAUTHORIZED);
    assert_eq!(beat(&srv, &a, &testbed_token("tb-b")).await, StatusCode::UNAUTHORIZED);
    assert!(srv.state.pool.running().is_empty());

    assert_eq!(beat(&srv, &a, &testbed_token("tb-a")).await, StatusCode::OK);
    assert_eq!(beat(&srv, &b, &testbed_token("tb-b")).await, StatusCode::OK);
    settle().await;
    assert_eq!(srv.state.pool.running(), online(&srv));
    assert_eq!(online(&srv).len(), 2);

    // b keeps beating, a goes quiet for just over three intervals
    clock.advance(chrono::Duration::seconds(20));
    assert_eq!(beat(&srv, &b, &testbed_token("tb-b")).await, StatusCode::OK);
    clock.advance(chrono::Duration::milliseconds(10_001));
    settle().await;
    assert_eq!(online(&srv), [TestbedId::new("tb-b")]);
    assert_eq!(srv.state.pool.running(), online(&srv));

    let prof = account(&srv, "prof").await;
    let (status, list) = prof.get("/testbeds").await;
    assert_eq!(status, StatusCode::OK);
    let liveness: Vec<(String, String)> = list
        .as_array()
        .unwrap()
        .iter()
        .map(|e| (e["descriptor"]["testbed_id"].as_str().unwrap().to_owned(), e["liveness"].as_str().unwrap().to_owned()))
        .collect();
    assert!(liveness.contains(&("tb-a".into(), "offline".into())), "{list}");
    assert!(liveness.contains(&("tb-b".into(), "online".into())), "{list}");

    // a comes back
    assert_eq!(beat(&srv, &a, &testbed_token("tb-a")).await, StatusCode::OK);
    settle().await;
    assert_eq!(online(&srv).len(), 2);
    assert_eq!(srv.state.pool.running(), online(&srv));
    srv.shutdown();
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn exactly_three_intervals_is_still_online() {
    let clock = Arc::new(ManualClock::new(Utc.with_ymd_and_hms(2026, 3, 2, 9, 0, 0).unwrap()));
    let srv = server(clock.clone(), &["tb-a"]).await;
    let a = fake_descriptor("tb-a", "http://127.0.0.1:9");
    assert_eq!(beat(&srv, &a, &testbed_token("tb-a")).await, StatusCode::OK);
    clock.advance(chrono::Duration::seconds(30));
    settle().await;
    assert_eq!(srv.state.pool.running(), [TestbedId::new("tb-a")]);
    clock.advance(chrono::Duration::milliseconds(1));
    settle().await;
    assert!(srv.state.pool.running().is_empty());
    srv.shutdown();
}
