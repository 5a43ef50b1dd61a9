mod common;

use std::time::Duration;

use serde_json::json;
use twinops_edged::latency::LatencyHistograms;
use twinops_edged::protocol::kinds;
use twinops_edged::{serve, EdgeClient, ErrorCode, ServeConfig, ServeError};

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn thousand_pings_conserve_latency() {
    let (_svc, server) = common::start(1 << 20).await;
    let mut client = EdgeClient::connect(server.tcp_addr).await.unwrap();
    let mut records = Vec::new();
    for i in 0..1000 {
        let ex = client.request(kinds::PING, json!({"i": i})).await.unwrap();
        assert_eq!(ex.reply.kind, kinds::PONG);
        assert_eq!(ex.reply.payload["i"], i);
        records.push(ex.latency);
    }
    for r in &records {
        assert!(
            r.total_ms >= 0.0 && r.inference_ms >= 0.0 && r.network_rtt_ms >= 0.0,
            "{r:?}"
        );
        assert!(
            (r.total_ms - (r.inference_ms + r.network_rtt_ms)).abs() <= 1.0,
            "{r:?}"
        );
    }
    let h = LatencyHistograms::from_records(&records, 0.05);
    assert_eq!(h.total.total(), 1000);
    assert_eq!(h.network.bins().iter().map(|b| b.count).sum::<u64>(), 1000);
    server.shutdown().await;
}

#[tokio::test]
async fn localize_and_card_id_over_tcp() {
    let (_svc, server) = common::start(1 << 20).await;
    let mut client = EdgeClient::connect(server.tcp_addr).await.unwrap();
    for algo in ["coverage", "mp"] {
        let ex = client
            .request(
                kinds::LOCALIZE_REQUEST,
                json!({"algo": algo, "iterations": 3}),
            )
            .await
            .unwrap();
        assert_eq!(
            ex.reply.payload["result"]["root_cause_id"], "TN4/S2/1/OT",
            "{algo}"
        );
    }
    client.hello(&["ar"]).await.unwrap();
    let ex = client
        .request(kinds::CARD_ID_REQUEST, json!({"layout": "tn4_s2"}))
        .await
        .unwrap();
    assert_eq!(ex.reply.kind, kinds::CARD_ID_RESPONSE);
    let overlays = ex.reply.payload["overlays"].as_array().unwrap();
    let colored: Vec<(&str, &str)> = overlays
        .iter()
        .filter(|o| o["color"] != "NONE")
        .map(|o| {
            (
                o["element_id"].as_str().unwrap(),
                o["color"].as_str().unwrap(),
            )
        })
        .collect();
    assert_eq!(
        colored,
        vec![("TN4/S2/1/OT", "RED"), ("TN4/S2/6/LA", "BLUE")]
    );
    assert!(ex.latency.inference_ms <= ex.latency.total_ms);
    server.shutdown().await;
}

#[tokio::test]
async fn card_id_only_for_ar_sessions() {
    let (_svc, server) = common::start(1 << 20).await;
    let mut plain = EdgeClient::connect(server.tcp_addr).await.unwrap();
    let mut ar = EdgeClient::connect(server.tcp_addr).await.unwrap();
    let req = json!({"layout": "tn4_s2"});
    let ex = plain.request(kinds::CARD_ID_REQUEST, &req).await.unwrap();
    assert_eq!(ex.reply.error_code(), Some(ErrorCode::CapabilityRequired));
    ar.hello(&["ar"]).await.unwrap();
    assert_eq!(
        ar.request(kinds::CARD_ID_REQUEST, &req)
            .await
            .unwrap()
            .reply
            .kind,
        kinds::CARD_ID_RESPONSE
    );
    let ex = plain.request(kinds::CARD_ID_REQUEST, &req).await.unwrap();
    assert_eq!(ex.reply.error_code(), Some(ErrorCode::CapabilityRequired));
    server.shutdown().await;
}

#[tokio::test]
async fn sessions_are_isolated() {
    let (_svc, server) = common::start(1 << 20).await;
    let mut a = EdgeClient::connect(server.tcp_addr).await.unwrap();
    let mut b = EdgeClient::connect(server.tcp_addr).await.unwrap();
    for _ in 0..50 {
        a.request(kinds::PING, ()).await.unwrap();
    }
    let ex = a
        .request(kinds::ALARM_BATCH, json!({"alarms": [], "replace": true}))
        .await
        .unwrap();
    assert_eq!(ex.reply.payload["total"], 0);
    assert_eq!(
        a.request(kinds::LOCALIZE_REQUEST, ())
            .await
            .unwrap()
            .reply
            .error_code(),
        Some(ErrorCode::EmptyAlarms)
    );
    // b starts its own msg_id sequence at 1 and still sees the scenario alarms
    assert_eq!(b.next_msg_id(), 1);
    let ex = b.request(kinds::LOCALIZE_REQUEST, ()).await.unwrap();
    assert_eq!(ex.reply.msg_id, Some(1));
    assert_eq!(ex.reply.payload["result"]["root_cause_id"], "TN4/S2/1/OT");
    let sa = a.hello(&[]).await.unwrap().reply.payload["session_id"].clone();
    let sb = b.hello(&[]).await.unwrap().reply.payload["session_id"].clone();
    assert_ne!(sa, sb);
    server.shutdown().await;
}

#[tokio::test]
async fn malformed_and_oversized_frames_keep_the_session() {
    let (_svc, server) = common::start(4096).await;
    let mut c = EdgeClient::connect_with(server.tcp_addr, 4096)
        .await
        .unwrap();
    c.send_body(b"\xff\xfe not json").await.unwrap();
    let f = c.next_frame(Duration::from_secs(5)).await.unwrap().unwrap();
    assert_eq!(f.frame.error_code(), Some(ErrorCode::MalformedFrame));

    let mut raw = 5000u32.to_be_bytes().to_vec();
    raw.extend(std::iter::repeat_n(b'x', 5000));
    c.send_raw(&raw).await.unwrap();
    let f = c.next_frame(Duration::from_secs(5)).await.unwrap().unwrap();
    assert_eq!(f.frame.error_code(), Some(ErrorCode::FrameTooLarge));

    let ex = c.request(kinds::PING, ()).await.unwrap();
    assert_eq!(ex.reply.kind, kinds::PONG);
    assert!(c.drain(Duration::from_millis(50)).await.unwrap().is_empty());
    server.shutdown().await;
}

#[tokio::test]
async fn unknown_kind_is_answered() {
    let (_svc, server) = common::start(1 << 20).await;
    let mut c = EdgeClient::connect(server.tcp_addr).await.unwrap();
    let ex = c.request("warp_drive", ()).await.unwrap();
    assert_eq!(ex.reply.error_code(), Some(ErrorCode::UnknownKind));
    assert_eq!(ex.reply.msg_id, Some(1));
    server.shutdown().await;
}

#[tokio::test]
async fn navigation_over_tcp() {
    let (_svc, server) = common::start(1 << 20).await;
    let mut c = EdgeClient::connect(server.tcp_addr).await.unwrap();
    let ex = c
        .request(kinds::NAV_REQUEST, json!({"from": "P1", "shelf": "TN4/S2"}))
        .await
        .unwrap();
    assert_eq!(ex.reply.kind, kinds::NAV_RESPONSE);
    let cells = ex.reply.payload["path"]["cells"].as_array().unwrap();
    assert!(cells.len() > 2);
    assert_eq!(ex.reply.payload["path"]["flag"]["height_m"], 1.5);
    server.shutdown().await;
}

#[tokio::test]
async fn second_bind_fails() {
    let (svc, server) = common::start(1 << 20).await;
    let config = ServeConfig {
        listen: server.tcp_addr.to_string(),
        ws_listen: None,
        max_frame_bytes: 1 << 20,
    };
    match serve(svc, config).await {
        Err(ServeError::BindFailure { addr, .. }) => assert_eq!(addr, server.tcp_addr.to_string()),
        other => panic!("expected a bind failure, got {other:?}"),
    }
    server.shutdown().await;
}

#[tokio::test]
async fn shutdown_closes_connections() {
    let (_svc, server) = common::start(1 << 20).await;
    let mut c = EdgeClient::connect(server.tcp_addr).await.unwrap();
    c.request(kinds::PING, ()).await.unwrap();
    tokio::time::timeout(Duration::from_secs(5), server.shutdown())
        .await
        .unwrap();
    assert!(c.request(kinds::PING, ()).await.is_err());
}
