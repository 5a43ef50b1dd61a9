mod common;

use std::time::Duration;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use twinops_edged::collab::{CollabReplica, PoseAck};
use twinops_edged::protocol::kinds;
use twinops_edged::{EdgeClient, ErrorCode, Service};
use twinops_testkit::edge::{room_trial, SimClient};

const IDENTITY: [f64; 4] = [1.0, 0.0, 0.0, 0.0];

#[test]
fn randomized_interleavings_converge() {
    let service = Service::new(common::reference());
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut contested = 0;
    for trial in 0..200 {
        let report = room_trial(&service, &format!("room-{trial}"), &mut rng);
        assert!(report.ok(), "trial {trial}: {:?}", report.problems);
        contested += report.contested;
    }
    assert!(
        contested > 0,
        "the trials never contested a sequence number"
    );
}

fn pose(seq: u64, x: f64) -> serde_json::Value {
    json!({"object_id": "panel", "position": [x, 0.0, 0.0], "orientation": IDENTITY, "seq": seq})
}

#[test]
fn contested_seq_in_both_orders() {
    for a_first in [true, false] {
        let service = Service::new(common::reference());
        let mut a = SimClient::open(&service);
        let mut b = SimClient::open(&service);
        for c in [&mut a, &mut b] {
            c.send(&service, kinds::COLLAB_JOIN, json!({"room": "lab"}));
        }
        if a_first {
            a.send(&service, kinds::POSE_UPDATE, pose(6, 1.0));
            b.send(&service, kinds::POSE_UPDATE, pose(6, 2.0));
        } else {
            b.send(&service, kinds::POSE_UPDATE, pose(6, 2.0));
            a.send(&service, kinds::POSE_UPDATE, pose(6, 1.0));
        }
        let mut accepted = 0;
        for c in [&mut a, &mut b] {
            for f in c.deliver(usize::MAX) {
                if f.kind == kinds::POSE_ACK {
                    accepted += usize::from(
                        serde_json::from_value::<PoseAck>(f.payload)
                            .unwrap()
                            .accepted,
                    );
                }
            }
        }
        assert_eq!(accepted, 1);
        let winner = if a_first {
            a.session.id()
        } else {
            b.session.id()
        };
        let state = service.room_state("lab").unwrap();
        assert_eq!(state.objects["panel"].owner, winner);
        assert_eq!(a.replica.objects, state.objects);
        assert_eq!(b.replica.objects, state.objects);
    }
}

#[test]
fn regression_is_corrected() {
    let service = Service::new(common::reference());
    let mut a = SimClient::open(&service);
    a.send(&service, kinds::COLLAB_JOIN, json!({"room": "lab"}));
    a.send(&service, kinds::POSE_UPDATE, pose(7, 7.0));
    a.replica
        .propose_with_seq("panel", [7.0, 0.0, 0.0], IDENTITY, 7);
    a.send(&service, kinds::POSE_UPDATE, pose(6, 6.0));
    let frames = a.deliver(usize::MAX);
    let last: PoseAck = serde_json::from_value(frames.last().unwrap().payload.clone()).unwrap();
    assert!(!last.accepted);
    assert_eq!((last.state.seq, last.state.position[0]), (7, 7.0));
    assert_eq!(a.replica.objects["panel"].seq, 7);
}

#[test]
fn strokes_reach_everyone_and_late_joiners() {
    let service = Service::new(common::reference());
    let mut a = SimClient::open(&service);
    let mut b = SimClient::open(&service);
    for c in [&mut a, &mut b] {
        c.send(&service, kinds::COLLAB_JOIN, json!({"room": "lab"}));
    }
    let points = json!([[0.1, 0.2, 1.0], [0.2, 0.2, 1.0], [0.2, 0.3, 1.0]]);
    a.send(
        &service,
        kinds::STROKE_ADD,
        json!({"points": points, "stroke_id": "latch-1"}),
    );
    a.send(
        &service,
        kinds::STROKE_ADD,
        json!({"points": [[0.0, 0.0, 0.0]]}),
    );
    let errs: Vec<_> = a
        .deliver(usize::MAX)
        .into_iter()
        .filter_map(|f| f.error_code())
        .collect();
    assert_eq!(errs, vec![ErrorCode::InvalidStroke]);
    let got = b.deliver(usize::MAX);
    let ev = got.iter().find(|f| f.kind == kinds::STROKE_EVENT).unwrap();
    assert_eq!(ev.payload["points"], points);
    assert_eq!(ev.payload["color"], "RED");
    a.send(&service, kinds::POSE_UPDATE, pose(3, 1.5));
    a.deliver(usize::MAX);

    let mut late = SimClient::open(&service);
    late.send(&service, kinds::COLLAB_JOIN, json!({"room": "lab"}));
    late.deliver(usize::MAX);
    assert_eq!(late.replica.strokes, a.replica.strokes);
    assert_eq!(late.replica.strokes.len(), 1);
    assert_eq!(late.replica.objects["panel"].seq, 3);
}

#[test]
fn rooms_do_not_leak() {
    let service = Service::new(common::reference());
    let mut a = SimClient::open(&service);
    let mut b = SimClient::open(&service);
    a.send(&service, kinds::COLLAB_JOIN, json!({"room": "one"}));
    b.send(&service, kinds::COLLAB_JOIN, json!({"room": "two"}));
    b.deliver(usize::MAX);
    a.send(&service, kinds::POSE_UPDATE, pose(1, 1.0));
    a.send(&service, kinds::CHAT_TEXT, json!({"text": "hi"}));
    assert!(b.deliver(usize::MAX).is_empty());
    assert!(service.room_state("two").unwrap().objects.is_empty());
}

#[test]
fn collab_needs_a_room() {
    let service = Service::new(common::reference());
    let mut a = SimClient::open(&service);
    for (kind, payload) in [
        (kinds::POSE_UPDATE, pose(1, 0.0)),
        (
            kinds::STROKE_ADD,
            json!({"points": [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]]}),
        ),
        (kinds::CHAT_TEXT, json!({"text": "x"})),
    ] {
        a.send(&service, kind, payload);
        let f = a.deliver(usize::MAX);
        assert_eq!(f.len(), 1);
        assert_eq!(f[0].error_code(), Some(ErrorCode::NotJoined));
    }
}

/// Clients over real sockets, each proposing concurrently.
#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_network_clients_converge() {
    let (service, server) = common::start(1 << 20).await;
    for trial in 0..10u64 {
        let room = format!("net-{trial}");
        let n = 2 + (trial as usize % 3);
        let mut tasks = Vec::new();
        for k in 0..n {
            let addr = server.tcp_addr;
            let room = room.clone();
            tasks.push(tokio::spawn(async move {
                let mut c = EdgeClient::connect(addr).await.unwrap();
                let joined = c
                    .request(kinds::COLLAB_JOIN, json!({"room": room}))
                    .await
                    .unwrap();
                let mut replica = CollabReplica::default();
                replica.apply(&joined.reply);
                for step in 0..20u64 {
                    let x = (k as f64) * 100.0 + step as f64;
                    let update = replica.propose("panel", [x, 0.0, 0.0], IDENTITY);
                    let ex = c.request(kinds::POSE_UPDATE, &update).await.unwrap();
                    for r in c.take_stash() {
                        replica.apply(&r.frame);
                    }
                    replica.apply(&ex.reply);
                }
                (c, replica)
            }));
        }
        let mut done = Vec::new();
        for t in tasks {
            done.push(t.await.unwrap());
        }
        let state = service.room_state(&room).unwrap();
        for (c, replica) in &mut done {
            for r in c.drain(Duration::from_millis(100)).await.unwrap() {
                replica.apply(&r.frame);
            }
            assert_eq!(replica.objects, state.objects, "trial {trial}");
        }
    }
    server.shutdown().await;
}
