//! Edge-service harnesses: simulated collaboration clients driving a
//! [`Service`] in process, and a generator of hostile request frames.

use std::collections::{BTreeMap, VecDeque};

use rand::seq::IndexedRandom;
use rand::Rng;
use serde_json::{json, Value};
use tokio::sync::mpsc::{self, UnboundedReceiver};
use twinops_core::scenario::Scenario;
use twinops_edged::collab::{CollabReplica, PoseAck};
use twinops_edged::protocol::{kinds, ServerFrame};
use twinops_edged::service::{Service, Session};

pub fn random_unit_quaternion<R: Rng>(rng: &mut R) -> [f64; 4] {
    loop {
        let q: [f64; 4] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
        let n = q.iter().map(|v| v * v).sum::<f64>().sqrt();
        if n > 0.1 {
            return q.map(|v| v / n);
        }
    }
}

/// A collaboration participant living in the same process as the service.
pub struct SimClient {
    pub session: Session,
    pub rx: UnboundedReceiver<ServerFrame>,
    pub replica: CollabReplica,
    next_msg_id: u64,
    /// Expected `accepted` flag of each outstanding pose update, by msg_id.
    expected_acks: BTreeMap<u64, bool>,
}

impl SimClient {
    pub fn open(service: &Service) -> Self {
        let (tx, rx) = mpsc::unbounded_channel();
        let session = service.open_session(tx);
        let replica = CollabReplica::new(session.id());
        SimClient {
            session,
            rx,
            replica,
            next_msg_id: 1,
            expected_acks: BTreeMap::new(),
        }
    }

    pub fn send(&mut self, service: &Service, kind: &str, payload: Value) -> u64 {
        let msg_id = self.next_msg_id;
        self.next_msg_id += 1;
        let body = json!({"msg_id": msg_id, "kind": kind, "payload": payload});
        service.handle_frame(&mut self.session, body.to_string().as_bytes());
        msg_id
    }

    /// Apply up to `n` queued frames to the replica and return them.
    pub fn deliver(&mut self, n: usize) -> Vec<ServerFrame> {
        let mut out = Vec::new();
        while out.len() < n {
            match self.rx.try_recv() {
                Ok(f) => {
                    self.replica.apply(&f);
                    out.push(f);
                }
                Err(_) => break,
            }
        }
        out
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RoomTrialReport {
    pub clients: usize,
    pub updates: usize,
    pub accepted: usize,
    /// (object, seq) pairs proposed by more than one client.
    pub contested: usize,
    /// Every failed check, described.
    pub problems: Vec<String>,
}

impl RoomTrialReport {
    pub fn ok(&self) -> bool {
        self.problems.is_empty()
    }
}

/// One randomized collaboration trial: 2 to 4 clients join `room`, then pose
/// updates, strokes and partial deliveries are interleaved at random. After
/// every queue is drained, each replica must hold the server's state byte for
/// byte, each pose ack must agree with an independent last-writer-wins model,
/// no (object, seq) may be accepted twice, and a late joiner must catch up.
pub fn room_trial<R: Rng>(service: &Service, room: &str, rng: &mut R) -> RoomTrialReport {
    let n = rng.random_range(2..=4);
    let objects: Vec<&str> = ["panel", "latch", "card"][..rng.random_range(1..=3)].to_vec();
    let mut clients: Vec<SimClient> = (0..n).map(|_| SimClient::open(service)).collect();
    let mut report = RoomTrialReport {
        clients: n,
        ..Default::default()
    };
    for c in &mut clients {
        c.send(service, kinds::COLLAB_JOIN, json!({"room": room}));
    }

    let mut model: BTreeMap<String, u64> = BTreeMap::new();
    let mut proposers: BTreeMap<(String, u64), usize> = BTreeMap::new();
    let mut accepted_count: BTreeMap<(String, u64), usize> = BTreeMap::new();

    let mut check = |c: &mut SimClient, frames: Vec<ServerFrame>, report: &mut RoomTrialReport| {
        for f in frames {
            if f.kind != kinds::POSE_ACK {
                continue;
            }
            let Ok(ack) = serde_json::from_value::<PoseAck>(f.payload.clone()) else {
                report.problems.push(format!("undecodable ack {f:?}"));
                continue;
            };
            let id = f.msg_id.unwrap_or_default();
            match c.expected_acks.remove(&id) {
                Some(expected) if expected == ack.accepted => {}
                other => report.problems.push(format!(
                    "{}: ack for msg {id} accepted={} but model said {other:?}",
                    c.session.id(),
                    ack.accepted
                )),
            }
            if ack.accepted {
                *accepted_count
                    .entry((ack.state.object_id.clone(), ack.state.seq))
                    .or_default() += 1;
            }
        }
    };

    let ops = rng.random_range(10..60);
    for _ in 0..ops {
        let i = rng.random_range(0..n);
        let roll: f64 = rng.random();
        if roll < 0.55 {
            let object = *objects.choose(rng).expect("non-empty");
            let position: [f64; 3] = std::array::from_fn(|_| rng.random_range(-5.0..5.0));
            let orientation = random_unit_quaternion(rng);
            let c = &mut clients[i];
            let update = if rng.random_bool(0.6) {
                c.replica.propose(object, position, orientation)
            } else {
                let local = c.replica.objects.get(object).map_or(0, |s| s.seq) as i64;
                let seq = (local + rng.random_range(-1..=1)).max(1) as u64;
                c.replica
                    .propose_with_seq(object, position, orientation, seq)
            };
            let stored = model.get(object).copied().unwrap_or(0);
            let accept = update.seq > stored;
            if accept {
                model.insert(object.to_owned(), update.seq);
            }
            *proposers
                .entry((object.to_owned(), update.seq))
                .or_default() += 1;
            let id = c.send(
                service,
                kinds::POSE_UPDATE,
                serde_json::to_value(&update).expect("serializes"),
            );
            c.expected_acks.insert(id, accept);
            report.updates += 1;
        } else if roll < 0.65 {
            let k = rng.random_range(2..6);
            let points: Vec<[f64; 3]> = (0..k)
                .map(|_| std::array::from_fn(|_| rng.random_range(-1.0..1.0)))
                .collect();
            clients[i].send(service, kinds::STROKE_ADD, json!({"points": points}));
        } else {
            let k = rng.random_range(0..=3);
            let frames = clients[i].deliver(k);
            check(&mut clients[i], frames, &mut report);
        }
    }
    for c in &mut clients {
        let frames = c.deliver(usize::MAX);
        check(c, frames, &mut report);
        if !c.expected_acks.is_empty() {
            report.problems.push(format!(
                "{}: {} pose updates never acked",
                c.session.id(),
                c.expected_acks.len()
            ));
        }
    }

    report.contested = proposers.values().filter(|&&k| k > 1).count();
    report.accepted = accepted_count.values().sum();
    for (key, count) in &accepted_count {
        if *count > 1 {
            report
                .problems
                .push(format!("{key:?} accepted {count} times"));
        }
    }

    let Some(state) = service.room_state(room) else {
        report.problems.push(format!("room {room} vanished"));
        return report;
    };
    for (object, seq) in &model {
        if state.objects.get(object).map(|s| s.seq) != Some(*seq) {
            report.problems.push(format!(
                "server holds {object} at {:?}, model at {seq}",
                state.objects.get(object)
            ));
        }
    }
    let mut late = SimClient::open(service);
    late.send(service, kinds::COLLAB_JOIN, json!({"room": room}));
    late.deliver(usize::MAX);
    for c in clients.iter().chain(std::iter::once(&late)) {
        if c.replica.objects.len() != state.objects.len() {
            report.problems.push(format!(
                "{} holds {} objects",
                c.session.id(),
                c.replica.objects.len()
            ));
        }
        for (object, s) in &state.objects {
            let want = serde_json::to_vec(s).expect("serializes");
            if c.replica.object_bytes(object).as_deref() != Some(want.as_slice()) {
                report
                    .problems
                    .push(format!("{} diverged on {object}", c.session.id()));
            }
        }
        if c.replica.strokes != state.strokes {
            report
                .problems
                .push(format!("{} stroke log differs", c.session.id()));
        }
    }
    for c in clients.iter_mut().chain(std::iter::once(&mut late)) {
        service.close_session(&mut c.session);
    }
    report
}

/// What a fuzzed frame is expected to provoke.
#[derive(Debug, Clone, PartialEq)]
pub struct FuzzFrame {
    pub body: Vec<u8>,
    /// A msg_id the server will accept as new, which must then be answered
    /// by exactly one frame carrying it.
    pub fresh_msg_id: Option<u64>,
}

/// Generator of well-formed, malformed and adversarial request bodies. It
/// mirrors the server's msg_id bookkeeping so it knows which ids are fresh.
pub struct FuzzGen {
    last_id: Option<u64>,
    elements: Vec<String>,
    points: Vec<String>,
    layouts: Vec<String>,
}

impl FuzzGen {
    pub fn for_scenario(scenario: &Scenario) -> Self {
        FuzzGen {
            last_id: None,
            elements: scenario
                .graph
                .elements()
                .iter()
                .map(|e| e.id.clone())
                .collect(),
            points: scenario.file.points.keys().cloned().collect(),
            layouts: scenario.file.layouts.keys().cloned().collect(),
        }
    }

    fn next_id(&self) -> u64 {
        self.last_id.map_or(1, |l| l.saturating_add(1))
    }

    fn pick<'a, R: Rng>(rng: &mut R, v: &'a [String], fallback: &'a str) -> &'a str {
        v.choose(rng).map_or(fallback, String::as_str)
    }

    fn valid_payload<R: Rng>(&self, rng: &mut R) -> (&'static str, Value) {
        let kind = *kinds::REQUESTS.choose(rng).expect("non-empty");
        let payload = match kind {
            kinds::HELLO => {
                json!({"capabilities": if rng.random_bool(0.5) { vec!["ar"] } else { vec![] }})
            }
            kinds::PING => json!({"n": rng.random::<u32>()}),
            kinds::TOPOLOGY_REQUEST => Value::Null,
            kinds::ALARM_BATCH => {
                let el = Self::pick(rng, &self.elements, "x");
                json!({"alarms": [{"element_id": el, "text": "Frame loss"}], "replace": rng.random_bool(0.5)})
            }
            kinds::LOCALIZE_REQUEST => {
                json!({"algo": if rng.random_bool(0.5) { "mp" } else { "coverage" }, "iterations": rng.random_range(0..5)})
            }
            kinds::NAV_REQUEST => json!({
                "from": Self::pick(rng, &self.points, "P1"),
                "to": Self::pick(rng, &self.points, "P1"),
                "render": rng.random_bool(0.1),
            }),
            kinds::CARD_ID_REQUEST => json!({"layout": Self::pick(rng, &self.layouts, "none")}),
            kinds::COLLAB_JOIN => json!({"room": "fuzz"}),
            kinds::POSE_UPDATE => json!({
                "object_id": "panel",
                "position": [rng.random::<f64>(), 0.0, 0.0],
                "orientation": if rng.random_bool(0.8) { random_unit_quaternion(rng) } else { [1.0, 1.0, 0.0, 0.0] },
                "seq": rng.random_range(0..50),
            }),
            kinds::STROKE_ADD => {
                let k = rng.random_range(0..4);
                json!({"points": vec![[0.0, 0.5, 1.0]; k]})
            }
            _ => json!({"text": "hello"}),
        };
        (kind, payload)
    }

    pub fn next<R: Rng>(&mut self, rng: &mut R) -> FuzzFrame {
        let id = self.next_id();
        let (kind, payload) = self.valid_payload(rng);
        let valid =
            json!({"msg_id": id, "kind": kind, "payload": payload, "client_send_ts_ms": 0.0})
                .to_string();
        let body: Vec<u8> = match rng.random_range(0..10) {
            0 | 1 => valid.into_bytes(),
            2 => json!({"msg_id": id, "kind": kind, "payload": [1, "two", null]})
                .to_string()
                .into_bytes(),
            3 => (0..rng.random_range(0..200))
                .map(|_| rng.random())
                .collect(),
            4 => {
                let cut = rng.random_range(0..valid.len());
                valid.as_bytes()[..cut].to_vec()
            }
            5 => [&b"[1,2,3]"[..], b"42", b"\"ping\"", b"null", b"{}"]
                .choose(rng)
                .expect("non-empty")
                .to_vec(),
            6 => json!({"msg_id": id, "kind": "self_destruct"})
                .to_string()
                .into_bytes(),
            7 => {
                let stale = self
                    .last_id
                    .unwrap_or(0)
                    .saturating_sub(rng.random_range(0..3));
                json!({"msg_id": stale, "kind": "ping"})
                    .to_string()
                    .into_bytes()
            }
            8 => json!({"kind": kind, "payload": payload})
                .to_string()
                .into_bytes(),
            _ => {
                let mut b = valid.into_bytes();
                for _ in 0..rng.random_range(1..4) {
                    let at = rng.random_range(0..b.len());
                    b[at] ^= 1 << rng.random_range(0..8);
                }
                b
            }
        };
        let claimed = serde_json::from_slice::<Value>(&body)
            .ok()
            .and_then(|v| v.get("msg_id").and_then(Value::as_u64));
        let fresh_msg_id = claimed.filter(|c| self.last_id.is_none_or(|l| *c > l));
        if fresh_msg_id.is_some() {
            self.last_id = fresh_msg_id;
        }
        FuzzFrame { body, fresh_msg_id }
    }
}

/// Result of pushing fuzzed frames through one in-process session.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FuzzReport {
    pub frames: usize,
    pub errors: usize,
    pub problems: Vec<String>,
}

/// Feed `count` fuzzed bodies to a single session. Each must produce exactly
/// one frame, and each fresh msg_id must be echoed by that frame.
pub fn fuzz_session<R: Rng>(service: &Service, count: usize, rng: &mut R) -> FuzzReport {
    let (tx, mut rx) = mpsc::unbounded_channel();
    let mut session = service.open_session(tx);
    let mut gen = FuzzGen::for_scenario(service.scenario());
    let mut report = FuzzReport::default();
    let mut answered: VecDeque<ServerFrame> = VecDeque::new();
    for i in 0..count {
        let f = gen.next(rng);
        service.handle_frame(&mut session, &f.body);
        while let Ok(frame) = rx.try_recv() {
            answered.push_back(frame);
        }
        if answered.len() != 1 {
            report.problems.push(format!(
                "frame {i} produced {} frames: {:?}",
                answered.len(),
                String::from_utf8_lossy(&f.body)
            ));
        }
        if let Some(reply) = answered.front() {
            if reply.is_error() {
                report.errors += 1;
            }
            if f.fresh_msg_id.is_some() && reply.msg_id != f.fresh_msg_id {
                report.problems.push(format!(
                    "frame {i} with fresh id {:?} answered as {:?}",
                    f.fresh_msg_id, reply.msg_id
                ));
            }
        }
        answered.clear();
        report.frames += 1;
    }
    service.close_session(&mut session);
    report
}
