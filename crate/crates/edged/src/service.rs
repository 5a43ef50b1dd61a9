//! Transport-independent request handling.
//!
//! A [`Session`] is one connected client. Frames are handed to
//! [`Service::handle_frame`] in arrival order; every reply, error and event
//! destined for a session goes through its [`Outbox`]. Collaboration frames
//! are pushed while the room lock is held, so every member of a room sees
//! room events in the same order the room applied them.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::Instant;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Value};
use tokio::sync::mpsc;
use twinops_core::cardid::{match_slots, overlay, CardIdError, Detector, Frame, MatchConfig};
use twinops_core::faultloc::{localize, localize_mp, Alarm, LocalizationResult, LocalizeError};
use twinops_core::navmap::{render_ascii, NavError};
use twinops_core::scenario::{CardIdRunError, RouteError, Scenario};

use crate::collab::{CollabError, JoinSnapshot, PoseAck, PoseOutcome, RoomState};
use crate::protocol::{
    kinds, AlarmBatchPayload, CardIdPayload, ChatPayload, CollabJoinPayload, ErrorBody, ErrorCode,
    HelloPayload, LocalizeAlgo, LocalizePayload, NavPayload, PoseUpdate, Request, ServerFrame,
    StrokeAddPayload, AR_CAPABILITY, PROTOCOL_VERSION,
};

pub type Outbox = mpsc::UnboundedSender<ServerFrame>;

/// Error reply in the making.
#[derive(Debug, Clone, PartialEq)]
pub struct Failure {
    pub code: ErrorCode,
    pub message: String,
}

impl Failure {
    pub fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        Failure {
            code,
            message: message.into(),
        }
    }
}

impl From<LocalizeError> for Failure {
    fn from(e: LocalizeError) -> Self {
        let code = match &e {
            LocalizeError::EmptyAlarms => ErrorCode::EmptyAlarms,
            LocalizeError::UnknownElement(_) => ErrorCode::UnknownElement,
            LocalizeError::NotOnAnyPath(_) => ErrorCode::NotOnAnyPath,
            LocalizeError::ZeroIterations => ErrorCode::InvalidPayload,
        };
        Failure::new(code, e.to_string())
    }
}

impl From<RouteError> for Failure {
    fn from(e: RouteError) -> Self {
        let code = match &e {
            RouteError::UnknownPoint(_) => ErrorCode::UnknownPoint,
            RouteError::UnknownShelf(_) => ErrorCode::UnknownShelf,
            RouteError::NoEnvMap => ErrorCode::NoEnvMap,
            RouteError::Nav(NavError::NoPath(..)) => ErrorCode::NoPath,
            RouteError::ShelfWithoutPoint(_) | RouteError::Nav(_) => ErrorCode::NavFailed,
        };
        Failure::new(code, e.to_string())
    }
}

impl From<CardIdRunError> for Failure {
    fn from(e: CardIdRunError) -> Self {
        let code = match &e {
            CardIdRunError::UnknownLayout(_) => ErrorCode::UnknownLayout,
            CardIdRunError::CardId(CardIdError::NoDetections) => ErrorCode::NoDetections,
            CardIdRunError::CardId(_) => ErrorCode::CardIdFailed,
        };
        Failure::new(code, e.to_string())
    }
}

impl From<CardIdError> for Failure {
    fn from(e: CardIdError) -> Self {
        CardIdRunError::CardId(e).into()
    }
}

impl From<CollabError> for Failure {
    fn from(e: CollabError) -> Self {
        let code = match &e {
            CollabError::InvalidPose(_) => ErrorCode::InvalidPose,
            CollabError::InvalidStroke(_) => ErrorCode::InvalidStroke,
        };
        Failure::new(code, e.to_string())
    }
}

/// Per-connection state. Alarms and localization results are private to the
/// session; only collaboration rooms are shared.
#[derive(Debug)]
pub struct Session {
    id: String,
    last_msg_id: Option<u64>,
    capabilities: BTreeSet<String>,
    room: Option<String>,
    alarms: Vec<Alarm>,
    localization: Option<LocalizationResult>,
    outbox: Outbox,
}

impl Session {
    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn room(&self) -> Option<&str> {
        self.room.as_deref()
    }

    pub fn capabilities(&self) -> &BTreeSet<String> {
        &self.capabilities
    }

    pub fn alarms(&self) -> &[Alarm] {
        &self.alarms
    }

    pub fn last_msg_id(&self) -> Option<u64> {
        self.last_msg_id
    }

    pub fn add_capabilities(&mut self, capabilities: impl IntoIterator<Item = String>) {
        self.capabilities.extend(capabilities);
    }
}

#[derive(Debug, Default)]
struct Room {
    state: RoomState,
    members: BTreeMap<String, Outbox>,
}

#[derive(Debug)]
pub struct Service {
    scenario: Arc<Scenario>,
    epoch: Instant,
    next_session: AtomicU64,
    rooms: Mutex<HashMap<String, Room>>,
}

impl Service {
    pub fn new(scenario: Arc<Scenario>) -> Self {
        Service {
            scenario,
            epoch: Instant::now(),
            next_session: AtomicU64::new(1),
            rooms: Mutex::new(HashMap::new()),
        }
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    /// Milliseconds on the server's monotonic clock.
    pub fn now_ms(&self) -> f64 {
        self.epoch.elapsed().as_secs_f64() * 1e3
    }

    pub fn open_session(&self, outbox: Outbox) -> Session {
        let n = self.next_session.fetch_add(1, Ordering::Relaxed);
        Session {
            id: format!("s{n}"),
            last_msg_id: None,
            capabilities: BTreeSet::new(),
            room: None,
            alarms: self.scenario.alarms.clone(),
            localization: None,
            outbox,
        }
    }

    pub fn close_session(&self, session: &mut Session) {
        self.leave_room(session);
    }

    /// Authoritative state of a room, if it exists.
    pub fn room_state(&self, room: &str) -> Option<RoomState> {
        self.lock_rooms().get(room).map(|r| r.state.clone())
    }

    pub fn room_members(&self, room: &str) -> Vec<String> {
        self.lock_rooms()
            .get(room)
            .map(|r| r.members.keys().cloned().collect())
            .unwrap_or_default()
    }

    fn lock_rooms(&self) -> MutexGuard<'_, HashMap<String, Room>> {
        // A panic while holding the lock leaves the map structurally intact.
        self.rooms.lock().unwrap_or_else(|p| p.into_inner())
    }

    fn frame(&self, msg_id: Option<u64>, kind: &str, payload: Value, recv_ts: f64) -> ServerFrame {
        ServerFrame {
            msg_id,
            kind: kind.to_owned(),
            payload,
            server_recv_ts_ms: recv_ts,
            server_send_ts_ms: self.now_ms(),
        }
    }

    fn push(&self, outbox: &Outbox, msg_id: Option<u64>, kind: &str, payload: Value, recv_ts: f64) {
        // A closed outbox means the connection is going away; nothing to do.
        let _ = outbox.send(self.frame(msg_id, kind, payload, recv_ts));
    }

    fn push_error(&self, session: &Session, msg_id: Option<u64>, failure: Failure, recv_ts: f64) {
        tracing::debug!(session = %session.id, ?msg_id, code = ?failure.code, "{}", failure.message);
        let body = to_value(&ErrorBody {
            code: failure.code,
            message: failure.message,
        });
        self.push(&session.outbox, msg_id, kinds::ERROR, body, recv_ts);
    }

    /// Reply to a frame the transport refused to buffer.
    pub fn reject_oversized(&self, session: &Session, len: usize, max: usize) {
        let recv_ts = self.now_ms();
        tracing::warn!(session = %session.id, len, max, "oversized frame dropped");
        let failure = Failure::new(
            ErrorCode::FrameTooLarge,
            format!("frame body of {len} bytes exceeds the {max} byte limit"),
        );
        self.push_error(session, None, failure, recv_ts);
    }

    /// Join `room` outside the request flow, as the browser endpoint does for
    /// `?room=`. The snapshot goes out as an unsolicited `collab_joined`.
    pub fn join(&self, session: &mut Session, room: &str, capabilities: &[String]) {
        let recv_ts = self.now_ms();
        session.capabilities.extend(capabilities.iter().cloned());
        self.join_room(session, room, None, recv_ts);
    }

    /// Process one frame body. Exactly one reply or error frame is queued for
    /// the sender; collaboration requests may also queue events for others.
    pub fn handle_frame(&self, session: &mut Session, body: &[u8]) {
        let recv_ts = self.now_ms();
        let value: Value = match serde_json::from_slice(body) {
            Ok(v) => v,
            Err(e) => {
                tracing::warn!(session = %session.id, "malformed frame: {e}");
                let failure =
                    Failure::new(ErrorCode::MalformedFrame, format!("body is not JSON: {e}"));
                return self.push_error(session, None, failure, recv_ts);
            }
        };
        let claimed_id = value.get("msg_id").and_then(Value::as_u64);
        if let Some(id) = claimed_id {
            if session.last_msg_id.is_some_and(|last| id <= last) {
                let failure = Failure::new(
                    ErrorCode::NonMonotoneMsgId,
                    format!(
                        "msg_id {id} is not above the last accepted {}",
                        session.last_msg_id.unwrap_or_default()
                    ),
                );
                return self.push_error(session, None, failure, recv_ts);
            }
            session.last_msg_id = Some(id);
        }
        let request: Request = match serde_json::from_value(value) {
            Ok(r) => r,
            Err(e) => {
                tracing::warn!(session = %session.id, "malformed request: {e}");
                let failure =
                    Failure::new(ErrorCode::MalformedFrame, format!("not a request: {e}"));
                return self.push_error(session, claimed_id, failure, recv_ts);
            }
        };
        let msg_id = Some(request.msg_id);
        if let Some(claimed) = &request.session_id {
            if claimed != &session.id {
                let failure = Failure::new(
                    ErrorCode::SessionMismatch,
                    format!(
                        "frame claims session {claimed} on connection {}",
                        session.id
                    ),
                );
                return self.push_error(session, msg_id, failure, recv_ts);
            }
        }
        let outcome = match request.kind.as_str() {
            kinds::HELLO => self.hello(session, request.payload),
            kinds::PING => reply(kinds::PONG, request.payload),
            kinds::TOPOLOGY_REQUEST => reply(kinds::TOPOLOGY_RESPONSE, self.topology(session)),
            kinds::ALARM_BATCH => self.alarm_batch(session, request.payload),
            kinds::LOCALIZE_REQUEST => self.localize(session, request.payload),
            kinds::NAV_REQUEST => self.navigate(request.payload),
            kinds::CARD_ID_REQUEST => self.card_id(session, request.payload),
            kinds::COLLAB_JOIN => self.collab_join(session, msg_id, request.payload, recv_ts),
            kinds::POSE_UPDATE => self.pose_update(session, msg_id, request.payload, recv_ts),
            kinds::STROKE_ADD => self.stroke_add(session, msg_id, request.payload, recv_ts),
            kinds::CHAT_TEXT => self.chat(session, msg_id, request.payload, recv_ts),
            other => Err(Failure::new(
                ErrorCode::UnknownKind,
                format!("unknown kind `{other}`"),
            )),
        };
        match outcome {
            Ok(Reply::Sent) => {}
            Ok(Reply::Body(kind, payload)) => {
                self.push(&session.outbox, msg_id, kind, payload, recv_ts)
            }
            Err(failure) => self.push_error(session, msg_id, failure, recv_ts),
        }
    }

    fn hello(&self, session: &mut Session, payload: Value) -> Outcome {
        let hello: HelloPayload = parse_or_default(payload)?;
        session.capabilities.extend(hello.capabilities);
        reply(
            kinds::HELLO_ACK,
            json!({
                "session_id": session.id,
                "protocol_version": PROTOCOL_VERSION,
                "capabilities": session.capabilities,
                "scenario": self.scenario.file.name,
            }),
        )
    }

    fn topology(&self, session: &Session) -> Value {
        let file = &self.scenario.file;
        json!({
            "name": file.name,
            "topology": self.scenario.topology_spec(),
            "shelves": file.shelves,
            "points": file.points,
            "alarms": session.alarms,
        })
    }

    fn alarm_batch(&self, session: &mut Session, payload: Value) -> Outcome {
        let batch: AlarmBatchPayload = parse(payload)?;
        let mut alarms = Vec::with_capacity(batch.alarms.len());
        for spec in &batch.alarms {
            if !self.scenario.graph.contains(&spec.element_id) {
                return Err(Failure::new(
                    ErrorCode::UnknownElement,
                    format!("alarm references unknown element `{}`", spec.element_id),
                ));
            }
            alarms.push(
                spec.to_alarm()
                    .map_err(|m| Failure::new(ErrorCode::InvalidPayload, m))?,
            );
        }
        let accepted = alarms.len();
        if batch.replace {
            session.alarms = alarms;
        } else {
            session.alarms.extend(alarms);
        }
        session.localization = None;
        reply(
            kinds::ALARM_ACK,
            json!({"accepted": accepted, "total": session.alarms.len()}),
        )
    }

    fn localize(&self, session: &mut Session, payload: Value) -> Outcome {
        let req: LocalizePayload = parse_or_default(payload)?;
        let graph = &self.scenario.graph;
        let result = match req.algo {
            LocalizeAlgo::Coverage => localize(graph, &session.alarms)?,
            LocalizeAlgo::Mp => localize_mp(graph, &session.alarms, req.iterations)?,
        };
        session.localization = Some(result.clone());
        reply(
            kinds::LOCALIZE_RESPONSE,
            json!({"algo": req.algo, "iterations": req.iterations, "result": result}),
        )
    }

    fn navigate(&self, payload: Value) -> Outcome {
        let req: NavPayload = parse(payload)?;
        let scenario = &self.scenario;
        let targets = [&req.to, &req.shelf, &req.element]
            .iter()
            .filter(|t| t.is_some())
            .count();
        if targets != 1 {
            return Err(Failure::new(
                ErrorCode::InvalidPayload,
                "give exactly one of `to`, `shelf` or `element`",
            ));
        }
        let shelf_id = match (&req.shelf, &req.element) {
            (Some(s), _) => Some(s.clone()),
            (_, Some(e)) => {
                if !scenario.graph.contains(e) {
                    return Err(Failure::new(
                        ErrorCode::UnknownElement,
                        format!("unknown element `{e}`"),
                    ));
                }
                let shelf = scenario.shelf_of(e).ok_or_else(|| {
                    Failure::new(
                        ErrorCode::UnknownShelf,
                        format!("element `{e}` has no shelf"),
                    )
                })?;
                Some(shelf.id.clone())
            }
            _ => None,
        };
        let path = match (&shelf_id, &req.to) {
            (Some(shelf), _) => match req.shelf_level {
                None => scenario.navigate_to_shelf(&req.from, shelf)?,
                Some(level) => {
                    let spec = scenario
                        .shelf(shelf)
                        .ok_or_else(|| RouteError::UnknownShelf(shelf.clone()))?;
                    let point = spec
                        .point
                        .as_deref()
                        .ok_or_else(|| RouteError::ShelfWithoutPoint(shelf.clone()))?;
                    scenario.navigate(&req.from, point, level)?
                }
            },
            (None, Some(to)) => scenario.navigate(&req.from, to, req.shelf_level.unwrap_or(0))?,
            (None, None) => unreachable!("one target checked above"),
        };
        let mut body = json!({
            "from": req.from,
            "to": req.to,
            "shelf": shelf_id,
            "element": req.element,
            "path": path,
        });
        if req.render {
            let grid = scenario.grid().ok_or(RouteError::NoEnvMap)?;
            body["ascii"] = json!(render_ascii(grid, &path.cells));
            body["grid"] = json!({
                "dims": grid.dims(),
                "resolution_m": grid.resolution_m(),
                "origin_m": grid.origin_m(),
                "blocked": grid.blocked_cells().collect::<Vec<_>>(),
            });
        }
        reply(kinds::NAV_RESPONSE, body)
    }

    fn card_id(&self, session: &mut Session, payload: Value) -> Outcome {
        if !session.capabilities.contains(AR_CAPABILITY) {
            return Err(Failure::new(
                ErrorCode::CapabilityRequired,
                format!("card identification needs the `{AR_CAPABILITY}` capability"),
            ));
        }
        let req: CardIdPayload = parse(payload)?;
        let mut config = MatchConfig::default();
        if let Some(t) = req.confidence_threshold {
            if !(0.0..=1.0).contains(&t) {
                return Err(Failure::new(
                    ErrorCode::InvalidPayload,
                    format!("threshold {t} is outside [0, 1]"),
                ));
            }
            config.confidence_threshold = t;
        }
        let scenario = &self.scenario;
        let frame = Frame::Synthetic(scenario.synthetic_frame(&req.layout)?);
        let detections = scenario
            .layout_detector(&req.layout, req.seed)?
            .detect(&frame)?;
        let arrangement = scenario.layout_arrangement(&req.layout)?;
        let assignment = match_slots(&detections, &arrangement, &config)?;
        if session.localization.is_none() {
            // Colouring without a root cause is still useful, so a failed
            // localization only leaves RED out.
            session.localization = localize(&scenario.graph, &session.alarms).ok();
        }
        let report = overlay(&assignment, session.localization.as_ref(), &session.alarms);
        reply(
            kinds::CARD_ID_RESPONSE,
            json!({
                "layout": req.layout,
                "root_cause_id": session.localization.as_ref().map(|l| &l.root_cause_id),
                "detections": detections,
                "assignment": assignment,
                "overlays": report.overlays,
                "root_cause_visible": report.root_cause_visible,
            }),
        )
    }

    fn leave_room(&self, session: &mut Session) {
        if let Some(room) = session.room.take() {
            if let Some(r) = self.lock_rooms().get_mut(&room) {
                r.members.remove(&session.id);
            }
        }
    }

    fn join_room(&self, session: &mut Session, room: &str, msg_id: Option<u64>, recv_ts: f64) {
        self.leave_room(session);
        let mut rooms = self.lock_rooms();
        let r = rooms.entry(room.to_owned()).or_default();
        r.members.insert(session.id.clone(), session.outbox.clone());
        let snapshot = JoinSnapshot {
            room: room.to_owned(),
            session_id: session.id.clone(),
            participants: r.members.keys().cloned().collect(),
            objects: r.state.objects.values().cloned().collect(),
            strokes: r.state.strokes.clone(),
        };
        self.push(
            &session.outbox,
            msg_id,
            kinds::COLLAB_JOINED,
            to_value(&snapshot),
            recv_ts,
        );
        drop(rooms);
        session.room = Some(room.to_owned());
    }

    fn collab_join(
        &self,
        session: &mut Session,
        msg_id: Option<u64>,
        payload: Value,
        recv_ts: f64,
    ) -> Outcome {
        let req: CollabJoinPayload = parse(payload)?;
        if req.room.is_empty() {
            return Err(Failure::new(
                ErrorCode::InvalidPayload,
                "room name is empty",
            ));
        }
        session.capabilities.extend(req.capabilities);
        self.join_room(session, &req.room, msg_id, recv_ts);
        Ok(Reply::Sent)
    }

    /// Run `f` on the session's room with the room lock held.
    fn with_room<T>(
        &self,
        session: &Session,
        f: impl FnOnce(&mut Room) -> Result<T, Failure>,
    ) -> Result<T, Failure> {
        let name = session
            .room
            .as_deref()
            .ok_or_else(|| Failure::new(ErrorCode::NotJoined, "join a collaboration room first"))?;
        let mut rooms = self.lock_rooms();
        let room = rooms
            .get_mut(name)
            .ok_or_else(|| Failure::new(ErrorCode::NotJoined, format!("room {name} is gone")))?;
        f(room)
    }

    fn broadcast(&self, room: &Room, except: &str, kind: &str, payload: &Value, recv_ts: f64) {
        for (member, outbox) in &room.members {
            if member != except {
                self.push(outbox, None, kind, payload.clone(), recv_ts);
            }
        }
    }

    fn pose_update(
        &self,
        session: &mut Session,
        msg_id: Option<u64>,
        payload: Value,
        recv_ts: f64,
    ) -> Outcome {
        let update: PoseUpdate = parse(payload)?;
        self.with_room(session, |room| {
            let (accepted, state) = match room.state.apply_pose(&session.id, &update)? {
                PoseOutcome::Accepted(s) => (true, s),
                PoseOutcome::Rejected(s) => (false, s),
            };
            let ack = to_value(&PoseAck {
                accepted,
                state: state.clone(),
            });
            self.push(&session.outbox, msg_id, kinds::POSE_ACK, ack, recv_ts);
            if accepted {
                self.broadcast(
                    room,
                    &session.id,
                    kinds::POSE_EVENT,
                    &to_value(&state),
                    recv_ts,
                );
            }
            Ok(Reply::Sent)
        })
    }

    fn stroke_add(
        &self,
        session: &mut Session,
        msg_id: Option<u64>,
        payload: Value,
        recv_ts: f64,
    ) -> Outcome {
        let add: StrokeAddPayload = parse(payload)?;
        self.with_room(session, |room| {
            let stroke = to_value(&room.state.add_stroke(&session.id, &add)?);
            self.push(
                &session.outbox,
                msg_id,
                kinds::STROKE_ACK,
                stroke.clone(),
                recv_ts,
            );
            self.broadcast(room, &session.id, kinds::STROKE_EVENT, &stroke, recv_ts);
            Ok(Reply::Sent)
        })
    }

    fn chat(
        &self,
        session: &mut Session,
        msg_id: Option<u64>,
        payload: Value,
        recv_ts: f64,
    ) -> Outcome {
        let chat: ChatPayload = parse(payload)?;
        self.with_room(session, |room| {
            self.push(&session.outbox, msg_id, kinds::CHAT_ACK, json!({}), recv_ts);
            let event = json!({"from": session.id, "text": chat.text});
            self.broadcast(room, &session.id, kinds::CHAT_EVENT, &event, recv_ts);
            Ok(Reply::Sent)
        })
    }
}

enum Reply {
    /// Already queued, under the room lock.
    Sent,
    Body(&'static str, Value),
}

type Outcome = Result<Reply, Failure>;

fn reply(kind: &'static str, payload: Value) -> Outcome {
    Ok(Reply::Body(kind, payload))
}

fn parse<T: DeserializeOwned>(payload: Value) -> Result<T, Failure> {
    serde_json::from_value(payload)
        .map_err(|e| Failure::new(ErrorCode::InvalidPayload, e.to_string()))
}

fn parse_or_default<T: DeserializeOwned + Default>(payload: Value) -> Result<T, Failure> {
    if payload.is_null() {
        Ok(T::default())
    } else {
        parse(payload)
    }
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("protocol types serialize")
}
