//! Wire messages. Every body is a JSON object; the same bodies travel over
//! the length-prefixed TCP stream and over the WebSocket endpoint.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use twinops_core::scenario::AlarmSpec;

pub const PROTOCOL_VERSION: u32 = 1;
pub const DEFAULT_MAX_FRAME_BYTES: usize = 1 << 20;

/// Capability a session must announce before it is given card-identification
/// tasks.
pub const AR_CAPABILITY: &str = "ar";

/// Client to server.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Request {
    pub msg_id: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub session_id: Option<String>,
    pub kind: String,
    #[serde(default)]
    pub payload: Value,
    #[serde(default)]
    pub client_send_ts_ms: f64,
}

/// Server to client. Replies echo the request's `msg_id`; pushed events
/// (kinds ending in `_event`) and replies to unparseable frames carry none.
/// Timestamps are milliseconds on the server's monotonic clock.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServerFrame {
    pub msg_id: Option<u64>,
    pub kind: String,
    #[serde(default)]
    pub payload: Value,
    pub server_recv_ts_ms: f64,
    pub server_send_ts_ms: f64,
}

impl ServerFrame {
    pub fn is_event(&self) -> bool {
        self.kind.ends_with("_event")
    }

    pub fn is_error(&self) -> bool {
        self.kind == kinds::ERROR
    }

    pub fn error_code(&self) -> Option<ErrorCode> {
        if !self.is_error() {
            return None;
        }
        serde_json::from_value(self.payload.get("code")?.clone()).ok()
    }
}

pub mod kinds {
    pub const HELLO: &str = "hello";
    pub const HELLO_ACK: &str = "hello_ack";
    pub const PING: &str = "ping";
    pub const PONG: &str = "pong";
    pub const TOPOLOGY_REQUEST: &str = "topology_request";
    pub const TOPOLOGY_RESPONSE: &str = "topology_response";
    pub const ALARM_BATCH: &str = "alarm_batch";
    pub const ALARM_ACK: &str = "alarm_ack";
    pub const LOCALIZE_REQUEST: &str = "localize_request";
    pub const LOCALIZE_RESPONSE: &str = "localize_response";
    pub const NAV_REQUEST: &str = "nav_request";
    pub const NAV_RESPONSE: &str = "nav_response";
    pub const CARD_ID_REQUEST: &str = "card_id_request";
    pub const CARD_ID_RESPONSE: &str = "card_id_response";
    pub const COLLAB_JOIN: &str = "collab_join";
    pub const COLLAB_JOINED: &str = "collab_joined";
    pub const POSE_UPDATE: &str = "pose_update";
    pub const POSE_ACK: &str = "pose_ack";
    pub const POSE_EVENT: &str = "pose_event";
    pub const STROKE_ADD: &str = "stroke_add";
    pub const STROKE_ACK: &str = "stroke_ack";
    pub const STROKE_EVENT: &str = "stroke_event";
    pub const CHAT_TEXT: &str = "chat_text";
    pub const CHAT_ACK: &str = "chat_ack";
    pub const CHAT_EVENT: &str = "chat_event";
    pub const ERROR: &str = "error";

    pub const REQUESTS: &[&str] = &[
        HELLO,
        PING,
        TOPOLOGY_REQUEST,
        ALARM_BATCH,
        LOCALIZE_REQUEST,
        NAV_REQUEST,
        CARD_ID_REQUEST,
        COLLAB_JOIN,
        POSE_UPDATE,
        STROKE_ADD,
        CHAT_TEXT,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ErrorCode {
    MalformedFrame,
    FrameTooLarge,
    UnknownKind,
    InvalidPayload,
    NonMonotoneMsgId,
    SessionMismatch,
    NotJoined,
    CapabilityRequired,
    InvalidPose,
    InvalidStroke,
    EmptyAlarms,
    UnknownElement,
    NotOnAnyPath,
    UnknownPoint,
    UnknownShelf,
    NoEnvMap,
    NoPath,
    NavFailed,
    UnknownLayout,
    NoDetections,
    CardIdFailed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: ErrorCode,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HelloPayload {
    pub capabilities: Vec<String>,
    pub client: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlarmBatchPayload {
    pub alarms: Vec<AlarmSpec>,
    /// Replace the session's alarm set instead of appending to it.
    #[serde(default)]
    pub replace: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LocalizeAlgo {
    #[default]
    Coverage,
    Mp,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LocalizePayload {
    pub algo: LocalizeAlgo,
    pub iterations: usize,
}

impl Default for LocalizePayload {
    fn default() -> Self {
        LocalizePayload {
            algo: LocalizeAlgo::Coverage,
            iterations: 3,
        }
    }
}

/// Route from a named point to another point, to a shelf's rack, or to the
/// rack holding an element. Exactly one target must be given.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NavPayload {
    pub from: String,
    #[serde(default)]
    pub to: Option<String>,
    #[serde(default)]
    pub shelf: Option<String>,
    #[serde(default)]
    pub element: Option<String>,
    #[serde(default)]
    pub shelf_level: Option<u8>,
    #[serde(default)]
    pub render: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CardIdPayload {
    /// Synthetic layout name from the scenario.
    pub layout: String,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub confidence_threshold: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CollabJoinPayload {
    pub room: String,
    #[serde(default)]
    pub capabilities: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseUpdate {
    pub object_id: String,
    pub position: [f64; 3],
    /// Unit quaternion (w, x, y, z).
    pub orientation: [f64; 4],
    pub seq: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrokeAddPayload {
    #[serde(default)]
    pub stroke_id: Option<String>,
    #[serde(default)]
    pub color: Option<String>,
    pub points: Vec<[f64; 3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChatPayload {
    pub text: String,
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn request_defaults() {
        let r: Request = serde_json::from_value(json!({"msg_id": 1, "kind": "ping"})).unwrap();
        assert_eq!(r.payload, Value::Null);
        assert_eq!(r.client_send_ts_ms, 0.0);
        assert!(serde_json::from_value::<Request>(json!({"kind": "ping"})).is_err());
        assert!(serde_json::from_value::<Request>(json!({"msg_id": -1, "kind": "ping"})).is_err());
    }

    #[test]
    fn error_code_round_trip() {
        let f = ServerFrame {
            msg_id: Some(3),
            kind: kinds::ERROR.into(),
            payload: serde_json::to_value(ErrorBody {
                code: ErrorCode::NotJoined,
                message: "x".into(),
            })
            .unwrap(),
            server_recv_ts_ms: 1.0,
            server_send_ts_ms: 2.0,
        };
        assert_eq!(f.error_code(), Some(ErrorCode::NotJoined));
        assert_eq!(f.payload["code"], "NotJoined");
    }

    #[test]
    fn localize_payload_defaults() {
        let p: LocalizePayload = serde_json::from_value(json!({"algo": "mp"})).unwrap();
        assert_eq!((p.algo, p.iterations), (LocalizeAlgo::Mp, 3));
        assert!(serde_json::from_value::<LocalizePayload>(json!({"algo": "gnn"})).is_err());
    }
}
