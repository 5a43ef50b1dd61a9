//! Shared collaboration state: object poses under last-writer-wins by
//! sequence number, and an append-only stroke log.
//!
//! [`RoomState`] is the server's authoritative copy. [`CollabReplica`] is what
//! a participant keeps locally, fed by the frames the server sends it.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::protocol::{kinds, PoseUpdate, ServerFrame, StrokeAddPayload};

pub const QUATERNION_TOLERANCE: f64 = 1e-6;
pub const DEFAULT_STROKE_COLOR: &str = "RED";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollabObjectState {
    pub object_id: String,
    pub position: [f64; 3],
    pub orientation: [f64; 4],
    pub seq: u64,
    /// Session that wrote this state.
    pub owner: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stroke {
    pub stroke_id: String,
    pub author: String,
    pub color: String,
    pub points: Vec<[f64; 3]>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CollabError {
    #[error("invalid pose: {0}")]
    InvalidPose(String),
    #[error("invalid stroke: {0}")]
    InvalidStroke(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum PoseOutcome {
    Accepted(CollabObjectState),
    /// Stale sequence number; carries the authoritative state.
    Rejected(CollabObjectState),
}

pub fn validate_pose(update: &PoseUpdate) -> Result<(), CollabError> {
    if update.object_id.is_empty() {
        return Err(CollabError::InvalidPose("empty object id".into()));
    }
    if update
        .position
        .iter()
        .chain(&update.orientation)
        .any(|v| !v.is_finite())
    {
        return Err(CollabError::InvalidPose("non-finite component".into()));
    }
    let norm = update.orientation.iter().map(|q| q * q).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > QUATERNION_TOLERANCE {
        return Err(CollabError::InvalidPose(format!("quaternion norm {norm}")));
    }
    Ok(())
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RoomState {
    pub objects: BTreeMap<String, CollabObjectState>,
    pub strokes: Vec<Stroke>,
    #[serde(skip)]
    next_stroke: u64,
}

impl RoomState {
    /// Accept iff `seq` is above the stored one. Unknown objects are
    /// registered by their first update.
    pub fn apply_pose(
        &mut self,
        writer: &str,
        update: &PoseUpdate,
    ) -> Result<PoseOutcome, CollabError> {
        validate_pose(update)?;
        if let Some(current) = self.objects.get(&update.object_id) {
            if update.seq <= current.seq {
                return Ok(PoseOutcome::Rejected(current.clone()));
            }
        }
        let state = CollabObjectState {
            object_id: update.object_id.clone(),
            position: update.position,
            orientation: update.orientation,
            seq: update.seq,
            owner: writer.to_owned(),
        };
        self.objects.insert(state.object_id.clone(), state.clone());
        Ok(PoseOutcome::Accepted(state))
    }

    pub fn add_stroke(
        &mut self,
        author: &str,
        add: &StrokeAddPayload,
    ) -> Result<Stroke, CollabError> {
        if add.points.len() < 2 {
            return Err(CollabError::InvalidStroke(format!(
                "{} point(s); a stroke needs at least 2",
                add.points.len()
            )));
        }
        if add.points.iter().flatten().any(|v| !v.is_finite()) {
            return Err(CollabError::InvalidStroke("non-finite point".into()));
        }
        let stroke_id = match &add.stroke_id {
            Some(id) if self.strokes.iter().any(|s| &s.stroke_id == id) => {
                return Err(CollabError::InvalidStroke(format!(
                    "stroke {id} already exists"
                )));
            }
            Some(id) => id.clone(),
            None => loop {
                self.next_stroke += 1;
                let id = format!("stroke-{}", self.next_stroke);
                if !self.strokes.iter().any(|s| s.stroke_id == id) {
                    break id;
                }
            },
        };
        let stroke = Stroke {
            stroke_id,
            author: author.to_owned(),
            color: add
                .color
                .clone()
                .unwrap_or_else(|| DEFAULT_STROKE_COLOR.to_owned()),
            points: add.points.clone(),
        };
        self.strokes.push(stroke.clone());
        Ok(stroke)
    }
}

/// Payload of `collab_joined`: everything a newcomer needs to catch up.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JoinSnapshot {
    pub room: String,
    pub session_id: String,
    pub participants: Vec<String>,
    pub objects: Vec<CollabObjectState>,
    pub strokes: Vec<Stroke>,
}

/// Payload of `pose_ack`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoseAck {
    pub accepted: bool,
    pub state: CollabObjectState,
}

/// A participant's local view. Local edits apply optimistically; server
/// frames then bring it back in line with the authoritative state.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CollabReplica {
    pub session_id: String,
    pub objects: BTreeMap<String, CollabObjectState>,
    pub strokes: Vec<Stroke>,
    #[serde(skip)]
    stroke_ids: BTreeSet<String>,
}

impl CollabReplica {
    pub fn new(session_id: impl Into<String>) -> Self {
        CollabReplica {
            session_id: session_id.into(),
            ..Default::default()
        }
    }

    /// Next update for `object_id`, applied locally right away.
    pub fn propose(
        &mut self,
        object_id: &str,
        position: [f64; 3],
        orientation: [f64; 4],
    ) -> PoseUpdate {
        let seq = self.objects.get(object_id).map_or(1, |s| s.seq + 1);
        self.propose_with_seq(object_id, position, orientation, seq)
    }

    pub fn propose_with_seq(
        &mut self,
        object_id: &str,
        position: [f64; 3],
        orientation: [f64; 4],
        seq: u64,
    ) -> PoseUpdate {
        let update = PoseUpdate {
            object_id: object_id.to_owned(),
            position,
            orientation,
            seq,
        };
        let newer = self.objects.get(object_id).is_none_or(|s| seq > s.seq);
        if newer {
            self.objects.insert(
                object_id.to_owned(),
                CollabObjectState {
                    object_id: object_id.to_owned(),
                    position,
                    orientation,
                    seq,
                    owner: self.session_id.clone(),
                },
            );
        }
        update
    }

    fn take(&mut self, state: CollabObjectState, force: bool) {
        let apply = force
            || self
                .objects
                .get(&state.object_id)
                .is_none_or(|s| state.seq >= s.seq);
        if apply {
            self.objects.insert(state.object_id.clone(), state);
        }
    }

    fn push_stroke(&mut self, stroke: Stroke) {
        if self.stroke_ids.insert(stroke.stroke_id.clone()) {
            self.strokes.push(stroke);
        }
    }

    /// Fold a server frame into the replica. Frames of other kinds are
    /// ignored. Returns whether the frame was a collaboration frame.
    pub fn apply(&mut self, frame: &ServerFrame) -> bool {
        let p = frame.payload.clone();
        match frame.kind.as_str() {
            kinds::COLLAB_JOINED => {
                if let Ok(snap) = serde_json::from_value::<JoinSnapshot>(p) {
                    self.session_id = snap.session_id;
                    self.objects = snap
                        .objects
                        .into_iter()
                        .map(|o| (o.object_id.clone(), o))
                        .collect();
                    self.strokes.clear();
                    self.stroke_ids.clear();
                    for s in snap.strokes {
                        self.push_stroke(s);
                    }
                }
            }
            kinds::POSE_EVENT => {
                if let Ok(state) = serde_json::from_value::<CollabObjectState>(p) {
                    self.take(state, false);
                }
            }
            kinds::POSE_ACK => {
                if let Ok(ack) = serde_json::from_value::<PoseAck>(p) {
                    self.take(ack.state, !ack.accepted);
                }
            }
            kinds::STROKE_EVENT | kinds::STROKE_ACK => {
                if let Ok(stroke) = serde_json::from_value::<Stroke>(p) {
                    self.push_stroke(stroke);
                }
            }
            _ => return false,
        }
        true
    }

    /// Canonical bytes of one object's state, for equality checks.
    pub fn object_bytes(&self, object_id: &str) -> Option<Vec<u8>> {
        self.objects
            .get(object_id)
            .map(|s| serde_json::to_vec(s).expect("state serializes"))
    }
}
