//! Card identification: detector boxes to shelf slots, then alarm colouring.
//!
//! The detector itself is pluggable. [`SyntheticDetector`] renders boxes from
//! a known shelf layout so the matching and overlay logic can be exercised
//! without a trained model.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::faultloc::{Alarm, LocalizationResult};
use crate::topology::ShelfArrangement;

/// Bounding box in normalized image coordinates (center, width, height).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
}

impl BBox {
    pub fn within_unit_square(&self) -> bool {
        const EPS: f64 = 1e-9;
        [self.cx, self.cy, self.w, self.h]
            .iter()
            .all(|v| v.is_finite())
            && self.w >= 0.0
            && self.h >= 0.0
            && self.cx - self.w / 2.0 >= -EPS
            && self.cx + self.w / 2.0 <= 1.0 + EPS
            && self.cy - self.h / 2.0 >= -EPS
            && self.cy + self.h / 2.0 <= 1.0 + EPS
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub label: String,
    pub bbox: BBox,
    pub confidence: f64,
}

impl Detection {
    pub fn new(label: impl Into<String>, bbox: BBox, confidence: f64) -> Result<Self, CardIdError> {
        if !bbox.within_unit_square() {
            return Err(CardIdError::InvalidDetection(format!(
                "bbox {bbox:?} leaves the unit square"
            )));
        }
        if !(0.0..=1.0).contains(&confidence) {
            return Err(CardIdError::InvalidDetection(format!(
                "confidence {confidence}"
            )));
        }
        Ok(Detection {
            label: label.into(),
            bbox,
            confidence,
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CardIdError {
    #[error("detector unavailable: {0}")]
    DetectorUnavailable(String),
    #[error("no detections above the confidence threshold")]
    NoDetections,
    #[error("shelf arrangement is empty")]
    EmptyArrangement,
    #[error("invalid detection: {0}")]
    InvalidDetection(String),
}

/// One shelf row in a synthetic frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticRow {
    pub arrangement: ShelfArrangement,
    /// Number of slot positions across the shelf; defaults to the highest
    /// occupied slot + 1.
    #[serde(default)]
    pub capacity: Option<u32>,
}

/// Ground-truth layout the synthetic detector renders. Rows are listed top to
/// bottom; `hidden` element ids are left out as if occluded.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SyntheticFrame {
    pub rows: Vec<SyntheticRow>,
    #[serde(default)]
    pub hidden: BTreeSet<String>,
}

/// Camera frame handed to a detector. Only the synthetic variant is
/// interpreted in this crate.
#[derive(Debug, Clone, PartialEq)]
pub enum Frame {
    Synthetic(SyntheticFrame),
    Image(Vec<u8>),
}

pub trait Detector: Send + Sync {
    fn name(&self) -> &str;
    fn detect(&self, frame: &Frame) -> Result<Vec<Detection>, CardIdError>;
}

/// Renders slot-centred boxes from a [`SyntheticFrame`], with Gaussian jitter
/// on the box centre and uniformly sampled confidences. Deterministic per
/// seed and safe to call concurrently.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticDetector {
    pub jitter_sigma: f64,
    pub seed: u64,
    pub confidence_min: f64,
    pub confidence_max: f64,
    /// Per-model confidence floors, e.g. `D5X500Q -> 0.85`.
    #[serde(default)]
    pub confidence_floors: BTreeMap<String, f64>,
}

impl Default for SyntheticDetector {
    fn default() -> Self {
        SyntheticDetector {
            jitter_sigma: 0.0,
            seed: 0,
            confidence_min: 0.6,
            confidence_max: 0.99,
            confidence_floors: BTreeMap::from([("D5X500Q".to_owned(), 0.85)]),
        }
    }
}

impl SyntheticDetector {
    pub fn with_jitter(jitter_sigma: f64, seed: u64) -> Self {
        SyntheticDetector {
            jitter_sigma,
            seed,
            ..Default::default()
        }
    }

    /// Slot-centred box for each card in the frame, top row first, left to
    /// right, with no jitter.
    pub fn ground_truth(frame: &SyntheticFrame) -> Vec<(String, String, BBox)> {
        let rows = frame.rows.len().max(1) as f64;
        let mut out = Vec::new();
        for (r, row) in frame.rows.iter().enumerate() {
            let capacity = row
                .capacity
                .unwrap_or_else(|| {
                    row.arrangement
                        .slots
                        .iter()
                        .map(|s| s.slot + 1)
                        .max()
                        .unwrap_or(1)
                })
                .max(1) as f64;
            let cy = (r as f64 + 0.5) / rows;
            for entry in &row.arrangement.slots {
                if frame.hidden.contains(&entry.element_id) {
                    continue;
                }
                let bbox = BBox {
                    cx: (f64::from(entry.slot) + 0.5) / capacity,
                    cy,
                    w: 0.9 / capacity,
                    h: 0.8 / rows,
                };
                out.push((entry.element_id.clone(), entry.model.clone(), bbox));
            }
        }
        out
    }
}

impl Detector for SyntheticDetector {
    fn name(&self) -> &str {
        "synthetic"
    }

    fn detect(&self, frame: &Frame) -> Result<Vec<Detection>, CardIdError> {
        let Frame::Synthetic(frame) = frame else {
            return Err(CardIdError::DetectorUnavailable(
                "the synthetic detector only reads synthetic frames".into(),
            ));
        };
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let jitter = Normal::new(0.0, self.jitter_sigma.max(0.0))
            .map_err(|e| CardIdError::DetectorUnavailable(e.to_string()))?;
        let mut out = Vec::new();
        for (_, model, mut bbox) in Self::ground_truth(frame) {
            if self.jitter_sigma > 0.0 {
                let half_w = bbox.w / 2.0;
                let half_h = bbox.h / 2.0;
                bbox.cx = (bbox.cx + jitter.sample(&mut rng)).clamp(half_w, 1.0 - half_w);
                bbox.cy = (bbox.cy + jitter.sample(&mut rng)).clamp(half_h, 1.0 - half_h);
            }
            let floor = self
                .confidence_floors
                .get(&model)
                .copied()
                .unwrap_or(self.confidence_min)
                .max(self.confidence_min);
            let hi = self.confidence_max.max(floor);
            let confidence = if hi > floor {
                rng.random_range(floor..=hi)
            } else {
                floor
            };
            out.push(Detection {
                label: model,
                bbox,
                confidence,
            });
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchConfig {
    pub confidence_threshold: f64,
}

impl Default for MatchConfig {
    fn default() -> Self {
        MatchConfig {
            confidence_threshold: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotMatch {
    pub detection: usize,
    pub slot: u32,
    pub element_id: String,
    pub label: String,
    pub confidence: f64,
    pub bbox: BBox,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotAssignment {
    /// Matched detections in slot order.
    pub matches: Vec<SlotMatch>,
    pub unmatched_detections: Vec<usize>,
    pub unmatched_slots: Vec<u32>,
    /// Detections dropped for low confidence.
    pub below_threshold: Vec<usize>,
}

impl SlotAssignment {
    pub fn slot_of(&self, detection: usize) -> Option<u32> {
        self.matches
            .iter()
            .find(|m| m.detection == detection)
            .map(|m| m.slot)
    }
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

/// Group detection indices into horizontal bands by box centre height. A band
/// spans half a median box height below its first (topmost) member.
fn bands(detections: &[Detection], eligible: &[usize]) -> Vec<Vec<usize>> {
    let mut heights: Vec<f64> = eligible.iter().map(|&i| detections[i].bbox.h).collect();
    let band_h = median(&mut heights);
    let mut order = eligible.to_vec();
    order.sort_by(|&a, &b| {
        detections[a]
            .bbox
            .cy
            .total_cmp(&detections[b].bbox.cy)
            .then(a.cmp(&b))
    });
    let mut out: Vec<Vec<usize>> = Vec::new();
    let mut anchor = f64::NEG_INFINITY;
    for i in order {
        let cy = detections[i].bbox.cy;
        if out.is_empty() || cy - anchor > band_h / 2.0 {
            anchor = cy;
            out.push(Vec::new());
        }
        out.last_mut().unwrap().push(i);
    }
    for band in &mut out {
        band.sort_by(|&a, &b| {
            detections[a]
                .bbox
                .cx
                .total_cmp(&detections[b].bbox.cx)
                .then(a.cmp(&b))
        });
    }
    out
}

/// Order-preserving alignment of two label sequences (longest common
/// subsequence). Returns matched index pairs; among equally long alignments
/// each detection takes the leftmost slot available.
fn align(dets: &[&str], slots: &[&str]) -> Vec<(usize, usize)> {
    let (n, m) = (dets.len(), slots.len());
    // suffix table: lcs[i][j] = LCS of dets[i..] and slots[j..]
    let mut lcs = vec![vec![0u32; m + 1]; n + 1];
    for i in (0..n).rev() {
        for j in (0..m).rev() {
            lcs[i][j] = if dets[i] == slots[j] {
                lcs[i + 1][j + 1] + 1
            } else {
                lcs[i + 1][j].max(lcs[i][j + 1])
            };
        }
    }
    let mut pairs = Vec::with_capacity(lcs[0][0] as usize);
    let (mut i, mut j) = (0, 0);
    while i < n && j < m {
        if dets[i] == slots[j] && lcs[i][j] == lcs[i + 1][j + 1] + 1 {
            pairs.push((i, j));
            i += 1;
            j += 1;
        } else if lcs[i][j + 1] == lcs[i][j] {
            j += 1;
        } else {
            i += 1;
        }
    }
    pairs
}

/// Map detections onto the slots of one shelf arrangement.
///
/// Confident detections are grouped into horizontal bands, each band sorted
/// left to right and aligned against the not-yet-matched slots by model
/// string, keeping left-to-right order. Identical models are therefore told
/// apart by x-order alone.
pub fn match_slots(
    detections: &[Detection],
    arrangement: &ShelfArrangement,
    config: &MatchConfig,
) -> Result<SlotAssignment, CardIdError> {
    if arrangement.is_empty() {
        return Err(CardIdError::EmptyArrangement);
    }
    let (eligible, below_threshold): (Vec<usize>, Vec<usize>) = (0..detections.len())
        .partition(|&i| detections[i].confidence >= config.confidence_threshold);
    if eligible.is_empty() {
        return Err(CardIdError::NoDetections);
    }

    let mut slot_taken = vec![false; arrangement.slots.len()];
    let mut matched: Vec<(usize, usize)> = Vec::new();
    let mut unmatched_detections = Vec::new();
    for band in bands(detections, &eligible) {
        let free: Vec<usize> = (0..arrangement.slots.len())
            .filter(|&s| !slot_taken[s])
            .collect();
        let labels: Vec<&str> = band.iter().map(|&d| detections[d].label.as_str()).collect();
        let models: Vec<&str> = free
            .iter()
            .map(|&s| arrangement.slots[s].model.as_str())
            .collect();
        let pairs = align(&labels, &models);
        let mut hit = vec![false; band.len()];
        for (bi, fi) in pairs {
            hit[bi] = true;
            slot_taken[free[fi]] = true;
            matched.push((band[bi], free[fi]));
        }
        unmatched_detections.extend(band.iter().zip(&hit).filter(|(_, h)| !**h).map(|(d, _)| *d));
    }
    matched.sort_by_key(|&(_, s)| s);
    unmatched_detections.sort_unstable();

    let matches = matched
        .into_iter()
        .map(|(d, s)| {
            let det = &detections[d];
            let entry = &arrangement.slots[s];
            SlotMatch {
                detection: d,
                slot: entry.slot,
                element_id: entry.element_id.clone(),
                label: det.label.clone(),
                confidence: det.confidence,
                bbox: det.bbox,
            }
        })
        .collect();
    let unmatched_slots = arrangement
        .slots
        .iter()
        .zip(&slot_taken)
        .filter(|(_, t)| !**t)
        .map(|(e, _)| e.slot)
        .collect();
    Ok(SlotAssignment {
        matches,
        unmatched_detections,
        unmatched_slots,
        below_threshold,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum OverlayColor {
    /// Root cause; the card to replace.
    Red,
    /// Alarmed, but not the root cause.
    Blue,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlaySpec {
    pub element_id: String,
    pub slot: u32,
    pub label: String,
    pub confidence: f64,
    pub bbox: BBox,
    pub color: OverlayColor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlayReport {
    pub overlays: Vec<OverlaySpec>,
    pub root_cause_visible: bool,
}

/// Colour each matched card. Output follows slot order.
pub fn overlay(
    assignment: &SlotAssignment,
    localization: Option<&LocalizationResult>,
    alarms: &[Alarm],
) -> OverlayReport {
    let alarmed: BTreeSet<&str> = alarms.iter().map(|a| a.element_id.as_str()).collect();
    let root = localization.map(|l| l.root_cause_id.as_str());
    let overlays: Vec<OverlaySpec> = assignment
        .matches
        .iter()
        .map(|m| {
            let color = if Some(m.element_id.as_str()) == root {
                OverlayColor::Red
            } else if alarmed.contains(m.element_id.as_str()) {
                OverlayColor::Blue
            } else {
                OverlayColor::None
            };
            OverlaySpec {
                element_id: m.element_id.clone(),
                slot: m.slot,
                label: m.label.clone(),
                confidence: m.confidence,
                bbox: m.bbox,
                color,
            }
        })
        .collect();
    let root_cause_visible = overlays.iter().any(|o| o.color == OverlayColor::Red);
    OverlayReport {
        overlays,
        root_cause_visible,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::faultloc::RankEntry;
    use crate::topology::SlotEntry;

    fn tn4_s2() -> ShelfArrangement {
        let mut slots = vec![SlotEntry {
            slot: 1,
            element_id: "ot".into(),
            model: "D5X500Q".into(),
        }];
        for s in 3..=6 {
            slots.push(SlotEntry {
                slot: s,
                element_id: format!("la{s}"),
                model: "ASWG".into(),
            });
        }
        ShelfArrangement {
            shelf_id: "S2".into(),
            slots,
        }
    }

    fn frame(arr: ShelfArrangement) -> Frame {
        Frame::Synthetic(SyntheticFrame {
            rows: vec![SyntheticRow {
                arrangement: arr,
                capacity: None,
            }],
            hidden: BTreeSet::new(),
        })
    }

    fn root_at(id: &str) -> LocalizationResult {
        LocalizationResult {
            root_cause_id: id.into(),
            ranking: vec![RankEntry {
                element_id: id.into(),
                score: 1.0,
            }],
            explained: BTreeMap::new(),
        }
    }

    #[test]
    fn synthetic_exact_boxes() {
        let dets = SyntheticDetector::default()
            .detect(&frame(tn4_s2()))
            .unwrap();
        assert_eq!(dets.len(), 5);
        // capacity 7: slot s centred at (s + 0.5) / 7
        for (d, slot) in dets.iter().zip([1u32, 3, 4, 5, 6]) {
            assert!((d.bbox.cx - (f64::from(slot) + 0.5) / 7.0).abs() < 1e-12);
            assert_eq!(d.bbox.cy, 0.5);
            assert!(d.bbox.within_unit_square());
        }
        assert!(dets[0].confidence >= 0.85);
    }

    #[test]
    fn empty_layout_detects_nothing() {
        let dets = SyntheticDetector::default()
            .detect(&Frame::Synthetic(SyntheticFrame::default()))
            .unwrap();
        assert!(dets.is_empty());
    }

    #[test]
    fn image_frames_need_a_real_detector() {
        assert!(matches!(
            SyntheticDetector::default().detect(&Frame::Image(vec![0xff])),
            Err(CardIdError::DetectorUnavailable(_))
        ));
    }

    #[test]
    fn rightmost_duplicate_gets_rightmost_slot() {
        let arr = tn4_s2();
        let dets = SyntheticDetector::default()
            .detect(&frame(arr.clone()))
            .unwrap();
        let a = match_slots(&dets, &arr, &MatchConfig::default()).unwrap();
        assert_eq!(a.matches.len(), 5);
        assert!(a.unmatched_detections.is_empty() && a.unmatched_slots.is_empty());
        let rightmost = (0..dets.len())
            .filter(|&i| dets[i].label == "ASWG")
            .max_by(|&a, &b| dets[a].bbox.cx.total_cmp(&dets[b].bbox.cx))
            .unwrap();
        assert_eq!(a.slot_of(rightmost), Some(6));
    }

    #[test]
    fn one_to_one() {
        let arr = ShelfArrangement {
            shelf_id: "S".into(),
            slots: vec![SlotEntry {
                slot: 0,
                element_id: "x".into(),
                model: "ASWG".into(),
            }],
        };
        let det = Detection::new(
            "ASWG",
            BBox {
                cx: 0.5,
                cy: 0.5,
                w: 0.2,
                h: 0.2,
            },
            0.9,
        )
        .unwrap();
        let a = match_slots(&[det], &arr, &MatchConfig::default()).unwrap();
        assert_eq!(a.matches.len(), 1);
        assert!(a.unmatched_detections.is_empty() && a.unmatched_slots.is_empty());
    }

    #[test]
    fn unknown_label_is_unmatched() {
        let arr = tn4_s2();
        let dets = vec![
            Detection::new(
                "ASWG",
                BBox {
                    cx: 0.3,
                    cy: 0.5,
                    w: 0.1,
                    h: 0.8,
                },
                0.9,
            )
            .unwrap(),
            Detection::new(
                "XYZ",
                BBox {
                    cx: 0.6,
                    cy: 0.5,
                    w: 0.1,
                    h: 0.8,
                },
                0.9,
            )
            .unwrap(),
        ];
        let a = match_slots(&dets, &arr, &MatchConfig::default()).unwrap();
        assert_eq!(a.unmatched_detections, vec![1]);
        assert_eq!(a.matches.len(), 1);
    }

    #[test]
    fn low_confidence_filtered() {
        let arr = tn4_s2();
        let dets = vec![Detection::new(
            "ASWG",
            BBox {
                cx: 0.3,
                cy: 0.5,
                w: 0.1,
                h: 0.8,
            },
            0.2,
        )
        .unwrap()];
        assert_eq!(
            match_slots(&dets, &arr, &MatchConfig::default()).unwrap_err(),
            CardIdError::NoDetections
        );
        assert_eq!(
            match_slots(&[], &arr, &MatchConfig::default()).unwrap_err(),
            CardIdError::NoDetections
        );
    }

    #[test]
    fn two_row_frame_bands() {
        let top = tn4_s2();
        let mut bottom = tn4_s2();
        bottom.shelf_id = "S1".into();
        for s in &mut bottom.slots {
            s.element_id = format!("b-{}", s.element_id);
        }
        // one arrangement holding both rows' cards in slot order
        let mut both = top.clone();
        both.slots = top
            .slots
            .iter()
            .cloned()
            .chain(bottom.slots.iter().cloned().map(|mut s| {
                s.slot += 10;
                s
            }))
            .collect();
        let mut shifted = bottom.clone();
        for s in &mut shifted.slots {
            s.slot += 10;
        }
        let f = Frame::Synthetic(SyntheticFrame {
            rows: vec![
                SyntheticRow {
                    arrangement: top,
                    capacity: Some(7),
                },
                SyntheticRow {
                    arrangement: shifted,
                    capacity: Some(17),
                },
            ],
            hidden: BTreeSet::new(),
        });
        let truth: Vec<String> = SyntheticDetector::ground_truth(match &f {
            Frame::Synthetic(s) => s,
            _ => unreachable!(),
        })
        .into_iter()
        .map(|t| t.0)
        .collect();
        let dets = SyntheticDetector::default().detect(&f).unwrap();
        let a = match_slots(&dets, &both, &MatchConfig::default()).unwrap();
        assert_eq!(a.matches.len(), 10);
        for m in &a.matches {
            assert_eq!(truth[m.detection], m.element_id);
        }
    }

    #[test]
    fn overlay_colors() {
        let arr = tn4_s2();
        let dets = SyntheticDetector::default()
            .detect(&frame(arr.clone()))
            .unwrap();
        let a = match_slots(&dets, &arr, &MatchConfig::default()).unwrap();
        let alarms = vec![
            Alarm::from_text("ot", "card failure", 0),
            Alarm::from_text("la6", "frame loss", 1),
        ];
        let report = overlay(&a, Some(&root_at("ot")), &alarms);
        let colors: Vec<OverlayColor> = report.overlays.iter().map(|o| o.color).collect();
        use OverlayColor::*;
        assert_eq!(colors, vec![Red, None, None, None, Blue]);
        assert!(report.root_cause_visible);

        let quiet = overlay(&a, Option::None, &[]);
        assert!(quiet.overlays.iter().all(|o| o.color == None));
        assert!(!quiet.root_cause_visible);
    }

    #[test]
    fn hidden_root_cause_is_flagged() {
        let arr = tn4_s2();
        let f = Frame::Synthetic(SyntheticFrame {
            rows: vec![SyntheticRow {
                arrangement: arr.clone(),
                capacity: None,
            }],
            hidden: BTreeSet::from(["ot".to_owned()]),
        });
        let dets = SyntheticDetector::default().detect(&f).unwrap();
        assert_eq!(dets.len(), 4);
        let a = match_slots(&dets, &arr, &MatchConfig::default()).unwrap();
        assert_eq!(a.unmatched_slots, vec![1]);
        let report = overlay(
            &a,
            Some(&root_at("ot")),
            &[Alarm::from_text("ot", "failure", 0)],
        );
        assert!(!report.root_cause_visible);
        assert!(report.overlays.iter().all(|o| o.color != OverlayColor::Red));
    }

    #[test]
    fn alignment_prefers_leftmost_slots() {
        assert_eq!(align(&["A", "A"], &["A", "A", "A"]), vec![(0, 0), (1, 1)]);
        assert_eq!(align(&["B", "A"], &["A", "B", "A"]), vec![(0, 1), (1, 2)]);
        assert!(align(&["C"], &["A"]).is_empty());
    }
}
