//! Alarm ingestion and root-cause localization.
//!
//! Two localizers share one ranking contract:
//!
//! * [`localize`] scores every alarmed element by how many alarmed elements it
//!   explains along the wavelength paths through it, weighted by its own
//!   severity.
//! * [`localize_mp`] runs a few rounds of fixed-weight message passing against
//!   the signal direction, so evidence from downstream alarms accumulates on
//!   upstream candidates.
//!
//! [`propagate_fault`] is the forward model: given a failed element it emits
//! the alarms a fault there would raise. Tests use it to generate scenarios
//! with a known answer.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::topology::{ElementKind, TopologyGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Severity {
    Warning,
    Minor,
    Major,
    Critical,
}

impl Severity {
    /// Severity rank normalized to (0, 1].
    pub fn normalized_rank(self) -> f64 {
        match self {
            Severity::Critical => 1.0,
            Severity::Major => 0.75,
            Severity::Minor => 0.5,
            Severity::Warning => 0.25,
        }
    }
}

// Highest severity first; the first table with a matching phrase wins.
const KEYWORDS: &[(Severity, &[&str])] = &[
    (Severity::Critical, &["failure", "loss of signal", "los"]),
    (Severity::Major, &["frame loss", "high ber"]),
    (Severity::Minor, &["degraded"]),
];

/// Keyword severity classifier. Matching is case-insensitive and on whole
/// words, so "los" does not fire inside "loss".
pub fn parse_severity(text: &str) -> Severity {
    let lower = text.to_lowercase();
    let words: Vec<&str> = lower
        .split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .collect();
    for (severity, phrases) in KEYWORDS {
        for phrase in *phrases {
            let needle: Vec<&str> = phrase.split(' ').collect();
            if words.windows(needle.len()).any(|w| w == needle.as_slice()) {
                return *severity;
            }
        }
    }
    Severity::Warning
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Alarm {
    pub element_id: String,
    #[serde(default)]
    pub text: String,
    pub severity: Severity,
    #[serde(default)]
    pub timestamp_ms: i64,
}

impl Alarm {
    /// Alarm whose severity is parsed from its text.
    pub fn from_text(
        element_id: impl Into<String>,
        text: impl Into<String>,
        timestamp_ms: i64,
    ) -> Self {
        let text = text.into();
        Alarm {
            element_id: element_id.into(),
            severity: parse_severity(&text),
            text,
            timestamp_ms,
        }
    }
}

/// Per-severity multipliers applied to a candidate's coverage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeverityWeights {
    pub critical: f64,
    pub major: f64,
    pub minor: f64,
    pub warning: f64,
}

impl Default for SeverityWeights {
    fn default() -> Self {
        SeverityWeights {
            critical: 1.0,
            major: 0.75,
            minor: 0.5,
            warning: 0.25,
        }
    }
}

impl SeverityWeights {
    pub fn weight(&self, severity: Severity) -> f64 {
        match severity {
            Severity::Critical => self.critical,
            Severity::Major => self.major,
            Severity::Minor => self.minor,
            Severity::Warning => self.warning,
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        SeverityWeights {
            critical: self.critical * factor,
            major: self.major * factor,
            minor: self.minor * factor,
            warning: self.warning * factor,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankEntry {
    pub element_id: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalizationResult {
    pub root_cause_id: String,
    pub ranking: Vec<RankEntry>,
    /// Alarmed element id -> the highest-ranked candidate that explains it.
    pub explained: BTreeMap<String, String>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LocalizeError {
    #[error("no alarms to localize")]
    EmptyAlarms,
    #[error("alarm references unknown element `{0}`")]
    UnknownElement(String),
    #[error("element `{0}` is not on any wavelength path")]
    NotOnAnyPath(String),
    #[error("message passing needs at least one iteration")]
    ZeroIterations,
}

/// Alarms a fault at `fault_id` raises: CRITICAL at the fault (unless it is a
/// fiber span, which has no card to alarm) and MAJOR at each distinct card
/// strictly downstream of it on every path through it. Output order is path
/// order, then route order; timestamps count up from zero in that order.
pub fn propagate_fault(graph: &TopologyGraph, fault_id: &str) -> Result<Vec<Alarm>, LocalizeError> {
    let fault = graph
        .element(fault_id)
        .ok_or_else(|| LocalizeError::UnknownElement(fault_id.to_owned()))?;
    let mut through = graph.paths_through(fault_id).peekable();
    if through.peek().is_none() {
        return Err(LocalizeError::NotOnAnyPath(fault_id.to_owned()));
    }

    let mut alarms = Vec::new();
    let mut emitted = BTreeSet::new();
    if fault.kind.is_card() {
        alarms.push(Alarm::from_text(
            fault_id,
            "Loss of signal - card failure",
            0,
        ));
        emitted.insert(fault_id.to_owned());
    }
    for (path, pos) in through {
        for id in &path.route[pos + 1..] {
            let el = graph.element(id).expect("route ids resolve");
            if el.kind == ElementKind::FiberSpan || !emitted.insert(id.clone()) {
                continue;
            }
            let ts = alarms.len() as i64;
            alarms.push(Alarm::from_text(
                id.clone(),
                format!("Frame loss on {}", path.id),
                ts,
            ));
        }
    }
    Ok(alarms)
}

/// Coverage localizer with the default severity weights.
pub fn localize(
    graph: &TopologyGraph,
    alarms: &[Alarm],
) -> Result<LocalizationResult, LocalizeError> {
    localize_weighted(graph, alarms, &SeverityWeights::default())
}

/// Coverage localizer: for each alarmed element, the fraction of alarmed
/// elements found in itself plus its downstream on every path through it,
/// times the weight of its own (highest) severity.
pub fn localize_weighted(
    graph: &TopologyGraph,
    alarms: &[Alarm],
    weights: &SeverityWeights,
) -> Result<LocalizationResult, LocalizeError> {
    let alarmed = alarmed_elements(graph, alarms)?;
    let total = alarmed.len() as f64;
    let candidates: Vec<Candidate> = alarmed
        .iter()
        .map(|(id, severity)| {
            let covered = coverage_set(graph, id);
            let hits = covered.iter().filter(|c| alarmed.contains_key(*c)).count();
            Candidate {
                id: id.clone(),
                score: hits as f64 / total * weights.weight(*severity),
                position: path_position(graph, id),
                covered,
            }
        })
        .collect();
    Ok(finish(candidates, &alarmed))
}

/// Fixed-weight message passing over the reversed signal flow.
///
/// Each element starts at the normalized rank of its highest alarm (0 when
/// silent). Every round, `state'(e) = 0.6 * state(e) + 0.4 * max(state(n))`
/// over the downstream neighbours `n` of `e`. Fiber spans never alarm, so they
/// are treated as transparent: a card's neighbours are the nearest cards
/// reachable through any run of spans. Candidates are the alarmed elements,
/// ranked by final state.
pub fn localize_mp(
    graph: &TopologyGraph,
    alarms: &[Alarm],
    iterations: usize,
) -> Result<LocalizationResult, LocalizeError> {
    let states = message_passing_states(graph, alarms, iterations)?;
    let alarmed = alarmed_elements(graph, alarms)?;
    let candidates = alarmed
        .keys()
        .map(|id| Candidate {
            id: id.clone(),
            score: states[id],
            position: path_position(graph, id),
            covered: coverage_set(graph, id),
        })
        .collect();
    Ok(finish(candidates, &alarmed))
}

pub const MP_SELF_WEIGHT: f64 = 0.6;
pub const MP_NEIGHBOR_WEIGHT: f64 = 0.4;

/// Final per-element message-passing state after `iterations` rounds.
pub fn message_passing_states(
    graph: &TopologyGraph,
    alarms: &[Alarm],
    iterations: usize,
) -> Result<BTreeMap<String, f64>, LocalizeError> {
    if iterations == 0 {
        return Err(LocalizeError::ZeroIterations);
    }
    let alarmed = alarmed_elements(graph, alarms)?;
    let elements = graph.elements();
    let slot: HashMap<&str, usize> = elements
        .iter()
        .enumerate()
        .map(|(i, e)| (e.id.as_str(), i))
        .collect();
    let neighbours: Vec<Vec<usize>> = elements
        .iter()
        .map(|e| {
            card_successors(graph, &e.id)
                .into_iter()
                .map(|id| slot[id.as_str()])
                .collect()
        })
        .collect();

    let mut state: Vec<f64> = elements
        .iter()
        .map(|e| alarmed.get(&e.id).map_or(0.0, |s| s.normalized_rank()))
        .collect();
    let mut next = vec![0.0; state.len()];
    for _ in 0..iterations {
        for (i, out) in next.iter_mut().enumerate() {
            let incoming = neighbours[i]
                .iter()
                .map(|&n| state[n])
                .fold(0.0_f64, f64::max);
            *out = MP_SELF_WEIGHT * state[i] + MP_NEIGHBOR_WEIGHT * incoming;
        }
        std::mem::swap(&mut state, &mut next);
    }
    Ok(elements
        .iter()
        .zip(state)
        .map(|(e, s)| (e.id.clone(), s))
        .collect())
}

struct Candidate {
    id: String,
    score: f64,
    position: usize,
    covered: BTreeSet<String>,
}

fn alarmed_elements(
    graph: &TopologyGraph,
    alarms: &[Alarm],
) -> Result<BTreeMap<String, Severity>, LocalizeError> {
    if alarms.is_empty() {
        return Err(LocalizeError::EmptyAlarms);
    }
    let mut alarmed: BTreeMap<String, Severity> = BTreeMap::new();
    for alarm in alarms {
        if !graph.contains(&alarm.element_id) {
            return Err(LocalizeError::UnknownElement(alarm.element_id.clone()));
        }
        alarmed
            .entry(alarm.element_id.clone())
            .and_modify(|s| *s = (*s).max(alarm.severity))
            .or_insert(alarm.severity);
    }
    Ok(alarmed)
}

/// The element itself plus everything strictly downstream of it on any path.
fn coverage_set(graph: &TopologyGraph, id: &str) -> BTreeSet<String> {
    let mut covered = BTreeSet::from([id.to_owned()]);
    for (path, pos) in graph.paths_through(id) {
        covered.extend(path.route[pos + 1..].iter().cloned());
    }
    covered
}

/// Earliest route position of the element over all paths; off-path elements
/// sort last.
fn path_position(graph: &TopologyGraph, id: &str) -> usize {
    graph
        .paths_through(id)
        .map(|(_, pos)| pos)
        .min()
        .unwrap_or(usize::MAX)
}

/// Downstream cards, looking through any chain of fiber spans.
fn card_successors(graph: &TopologyGraph, id: &str) -> BTreeSet<String> {
    let mut found = BTreeSet::new();
    let mut visited = BTreeSet::from([id.to_owned()]);
    let mut stack: Vec<String> = graph.successors(id).iter().map(|e| e.id.clone()).collect();
    while let Some(next) = stack.pop() {
        if !visited.insert(next.clone()) {
            continue;
        }
        let el = graph.element(&next).expect("edge endpoints resolve");
        if el.kind == ElementKind::FiberSpan {
            stack.extend(graph.successors(&next).iter().map(|e| e.id.clone()));
        } else {
            found.insert(next);
        }
    }
    found
}

fn rank_order(a: &Candidate, b: &Candidate) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then(a.position.cmp(&b.position))
        .then_with(|| a.id.cmp(&b.id))
}

fn finish(
    mut candidates: Vec<Candidate>,
    alarmed: &BTreeMap<String, Severity>,
) -> LocalizationResult {
    candidates.sort_by(rank_order);
    let explained = alarmed
        .keys()
        .map(|id| {
            let by = candidates
                .iter()
                .find(|c| c.covered.contains(id))
                .map(|c| c.id.clone())
                .expect("every alarmed element covers itself");
            (id.clone(), by)
        })
        .collect();
    LocalizationResult {
        root_cause_id: candidates[0].id.clone(),
        ranking: candidates
            .into_iter()
            .map(|c| RankEntry {
                element_id: c.id,
                score: c.score,
            })
            .collect(),
        explained,
    }
}
