//! Card-level signal-flow graph of the optical transport network.
//!
//! Elements are individual cards (transponders, amplifiers, switches) plus
//! fiber spans. Directed edges follow signal flow, so a bidirectional link is
//! two edges. Wavelength paths are walks over those edges from a source
//! transponder to a destination transponder.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ElementKind {
    /// Optical transponder.
    #[serde(rename = "OT")]
    Ot,
    /// Line amplifier.
    #[serde(rename = "LA")]
    La,
    /// Wavelength selective switch.
    #[serde(rename = "WSS")]
    Wss,
    /// Array amplifier.
    #[serde(rename = "AA")]
    Aa,
    /// Multicast switch.
    #[serde(rename = "MCS")]
    Mcs,
    #[serde(rename = "FIBER_SPAN")]
    FiberSpan,
}

impl ElementKind {
    pub const ALL: [ElementKind; 6] = [
        ElementKind::Ot,
        ElementKind::La,
        ElementKind::Wss,
        ElementKind::Aa,
        ElementKind::Mcs,
        ElementKind::FiberSpan,
    ];

    /// Whether elements of this kind occupy a shelf slot.
    pub fn is_card(self) -> bool {
        self != ElementKind::FiberSpan
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ElementKind::Ot => "OT",
            ElementKind::La => "LA",
            ElementKind::Wss => "WSS",
            ElementKind::Aa => "AA",
            ElementKind::Mcs => "MCS",
            ElementKind::FiberSpan => "FIBER_SPAN",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Element {
    pub id: String,
    pub kind: ElementKind,
    pub model: String,
    pub node: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shelf: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slot: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WavelengthPath {
    pub id: String,
    pub route: Vec<String>,
    pub line_rate_gbps: f64,
}

/// One occupied slot of a shelf, in left-to-right order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotEntry {
    pub slot: u32,
    pub element_id: String,
    pub model: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShelfArrangement {
    pub shelf_id: String,
    pub slots: Vec<SlotEntry>,
}

impl ShelfArrangement {
    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TopologyError {
    #[error("duplicate element id `{0}`")]
    DuplicateId(String),
    #[error("edge ({from}, {to}) references unknown element `{missing}`")]
    DanglingEdge {
        from: String,
        to: String,
        missing: String,
    },
    #[error("self-loop on element `{0}`")]
    SelfLoop(String),
    #[error("path `{path}` is not a valid route: {reason}")]
    BrokenRoute { path: String, reason: String },
    #[error("fiber span `{0}` has no length")]
    MissingLength(String),
    #[error("length given for `{0}`, which is not a fiber span")]
    LengthForNonSpan(String),
    #[error("element `{id}` has an invalid shelf/slot placement: {reason}")]
    InvalidPlacement { id: String, reason: String },
    #[error("duplicate path id `{0}`")]
    DuplicatePath(String),
    #[error("unknown element `{0}`")]
    UnknownElement(String),
    #[error("unknown path `{0}`")]
    UnknownPath(String),
    #[error("element `{element}` is not on path `{path}`")]
    NotOnPath { element: String, path: String },
    #[error("unknown shelf `{0}`")]
    UnknownShelf(String),
}

/// Serializable form of a [`TopologyGraph`]; also the shape of the topology
/// part of a scenario file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TopologySpec {
    #[serde(default)]
    pub elements: Vec<Element>,
    #[serde(default)]
    pub edges: Vec<(String, String)>,
    #[serde(default)]
    pub paths: Vec<WavelengthPath>,
    #[serde(default)]
    pub fiber_lengths_km: BTreeMap<String, f64>,
}

/// Validated, immutable topology. Rebuild to mutate.
#[derive(Debug, Clone, PartialEq)]
pub struct TopologyGraph {
    elements: Vec<Element>,
    index: HashMap<String, usize>,
    edges: BTreeSet<(String, String)>,
    successors: Vec<Vec<usize>>,
    paths: Vec<WavelengthPath>,
    path_index: HashMap<String, usize>,
    fiber_lengths_km: BTreeMap<String, f64>,
    shelves: BTreeMap<String, ShelfArrangement>,
}

impl TopologyGraph {
    /// Validate inventory, edges, paths and span lengths into a graph.
    pub fn build(
        elements: Vec<Element>,
        edges: Vec<(String, String)>,
        paths: Vec<WavelengthPath>,
        fiber_lengths_km: BTreeMap<String, f64>,
    ) -> Result<Self, TopologyError> {
        let mut index = HashMap::with_capacity(elements.len());
        for (i, e) in elements.iter().enumerate() {
            if index.insert(e.id.clone(), i).is_some() {
                return Err(TopologyError::DuplicateId(e.id.clone()));
            }
            check_placement(e)?;
        }

        let mut edge_set = BTreeSet::new();
        let mut successors = vec![Vec::new(); elements.len()];
        for (from, to) in edges {
            let Some(&fi) = index.get(&from) else {
                return Err(TopologyError::DanglingEdge {
                    missing: from.clone(),
                    from,
                    to,
                });
            };
            let Some(&ti) = index.get(&to) else {
                return Err(TopologyError::DanglingEdge {
                    missing: to.clone(),
                    from,
                    to,
                });
            };
            if fi == ti {
                return Err(TopologyError::SelfLoop(from));
            }
            if edge_set.insert((from, to)) {
                successors[fi].push(ti);
            }
        }
        for succ in &mut successors {
            succ.sort_unstable();
        }

        let mut path_index = HashMap::with_capacity(paths.len());
        for (pi, path) in paths.iter().enumerate() {
            if path_index.insert(path.id.clone(), pi).is_some() {
                return Err(TopologyError::DuplicatePath(path.id.clone()));
            }
            check_route(path, &elements, &index, &edge_set)?;
        }

        for id in fiber_lengths_km.keys() {
            match index.get(id) {
                None => return Err(TopologyError::UnknownElement(id.clone())),
                Some(&i) if elements[i].kind != ElementKind::FiberSpan => {
                    return Err(TopologyError::LengthForNonSpan(id.clone()))
                }
                Some(_) => {}
            }
        }
        for (id, len) in &fiber_lengths_km {
            if !(len.is_finite() && *len >= 0.0) {
                return Err(TopologyError::InvalidPlacement {
                    id: id.clone(),
                    reason: format!("fiber length {len} km is not a non-negative number"),
                });
            }
        }
        for e in &elements {
            if e.kind == ElementKind::FiberSpan && !fiber_lengths_km.contains_key(&e.id) {
                return Err(TopologyError::MissingLength(e.id.clone()));
            }
        }

        let shelves = collect_shelves(&elements)?;

        Ok(TopologyGraph {
            elements,
            index,
            edges: edge_set,
            successors,
            paths,
            path_index,
            fiber_lengths_km,
            shelves,
        })
    }

    pub fn from_spec(spec: TopologySpec) -> Result<Self, TopologyError> {
        Self::build(spec.elements, spec.edges, spec.paths, spec.fiber_lengths_km)
    }

    pub fn to_spec(&self) -> TopologySpec {
        TopologySpec {
            elements: self.elements.clone(),
            edges: self.edges.iter().cloned().collect(),
            paths: self.paths.clone(),
            fiber_lengths_km: self.fiber_lengths_km.clone(),
        }
    }

    pub fn elements(&self) -> &[Element] {
        &self.elements
    }

    pub fn element(&self, id: &str) -> Option<&Element> {
        self.index.get(id).map(|&i| &self.elements[i])
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    pub fn edges(&self) -> impl Iterator<Item = (&str, &str)> {
        self.edges.iter().map(|(a, b)| (a.as_str(), b.as_str()))
    }

    pub fn has_edge(&self, from: &str, to: &str) -> bool {
        self.edges.contains(&(from.to_owned(), to.to_owned()))
    }

    /// Direct signal-flow successors of an element, sorted by insertion index.
    pub fn successors(&self, id: &str) -> Vec<&Element> {
        self.index
            .get(id)
            .map(|&i| {
                self.successors[i]
                    .iter()
                    .map(|&s| &self.elements[s])
                    .collect()
            })
            .unwrap_or_default()
    }

    pub fn paths(&self) -> &[WavelengthPath] {
        &self.paths
    }

    pub fn path(&self, id: &str) -> Option<&WavelengthPath> {
        self.path_index.get(id).map(|&i| &self.paths[i])
    }

    pub fn fiber_length_km(&self, id: &str) -> Option<f64> {
        self.fiber_lengths_km.get(id).copied()
    }

    pub fn fiber_lengths_km(&self) -> &BTreeMap<String, f64> {
        &self.fiber_lengths_km
    }

    /// Total fiber length traversed by a path.
    pub fn path_length_km(&self, path_id: &str) -> Result<f64, TopologyError> {
        let path = self
            .path(path_id)
            .ok_or_else(|| TopologyError::UnknownPath(path_id.to_owned()))?;
        Ok(path
            .route
            .iter()
            .filter_map(|id| self.fiber_lengths_km.get(id))
            .sum())
    }

    /// Route suffix strictly after `element_id` on `path_id`.
    pub fn downstream(&self, element_id: &str, path_id: &str) -> Result<&[String], TopologyError> {
        let path = self
            .path(path_id)
            .ok_or_else(|| TopologyError::UnknownPath(path_id.to_owned()))?;
        let pos = path
            .route
            .iter()
            .position(|id| id == element_id)
            .ok_or_else(|| TopologyError::NotOnPath {
                element: element_id.to_owned(),
                path: path_id.to_owned(),
            })?;
        Ok(&path.route[pos + 1..])
    }

    /// Paths whose route includes the element, in path order, with the
    /// element's position on each.
    pub fn paths_through<'a>(
        &'a self,
        element_id: &'a str,
    ) -> impl Iterator<Item = (&'a WavelengthPath, usize)> + 'a {
        self.paths.iter().filter_map(move |p| {
            p.route
                .iter()
                .position(|id| id == element_id)
                .map(|pos| (p, pos))
        })
    }

    pub fn shelf_ids(&self) -> impl Iterator<Item = &str> {
        self.shelves.keys().map(String::as_str)
    }

    /// Left-to-right card arrangement of a shelf, ordered by slot index.
    pub fn arrangement_for(&self, shelf_id: &str) -> Result<&ShelfArrangement, TopologyError> {
        self.shelves
            .get(shelf_id)
            .ok_or_else(|| TopologyError::UnknownShelf(shelf_id.to_owned()))
    }
}

fn check_placement(e: &Element) -> Result<(), TopologyError> {
    let bad = |reason: &str| {
        Err(TopologyError::InvalidPlacement {
            id: e.id.clone(),
            reason: reason.to_owned(),
        })
    };
    match (&e.shelf, e.slot) {
        (Some(_), None) => bad("shelf given without slot"),
        (None, Some(_)) => bad("slot given without shelf"),
        (Some(_), Some(_)) if e.kind == ElementKind::FiberSpan => {
            bad("fiber spans do not occupy a shelf slot")
        }
        _ => Ok(()),
    }
}

fn check_route(
    path: &WavelengthPath,
    elements: &[Element],
    index: &HashMap<String, usize>,
    edges: &BTreeSet<(String, String)>,
) -> Result<(), TopologyError> {
    let broken = |reason: String| {
        Err(TopologyError::BrokenRoute {
            path: path.id.clone(),
            reason,
        })
    };
    if path.route.is_empty() {
        return broken("route is empty".into());
    }
    let mut seen = BTreeSet::new();
    for id in &path.route {
        if !index.contains_key(id) {
            return broken(format!("unknown element `{id}`"));
        }
        if !seen.insert(id) {
            return broken(format!("element `{id}` visited twice"));
        }
    }
    let first = &elements[index[&path.route[0]]];
    let last = &elements[index[path.route.last().unwrap()]];
    if first.kind != ElementKind::Ot || last.kind != ElementKind::Ot {
        return broken("route must start and end at an OT".into());
    }
    for pair in path.route.windows(2) {
        if !edges.contains(&(pair[0].clone(), pair[1].clone())) {
            return broken(format!("no edge {} -> {}", pair[0], pair[1]));
        }
    }
    Ok(())
}

fn collect_shelves(
    elements: &[Element],
) -> Result<BTreeMap<String, ShelfArrangement>, TopologyError> {
    let mut shelves: BTreeMap<String, ShelfArrangement> = BTreeMap::new();
    for e in elements {
        if let (Some(shelf), Some(slot)) = (&e.shelf, e.slot) {
            shelves
                .entry(shelf.clone())
                .or_insert_with(|| ShelfArrangement {
                    shelf_id: shelf.clone(),
                    slots: Vec::new(),
                })
                .slots
                .push(SlotEntry {
                    slot,
                    element_id: e.id.clone(),
                    model: e.model.clone(),
                });
        }
    }
    for arr in shelves.values_mut() {
        arr.slots.sort_by_key(|s| s.slot);
        if let Some(w) = arr.slots.windows(2).find(|w| w[0].slot == w[1].slot) {
            return Err(TopologyError::InvalidPlacement {
                id: w[1].element_id.clone(),
                reason: format!(
                    "slot {} of shelf {} already taken by {}",
                    w[1].slot, arr.shelf_id, w[0].element_id
                ),
            });
        }
    }
    Ok(shelves)
}
