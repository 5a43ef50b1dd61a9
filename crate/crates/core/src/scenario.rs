//! Scenario files: one JSON document bundling topology, alarms, shelves,
//! named points, a voxel map reference and per-module defaults.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cardid::{
    match_slots, overlay, CardIdError, Detection, Detector, Frame, MatchConfig, OverlayReport,
    SlotAssignment, SyntheticDetector, SyntheticFrame, SyntheticRow,
};
use crate::faultloc::{parse_severity, Alarm, LocalizationResult, Severity};
use crate::navmap::{
    plan, Cell, FlagHeights, Grid2D, NavError, NavOptions, NavPath, OccupancyGrid3D,
};
use crate::netqos::{FlowSpec, LinkSpec, MeterSpec, SimConfig, TrafficClass, WifiSpec};
use crate::topology::{
    Element, ShelfArrangement, TopologyError, TopologyGraph, TopologySpec, WavelengthPath,
};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("invalid topology: {0}")]
    Topology(#[from] TopologyError),
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl ScenarioError {
    pub fn is_io(&self) -> bool {
        matches!(self, ScenarioError::Io { .. })
    }
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, ScenarioError> {
    Err(ScenarioError::Invalid(msg.into()))
}

/// Physical shelf: which rack point it sits at and whether it is the lower
/// (0) or upper (1) shelf of that rack.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShelfSpec {
    pub id: String,
    pub node: String,
    #[serde(default)]
    pub model: String,
    #[serde(default)]
    pub point: Option<String>,
    #[serde(default)]
    pub level: u8,
}

/// Alarm as written in a scenario. A missing severity is parsed from the text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlarmSpec {
    pub element_id: String,
    #[serde(default)]
    pub text: String,
    #[serde(default)]
    pub severity: Option<Severity>,
    #[serde(default)]
    pub timestamp_ms: i64,
}

impl AlarmSpec {
    /// Resolve the severity. An explicit severity must agree with any keyword
    /// found in the text.
    pub fn to_alarm(&self) -> Result<Alarm, String> {
        let parsed = parse_severity(&self.text);
        let severity = match self.severity {
            None => parsed,
            Some(s) if parsed == Severity::Warning || parsed == s => s,
            Some(s) => {
                return Err(format!(
                    "alarm on {}: severity {s:?} contradicts text {:?} ({parsed:?})",
                    self.element_id, self.text
                ))
            }
        };
        Ok(Alarm {
            element_id: self.element_id.clone(),
            text: self.text.clone(),
            severity,
            timestamp_ms: self.timestamp_ms,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NavSettings {
    /// Height band (m) projected onto the 2D grid.
    pub slab_m: [f64; 2],
    pub arrow_spacing_m: f64,
    pub flag_heights: FlagHeights,
}

impl Default for NavSettings {
    fn default() -> Self {
        let opts = NavOptions::default();
        NavSettings {
            slab_m: [0.1, 1.8],
            arrow_spacing_m: opts.arrow_spacing_m,
            flag_heights: opts.flag_heights,
        }
    }
}

impl NavSettings {
    pub fn options(&self) -> NavOptions {
        NavOptions {
            arrow_spacing_m: self.arrow_spacing_m,
            flag_heights: self.flag_heights,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QosDefaults {
    pub link: LinkSpec,
    pub meter: MeterSpec,
    pub wifi: WifiSpec,
    pub ar_gbps: f64,
    pub cbr_gbps: f64,
    pub packet_bytes: u32,
    pub duration_s: f64,
    /// Path whose fiber length sets the link length, if given.
    pub path: Option<String>,
}

impl Default for QosDefaults {
    fn default() -> Self {
        QosDefaults {
            link: LinkSpec::default(),
            meter: MeterSpec::default(),
            wifi: WifiSpec::default(),
            ar_gbps: 0.33,
            cbr_gbps: 100.0,
            packet_bytes: 1500,
            duration_s: 10.0,
            path: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayoutRow {
    pub shelf: String,
    #[serde(default)]
    pub capacity: Option<u32>,
}

/// A synthetic camera view of one or more shelves, listed top to bottom.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayoutSpec {
    pub rows: Vec<LayoutRow>,
    #[serde(default)]
    pub hidden: BTreeSet<String>,
    #[serde(default)]
    pub jitter_sigma: f64,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub schema_version: u32,
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub elements: Vec<Element>,
    #[serde(default)]
    pub edges: Vec<(String, String)>,
    #[serde(default)]
    pub paths: Vec<WavelengthPath>,
    #[serde(default)]
    pub fiber_lengths_km: BTreeMap<String, f64>,
    #[serde(default)]
    pub shelves: Vec<ShelfSpec>,
    #[serde(default)]
    pub alarms: Vec<AlarmSpec>,
    #[serde(default)]
    pub envmap_ref: Option<String>,
    #[serde(default)]
    pub points: BTreeMap<String, [f64; 2]>,
    #[serde(default)]
    pub nav: NavSettings,
    #[serde(default)]
    pub qos: QosDefaults,
    #[serde(default)]
    pub layouts: BTreeMap<String, LayoutSpec>,
}

#[derive(Debug, Error, PartialEq)]
pub enum RouteError {
    #[error("unknown point {0}")]
    UnknownPoint(String),
    #[error("unknown shelf {0}")]
    UnknownShelf(String),
    #[error("shelf {0} has no rack point")]
    ShelfWithoutPoint(String),
    #[error("scenario has no environment map")]
    NoEnvMap,
    #[error(transparent)]
    Nav(#[from] NavError),
}

#[derive(Debug, Error, PartialEq)]
pub enum CardIdRunError {
    #[error("unknown layout {0}")]
    UnknownLayout(String),
    #[error(transparent)]
    CardId(#[from] CardIdError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CardIdOutcome {
    pub detections: Vec<Detection>,
    pub assignment: SlotAssignment,
    pub report: OverlayReport,
}

/// A validated scenario with its topology built and map loaded.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub file: ScenarioFile,
    pub graph: TopologyGraph,
    pub alarms: Vec<Alarm>,
    pub envmap: Option<OccupancyGrid3D>,
    grid: Option<Grid2D>,
}

impl Scenario {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ScenarioError> {
        let path = path.as_ref();
        let text = read(path)?;
        Self::from_json_str(&text, path.parent())
    }

    /// Parse a scenario document; `envmap_ref` resolves against `base_dir`.
    pub fn from_json_str(text: &str, base_dir: Option<&Path>) -> Result<Self, ScenarioError> {
        let file: ScenarioFile =
            serde_json::from_str(text).map_err(|e| ScenarioError::Invalid(e.to_string()))?;
        let envmap = match &file.envmap_ref {
            None => None,
            Some(r) => {
                let p = base_dir.map_or_else(|| PathBuf::from(r), |b| b.join(r));
                let text = read(&p)?;
                let map: OccupancyGrid3D = serde_json::from_str(&text)
                    .map_err(|e| ScenarioError::Invalid(format!("{}: {e}", p.display())))?;
                Some(map)
            }
        };
        Self::from_parts(file, envmap)
    }

    pub fn from_parts(
        file: ScenarioFile,
        envmap: Option<OccupancyGrid3D>,
    ) -> Result<Self, ScenarioError> {
        if file.schema_version != SCHEMA_VERSION {
            return invalid(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                file.schema_version
            ));
        }
        let graph = TopologyGraph::build(
            file.elements.clone(),
            file.edges.clone(),
            file.paths.clone(),
            file.fiber_lengths_km.clone(),
        )?;

        let mut alarms = Vec::with_capacity(file.alarms.len());
        for a in &file.alarms {
            if !graph.contains(&a.element_id) {
                return invalid(format!("alarm references unknown element {}", a.element_id));
            }
            alarms.push(a.to_alarm().map_err(ScenarioError::Invalid)?);
        }

        let mut shelves = BTreeMap::new();
        for s in &file.shelves {
            if shelves.insert(s.id.as_str(), s).is_some() {
                return invalid(format!("duplicate shelf {}", s.id));
            }
            if s.level > 1 {
                return invalid(format!(
                    "shelf {} level {} (racks have levels 0 and 1)",
                    s.id, s.level
                ));
            }
            if let Some(p) = &s.point {
                if !file.points.contains_key(p) {
                    return invalid(format!("shelf {} refers to unknown point {p}", s.id));
                }
            }
        }
        for e in graph.elements() {
            if let Some(shelf) = &e.shelf {
                match shelves.get(shelf.as_str()) {
                    None => {
                        return invalid(format!(
                            "element {} sits on undeclared shelf {shelf}",
                            e.id
                        ))
                    }
                    Some(s) if s.node != e.node => {
                        return invalid(format!(
                            "element {} is on node {} but shelf {shelf} is on {}",
                            e.id, e.node, s.node
                        ))
                    }
                    _ => {}
                }
            }
        }

        for (name, layout) in &file.layouts {
            if layout.rows.is_empty() {
                return invalid(format!("layout {name} has no rows"));
            }
            if !(layout.jitter_sigma >= 0.0 && layout.jitter_sigma.is_finite()) {
                return invalid(format!("layout {name} jitter must be non-negative"));
            }
            for row in &layout.rows {
                if !shelves.contains_key(row.shelf.as_str()) {
                    return invalid(format!(
                        "layout {name} refers to unknown shelf {}",
                        row.shelf
                    ));
                }
            }
            if let Some(h) = layout.hidden.iter().find(|h| !graph.contains(h)) {
                return invalid(format!("layout {name} hides unknown element {h}"));
            }
        }

        let [z0, z1] = file.nav.slab_m;
        if z0.partial_cmp(&z1) != Some(std::cmp::Ordering::Less)
            || file.nav.arrow_spacing_m.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater)
        {
            return invalid(
                "nav slab must satisfy z_min < z_max and arrow spacing must be positive",
            );
        }
        if let Some(p) = &file.qos.path {
            if graph.path(p).is_none() {
                return invalid(format!("qos refers to unknown path {p}"));
            }
        }

        let grid = match &envmap {
            None => {
                if !file.points.is_empty() && file.envmap_ref.is_some() {
                    return invalid("points given without a map");
                }
                None
            }
            Some(map) => {
                let grid = map
                    .project_2d(z0, z1)
                    .map_err(|e| ScenarioError::Invalid(format!("environment map: {e}")))?;
                for (name, pos) in &file.points {
                    if let Err(e) = grid.cell_of(*pos) {
                        return invalid(format!("point {name} at {pos:?}: {e}"));
                    }
                }
                Some(grid)
            }
        };

        Ok(Scenario {
            file,
            graph,
            alarms,
            envmap,
            grid,
        })
    }

    /// The 2D navigation grid projected from the map over the nav slab.
    pub fn grid(&self) -> Option<&Grid2D> {
        self.grid.as_ref()
    }

    pub fn shelf(&self, id: &str) -> Option<&ShelfSpec> {
        self.file.shelves.iter().find(|s| s.id == id)
    }

    /// Shelf holding an element, if the element is a placed card.
    pub fn shelf_of(&self, element_id: &str) -> Option<&ShelfSpec> {
        let shelf = self.graph.element(element_id)?.shelf.as_deref()?;
        self.shelf(shelf)
    }

    pub fn point_cell(&self, name: &str) -> Result<Cell, RouteError> {
        let grid = self.grid.as_ref().ok_or(RouteError::NoEnvMap)?;
        let pos = self
            .file
            .points
            .get(name)
            .ok_or_else(|| RouteError::UnknownPoint(name.to_owned()))?;
        Ok(grid.cell_of(*pos)?)
    }

    pub fn navigate(&self, from: &str, to: &str, shelf_level: u8) -> Result<NavPath, RouteError> {
        let grid = self.grid.as_ref().ok_or(RouteError::NoEnvMap)?;
        let start = self.point_cell(from)?;
        let goal = self.point_cell(to)?;
        Ok(plan(
            grid,
            start,
            goal,
            shelf_level,
            &self.file.nav.options(),
        )?)
    }

    /// Route to the rack holding `shelf_id`, with the flag at that shelf's level.
    pub fn navigate_to_shelf(&self, from: &str, shelf_id: &str) -> Result<NavPath, RouteError> {
        let shelf = self
            .shelf(shelf_id)
            .ok_or_else(|| RouteError::UnknownShelf(shelf_id.to_owned()))?;
        let point = shelf
            .point
            .as_deref()
            .ok_or_else(|| RouteError::ShelfWithoutPoint(shelf_id.to_owned()))?;
        self.navigate(from, point, shelf.level)
    }

    pub fn arrangement(&self, shelf_id: &str) -> Result<&ShelfArrangement, TopologyError> {
        self.graph.arrangement_for(shelf_id)
    }

    pub fn synthetic_frame(&self, layout: &str) -> Result<SyntheticFrame, CardIdRunError> {
        let spec = self
            .file
            .layouts
            .get(layout)
            .ok_or_else(|| CardIdRunError::UnknownLayout(layout.to_owned()))?;
        let rows = spec
            .rows
            .iter()
            .map(|r| SyntheticRow {
                arrangement: self.arrangement_or_empty(&r.shelf),
                capacity: r.capacity,
            })
            .collect();
        Ok(SyntheticFrame {
            rows,
            hidden: spec.hidden.clone(),
        })
    }

    fn arrangement_or_empty(&self, shelf_id: &str) -> ShelfArrangement {
        self.graph
            .arrangement_for(shelf_id)
            .cloned()
            .unwrap_or_else(|_| ShelfArrangement {
                shelf_id: shelf_id.to_owned(),
                slots: Vec::new(),
            })
    }

    /// Arrangement covering every row of a layout, top row first.
    pub fn layout_arrangement(&self, layout: &str) -> Result<ShelfArrangement, CardIdRunError> {
        let spec = self
            .file
            .layouts
            .get(layout)
            .ok_or_else(|| CardIdRunError::UnknownLayout(layout.to_owned()))?;
        let mut slots = Vec::new();
        for r in &spec.rows {
            slots.extend(self.arrangement_or_empty(&r.shelf).slots);
        }
        let shelf_id = spec
            .rows
            .iter()
            .map(|r| r.shelf.as_str())
            .collect::<Vec<_>>()
            .join("+");
        Ok(ShelfArrangement { shelf_id, slots })
    }

    pub fn layout_detector(
        &self,
        layout: &str,
        seed_override: Option<u64>,
    ) -> Result<SyntheticDetector, CardIdRunError> {
        let spec = self
            .file
            .layouts
            .get(layout)
            .ok_or_else(|| CardIdRunError::UnknownLayout(layout.to_owned()))?;
        Ok(SyntheticDetector::with_jitter(
            spec.jitter_sigma,
            seed_override.unwrap_or(spec.seed),
        ))
    }

    /// Detect, match and colour the cards of a synthetic layout.
    pub fn card_id(
        &self,
        layout: &str,
        localization: Option<&LocalizationResult>,
        seed_override: Option<u64>,
        config: &MatchConfig,
    ) -> Result<CardIdOutcome, CardIdRunError> {
        let frame = Frame::Synthetic(self.synthetic_frame(layout)?);
        let detector = self.layout_detector(layout, seed_override)?;
        let detections = detector.detect(&frame)?;
        let arrangement = self.layout_arrangement(layout)?;
        let assignment = match_slots(&detections, &arrangement, config)?;
        let report = overlay(&assignment, localization, &self.alarms);
        Ok(CardIdOutcome {
            detections,
            assignment,
            report,
        })
    }

    /// AR-versus-CBR simulation config from the scenario's QoS defaults.
    pub fn qos_config(&self) -> SimConfig {
        let q = &self.file.qos;
        let mut link = q.link;
        if let Some(p) = &q.path {
            if let Ok(km) = self.graph.path_length_km(p) {
                link.length_km = km;
            }
        }
        let flow = |id: &str, class, gbps| FlowSpec {
            packet_bytes: q.packet_bytes,
            ..FlowSpec::new(id, class, gbps)
        };
        SimConfig {
            link,
            flows: vec![
                flow("ar", TrafficClass::Ar, q.ar_gbps),
                flow("cbr", TrafficClass::Cbr, q.cbr_gbps),
            ],
            meter: q.meter,
            wifi: q.wifi,
            duration_s: q.duration_s,
            seed: 1,
        }
    }

    pub fn topology_spec(&self) -> TopologySpec {
        self.graph.to_spec()
    }
}

fn read(path: &Path) -> Result<String, ScenarioError> {
    std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.to_owned(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::ElementKind;

    fn el(
        id: &str,
        kind: ElementKind,
        node: &str,
        shelf: Option<&str>,
        slot: Option<u32>,
    ) -> Element {
        Element {
            id: id.into(),
            kind,
            model: if kind == ElementKind::Ot {
                "D5X500Q".into()
            } else {
                "X".into()
            },
            node: node.into(),
            shelf: shelf.map(Into::into),
            slot,
        }
    }

    fn small() -> ScenarioFile {
        ScenarioFile {
            schema_version: 1,
            name: "small".into(),
            elements: vec![
                el("a", ElementKind::Ot, "N1", Some("N1/S1"), Some(1)),
                el("s", ElementKind::FiberSpan, "N1", None, None),
                el("b", ElementKind::Ot, "N2", None, None),
            ],
            edges: vec![("a".into(), "s".into()), ("s".into(), "b".into())],
            paths: vec![WavelengthPath {
                id: "WL".into(),
                route: vec!["a".into(), "s".into(), "b".into()],
                line_rate_gbps: 200.0,
            }],
            fiber_lengths_km: BTreeMap::from([("s".into(), 86.0)]),
            shelves: vec![ShelfSpec {
                id: "N1/S1".into(),
                node: "N1".into(),
                model: String::new(),
                point: None,
                level: 0,
            }],
            alarms: vec![AlarmSpec {
                element_id: "a".into(),
                text: "Loss of signal".into(),
                severity: None,
                timestamp_ms: 0,
            }],
            envmap_ref: None,
            points: BTreeMap::new(),
            nav: NavSettings::default(),
            qos: QosDefaults {
                path: Some("WL".into()),
                ..QosDefaults::default()
            },
            layouts: BTreeMap::new(),
        }
    }

    #[test]
    fn builds_and_parses_severity() {
        let s = Scenario::from_parts(small(), None).unwrap();
        assert_eq!(s.alarms[0].severity, Severity::Critical);
        assert_eq!(s.qos_config().link.length_km, 86.0);
    }

    #[test]
    fn json_round_trip() {
        let text = serde_json::to_string(&small()).unwrap();
        let s = Scenario::from_json_str(&text, None).unwrap();
        assert_eq!(s.file, small());
    }

    #[test]
    fn rejects_wrong_version() {
        let mut f = small();
        f.schema_version = 2;
        assert!(matches!(
            Scenario::from_parts(f, None),
            Err(ScenarioError::Invalid(_))
        ));
    }

    #[test]
    fn rejects_unknown_key() {
        let mut v = serde_json::to_value(small()).unwrap();
        v["bogus"] = serde_json::json!(1);
        assert!(Scenario::from_json_str(&v.to_string(), None).is_err());
    }

    #[test]
    fn rejects_alarm_on_unknown_element() {
        let mut f = small();
        f.alarms[0].element_id = "zz".into();
        assert!(Scenario::from_parts(f, None).is_err());
    }

    #[test]
    fn rejects_contradicting_severity() {
        let mut f = small();
        f.alarms[0].severity = Some(Severity::Minor);
        assert!(Scenario::from_parts(f, None).is_err());
        let mut f = small();
        f.alarms[0].text = "check card".into();
        f.alarms[0].severity = Some(Severity::Minor);
        let s = Scenario::from_parts(f, None).unwrap();
        assert_eq!(s.alarms[0].severity, Severity::Minor);
    }

    #[test]
    fn rejects_undeclared_shelf() {
        let mut f = small();
        f.shelves.clear();
        assert!(Scenario::from_parts(f, None).is_err());
    }

    #[test]
    fn rejects_shelf_on_wrong_node() {
        let mut f = small();
        f.shelves[0].node = "N2".into();
        assert!(Scenario::from_parts(f, None).is_err());
    }

    #[test]
    fn topology_errors_pass_through() {
        let mut f = small();
        f.fiber_lengths_km.clear();
        assert!(matches!(
            Scenario::from_parts(f, None),
            Err(ScenarioError::Topology(_))
        ));
    }

    #[test]
    fn missing_map_file_is_io() {
        let mut f = small();
        f.envmap_ref = Some("does-not-exist.json".into());
        let text = serde_json::to_string(&f).unwrap();
        let err = Scenario::from_json_str(&text, Some(Path::new("/nonexistent"))).unwrap_err();
        assert!(err.is_io());
    }

    #[test]
    fn navigation_needs_map() {
        let s = Scenario::from_parts(small(), None).unwrap();
        assert_eq!(s.navigate("P1", "P2", 0), Err(RouteError::NoEnvMap));
    }

    #[test]
    fn points_and_routes_on_small_map() {
        let mut f = small();
        f.points = BTreeMap::from([("P1".into(), [0.05, 0.05]), ("P2".into(), [0.45, 0.05])]);
        f.shelves[0].point = Some("P2".into());
        f.shelves[0].level = 1;
        let map = OccupancyGrid3D::new(0.1, [5, 3, 20], [0.0; 3], vec![[2, 1, 5]]).unwrap();
        let s = Scenario::from_parts(f, Some(map)).unwrap();
        let p = s.navigate_to_shelf("P1", "N1/S1").unwrap();
        assert_eq!(p.cells.first(), Some(&Cell::new(0, 0)));
        assert_eq!(p.cells.last(), Some(&Cell::new(4, 0)));
        assert_eq!(p.flag.height_m, 1.5);
        assert_eq!(
            s.navigate("P1", "P9", 0),
            Err(RouteError::UnknownPoint("P9".into()))
        );
    }

    #[test]
    fn point_outside_map_rejected() {
        let mut f = small();
        f.points = BTreeMap::from([("P1".into(), [9.0, 9.0])]);
        let map = OccupancyGrid3D::new(0.1, [5, 3, 20], [0.0; 3], vec![[2, 1, 5]]).unwrap();
        assert!(Scenario::from_parts(f, Some(map)).is_err());
    }

    #[test]
    fn card_id_on_layout() {
        let mut f = small();
        f.layouts.insert(
            "view".into(),
            LayoutSpec {
                rows: vec![LayoutRow {
                    shelf: "N1/S1".into(),
                    capacity: Some(8),
                }],
                hidden: BTreeSet::new(),
                jitter_sigma: 0.0,
                seed: 0,
            },
        );
        let s = Scenario::from_parts(f, None).unwrap();
        let out = s
            .card_id("view", None, None, &MatchConfig::default())
            .unwrap();
        assert_eq!(out.assignment.matches.len(), 1);
        assert_eq!(out.assignment.matches[0].element_id, "a");
        assert!(matches!(
            s.card_id("nope", None, None, &MatchConfig::default()),
            Err(CardIdRunError::UnknownLayout(_))
        ));
    }
}
