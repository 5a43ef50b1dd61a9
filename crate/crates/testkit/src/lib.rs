//! Reference oracles and random instance generators shared by the test
//! suites. The oracles are written independently of the production code and
//! deliberately favour obviousness over speed.

pub mod edge;

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::Rng;
use twinops_core::cardid::{Detection, SlotAssignment};
use twinops_core::faultloc::{Alarm, SeverityWeights};
use twinops_core::navmap::{Cell, Grid2D};
use twinops_core::netqos::{SimConfig, TrafficClass};
use twinops_core::topology::{
    Element, ElementKind, ShelfArrangement, SlotEntry, TopologyGraph, WavelengthPath,
};

// ---------------------------------------------------------------------------
// Grid search
// ---------------------------------------------------------------------------

/// `a1 + d1*sqrt(2)` compared with `a2 + d2*sqrt(2)`, exactly.
pub fn cmp_octile_cost(a1: u32, d1: u32, a2: u32, d2: u32) -> Ordering {
    // compare x = a1 - a2 against y * sqrt(2) with y = d2 - d1
    let x = i64::from(a1) - i64::from(a2);
    let y = i64::from(d2) - i64::from(d1);
    match (x.signum(), y.signum()) {
        (0, 0) => Ordering::Equal,
        (sx, sy) if sx >= 0 && sy <= 0 => Ordering::Greater,
        (sx, sy) if sx <= 0 && sy >= 0 => Ordering::Less,
        (1, 1) => (x * x).cmp(&(2 * y * y)),
        _ => (2 * y * y).cmp(&(x * x)),
    }
}

fn free(grid: &Grid2D, x: i64, y: i64) -> bool {
    let [nx, ny] = grid.dims();
    x >= 0
        && y >= 0
        && x < i64::from(nx)
        && y < i64::from(ny)
        && !grid.is_blocked(Cell::new(x as u32, y as u32))
}

/// Plain Dijkstra with a linear scan for the next vertex. Returns the optimal
/// (axial, diagonal) step counts, or `None` when the goal is unreachable or
/// an endpoint is blocked. A diagonal step needs both orthogonal cells free.
pub fn dijkstra_cost(grid: &Grid2D, start: Cell, goal: Cell) -> Option<(u32, u32)> {
    let [nx, ny] = grid.dims();
    let (sx, sy) = (i64::from(start.x), i64::from(start.y));
    if !free(grid, sx, sy) || !free(grid, i64::from(goal.x), i64::from(goal.y)) {
        return None;
    }
    let n = (nx * ny) as usize;
    let id = |x: i64, y: i64| (y * i64::from(nx) + x) as usize;
    let mut dist: Vec<Option<(u32, u32)>> = vec![None; n];
    let mut done = vec![false; n];
    dist[id(sx, sy)] = Some((0, 0));
    loop {
        let mut best: Option<usize> = None;
        for v in 0..n {
            if done[v] {
                continue;
            }
            if let Some((a, d)) = dist[v] {
                let better = match best.and_then(|b| dist[b]) {
                    None => true,
                    Some((ba, bd)) => cmp_octile_cost(a, d, ba, bd) == Ordering::Less,
                };
                if better {
                    best = Some(v);
                }
            }
        }
        let v = best?;
        done[v] = true;
        let (x, y) = ((v % nx as usize) as i64, (v / nx as usize) as i64);
        if x == i64::from(goal.x) && y == i64::from(goal.y) {
            return dist[v];
        }
        let (a, d) = dist[v].unwrap();
        for dx in -1i64..=1 {
            for dy in -1i64..=1 {
                if (dx, dy) == (0, 0) || !free(grid, x + dx, y + dy) {
                    continue;
                }
                let diagonal = dx != 0 && dy != 0;
                if diagonal && !(free(grid, x + dx, y) && free(grid, x, y + dy)) {
                    continue;
                }
                let cand = if diagonal { (a, d + 1) } else { (a + 1, d) };
                let w = id(x + dx, y + dy);
                let improve = match dist[w] {
                    None => true,
                    Some((wa, wd)) => cmp_octile_cost(cand.0, cand.1, wa, wd) == Ordering::Less,
                };
                if !done[w] && improve {
                    dist[w] = Some(cand);
                }
            }
        }
    }
}

/// Random grid with each cell blocked independently with probability `p`.
pub fn random_grid<R: Rng>(rng: &mut R, nx: u32, ny: u32, p: f64) -> Grid2D {
    let mut g = Grid2D::empty(1.0, [nx, ny], [0.0, 0.0]).expect("valid dims");
    for y in 0..ny {
        for x in 0..nx {
            if rng.random_bool(p) {
                g.set_blocked(Cell::new(x, y), true);
            }
        }
    }
    g
}

/// Two distinct free cells, or `None` if fewer than two are free.
pub fn random_endpoints<R: Rng>(rng: &mut R, grid: &Grid2D) -> Option<(Cell, Cell)> {
    let [nx, ny] = grid.dims();
    let mut free: Vec<Cell> = (0..ny)
        .flat_map(|y| (0..nx).map(move |x| Cell::new(x, y)))
        .filter(|&c| !grid.is_blocked(c))
        .collect();
    if free.len() < 2 {
        return None;
    }
    free.shuffle(rng);
    Some((free[0], free[1]))
}

// ---------------------------------------------------------------------------
// Topology and localization
// ---------------------------------------------------------------------------

/// Random multi-path topology: every path has its own source and sink OT and
/// a sorted selection from a shared pool of line elements, so paths overlap
/// without forming cycles. At most `max_elements` elements, `max_paths` paths.
pub fn random_topology<R: Rng>(
    rng: &mut R,
    max_elements: usize,
    max_paths: usize,
) -> TopologyGraph {
    assert!(max_paths >= 1 && max_elements > 2 * max_paths);
    let paths = rng.random_range(1..=max_paths);
    let pool_size = rng.random_range(1..=max_elements - 2 * paths);
    let inner_kinds = [
        ElementKind::La,
        ElementKind::Wss,
        ElementKind::Aa,
        ElementKind::Mcs,
        ElementKind::FiberSpan,
    ];
    let mut elements = Vec::new();
    let mut lengths = BTreeMap::new();
    let pool: Vec<String> = (0..pool_size)
        .map(|i| {
            let kind = inner_kinds[rng.random_range(0..inner_kinds.len())];
            let id = format!("E{i:02}-{}", kind.as_str());
            if kind == ElementKind::FiberSpan {
                lengths.insert(id.clone(), rng.random_range(1.0..80.0));
            }
            elements.push(Element {
                id: id.clone(),
                kind,
                model: format!("M-{}", kind.as_str()),
                node: format!("N{}", i % 6),
                shelf: None,
                slot: None,
            });
            id
        })
        .collect();

    let mut edges = BTreeSet::new();
    let mut wavelength_paths = Vec::new();
    for p in 0..paths {
        let src = format!("WL{p}-OT-src");
        let dst = format!("WL{p}-OT-dst");
        for id in [&src, &dst] {
            elements.push(Element {
                id: id.clone(),
                kind: ElementKind::Ot,
                model: "D5X500Q".into(),
                node: format!("N{p}"),
                shelf: None,
                slot: None,
            });
        }
        let take = rng.random_range(0..=pool.len().min(8));
        let mut picked: Vec<usize> = rand::seq::index::sample(rng, pool.len(), take).into_vec();
        picked.sort_unstable();
        let mut route = vec![src];
        route.extend(picked.iter().map(|&i| pool[i].clone()));
        route.push(dst);
        for w in route.windows(2) {
            edges.insert((w[0].clone(), w[1].clone()));
        }
        wavelength_paths.push(WavelengthPath {
            id: format!("WL{p}"),
            route,
            line_rate_gbps: 200.0,
        });
    }
    TopologyGraph::build(
        elements,
        edges.into_iter().collect(),
        wavelength_paths,
        lengths,
    )
    .expect("generator builds valid topologies")
}

/// Elements on at least one path.
pub fn on_path_elements(graph: &TopologyGraph) -> Vec<String> {
    let set: BTreeSet<&String> = graph.paths().iter().flat_map(|p| &p.route).collect();
    set.into_iter().cloned().collect()
}

/// `{e}` plus everything after `e` on every route containing it, found by
/// scanning the routes directly.
pub fn coverage_oracle(graph: &TopologyGraph, e: &str) -> BTreeSet<String> {
    let mut out = BTreeSet::from([e.to_owned()]);
    for p in graph.paths() {
        if let Some(i) = p.route.iter().position(|x| x == e) {
            out.extend(p.route[i + 1..].iter().cloned());
        }
    }
    out
}

/// Brute-force coverage scores for every alarmed element.
pub fn coverage_scores(
    graph: &TopologyGraph,
    alarms: &[Alarm],
    weights: &SeverityWeights,
) -> BTreeMap<String, f64> {
    let mut worst: BTreeMap<&str, _> = BTreeMap::new();
    for a in alarms {
        let s = worst.entry(a.element_id.as_str()).or_insert(a.severity);
        if a.severity > *s {
            *s = a.severity;
        }
    }
    let total = worst.len() as f64;
    worst
        .iter()
        .map(|(&e, &sev)| {
            let cov = coverage_oracle(graph, e);
            let hits = worst.keys().filter(|k| cov.contains(**k)).count() as f64;
            (e.to_owned(), hits / total * weights.weight(sev))
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Card identification
// ---------------------------------------------------------------------------

/// Random single-shelf arrangement with 1..=`max_slots` cards in a shelf of
/// `capacity` slots; no model appears more than `max_dup` times.
pub fn random_arrangement<R: Rng>(
    rng: &mut R,
    max_slots: usize,
    max_dup: usize,
    capacity: u32,
) -> ShelfArrangement {
    assert!(max_slots as u32 <= capacity);
    let n = rng.random_range(1..=max_slots);
    let mut slots: Vec<u32> = rand::seq::index::sample(rng, capacity as usize, n)
        .into_iter()
        .map(|s| s as u32)
        .collect();
    slots.sort_unstable();
    let palette = [
        "ASWG", "D5X500Q", "IROADM", "OA2", "MCS8", "WTOCM", "S13X100", "AHPHG", "UNIT-9",
    ];
    let mut used: BTreeMap<&str, usize> = BTreeMap::new();
    let entries = slots
        .into_iter()
        .map(|slot| {
            let model = loop {
                let m = palette[rng.random_range(0..palette.len())];
                let c = used.entry(m).or_insert(0);
                if *c < max_dup {
                    *c += 1;
                    break m;
                }
            };
            SlotEntry {
                slot,
                element_id: format!("card-{slot}"),
                model: model.to_owned(),
            }
        })
        .collect();
    ShelfArrangement {
        shelf_id: "S".into(),
        slots: entries,
    }
}

/// Fraction of matched slots whose detection came from that slot's card.
/// `truth[i]` is the element id detection `i` was rendered from.
pub fn assignment_accuracy(assignment: &SlotAssignment, truth: &[String]) -> f64 {
    if truth.is_empty() {
        return 1.0;
    }
    let correct = assignment
        .matches
        .iter()
        .filter(|m| truth.get(m.detection) == Some(&m.element_id))
        .count();
    correct as f64 / truth.len() as f64
}

/// Apply `x -> scale * x + shift` to every box centre.
pub fn affine_x(detections: &[Detection], scale: f64, shift: f64) -> Vec<Detection> {
    detections
        .iter()
        .map(|d| {
            let mut d = d.clone();
            d.bbox.cx = scale * d.bbox.cx + shift;
            d
        })
        .collect()
}

// ---------------------------------------------------------------------------
// QoS
// ---------------------------------------------------------------------------

/// Long-run throughput per class under strict priority: AR takes what it
/// offers (up to capacity), CBR gets the metered load or the remainder,
/// whichever is smaller.
pub fn steady_state_gbps(config: &SimConfig) -> (f64, f64) {
    let offered = |class| -> f64 {
        config
            .flows
            .iter()
            .filter(|f| f.class == class)
            .map(|f| f.offered_gbps)
            .sum()
    };
    let cap = config.link.capacity_gbps;
    let ar = offered(TrafficClass::Ar).min(cap);
    let mut cbr = offered(TrafficClass::Cbr);
    if config.meter.enabled {
        cbr = cbr.min(config.meter.cbr_cap_gbps);
    }
    (ar, cbr.min(cap - ar))
}

/// Mean M/D/1 waiting time (ms) at load `rho` with service time `service_ms`.
pub fn md1_wait_ms(rho: f64, service_ms: f64) -> f64 {
    rho * service_ms / (2.0 * (1.0 - rho))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn octile_comparison_is_exact() {
        assert_eq!(cmp_octile_cost(1, 0, 0, 1), Ordering::Less);
        assert_eq!(cmp_octile_cost(2, 0, 0, 1), Ordering::Greater);
        assert_eq!(cmp_octile_cost(3, 2, 3, 2), Ordering::Equal);
        // 41 vs 29*sqrt(2) = 41.012
        assert_eq!(cmp_octile_cost(41, 0, 0, 29), Ordering::Less);
        assert_eq!(cmp_octile_cost(0, 29, 41, 0), Ordering::Greater);
        assert_eq!(cmp_octile_cost(5, 1, 2, 3), Ordering::Greater);
    }

    #[test]
    fn dijkstra_open_grid() {
        let g = Grid2D::empty(1.0, [10, 10], [0.0, 0.0]).unwrap();
        assert_eq!(
            dijkstra_cost(&g, Cell::new(0, 0), Cell::new(9, 9)),
            Some((0, 9))
        );
        assert_eq!(
            dijkstra_cost(&g, Cell::new(0, 0), Cell::new(9, 3)),
            Some((6, 3))
        );
        assert_eq!(
            dijkstra_cost(&g, Cell::new(2, 2), Cell::new(2, 2)),
            Some((0, 0))
        );
    }

    #[test]
    fn dijkstra_respects_corners() {
        let mut g = Grid2D::empty(1.0, [2, 2], [0.0, 0.0]).unwrap();
        g.set_blocked(Cell::new(1, 0), true);
        assert_eq!(
            dijkstra_cost(&g, Cell::new(0, 0), Cell::new(1, 1)),
            Some((2, 0))
        );
        g.set_blocked(Cell::new(0, 1), true);
        assert_eq!(dijkstra_cost(&g, Cell::new(0, 0), Cell::new(1, 1)), None);
    }

    #[test]
    fn generated_topologies_are_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let g = random_topology(&mut rng, 50, 4);
            assert!(g.elements().len() <= 50);
            assert!((1..=4).contains(&g.paths().len()));
        }
    }

    #[test]
    fn generated_arrangements_respect_duplicates() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..200 {
            let a = random_arrangement(&mut rng, 16, 4, 20);
            let mut counts = BTreeMap::new();
            for s in &a.slots {
                *counts.entry(&s.model).or_insert(0) += 1;
            }
            assert!(counts.values().all(|&c| c <= 4));
            assert!(a.slots.windows(2).all(|w| w[0].slot < w[1].slot));
        }
    }

    #[test]
    fn steady_state_examples() {
        let on = SimConfig::ar_vs_cbr(0.33, 100.0, true, 1.0);
        assert_eq!(steady_state_gbps(&on), (0.33, 90.0));
        let off = SimConfig::ar_vs_cbr(0.33, 200.0, false, 1.0);
        let (ar, cbr) = steady_state_gbps(&off);
        assert_eq!(ar, 0.33);
        assert!((cbr - 99.67).abs() < 1e-9);
    }
}
