//! Facility map and route guidance.
//!
//! A voxel occupancy map is flattened to a 2D grid over a height slab, A-star
//! finds an 8-connected route, and the route is turned into evenly spaced
//! direction arrows plus a destination flag whose height names the shelf.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::SQRT_2;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NavError {
    #[error("invalid map: {0}")]
    InvalidMap(String),
    #[error("invalid height slab [{0}, {1}]")]
    InvalidSlab(f64, f64),
    #[error("height slab [{0}, {1}] intersects no voxel layer")]
    EmptySlab(f64, f64),
    #[error("cell {0} is outside the grid")]
    OutOfBounds(Cell),
    #[error("cell {0} is blocked")]
    BlockedEndpoint(Cell),
    #[error("no path from {0} to {1}")]
    NoPath(Cell, Cell),
    #[error("shelf level {0} does not exist (racks have levels 0 and 1)")]
    InvalidShelfLevel(u8),
    #[error("arrow spacing must be positive, got {0}")]
    InvalidSpacing(f64),
}

/// Grid cell index `(ix, iy)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "[u32; 2]", into = "[u32; 2]")]
pub struct Cell {
    pub x: u32,
    pub y: u32,
}

impl Cell {
    pub const fn new(x: u32, y: u32) -> Self {
        Cell { x, y }
    }

    fn chebyshev(self, other: Cell) -> u32 {
        self.x.abs_diff(other.x).max(self.y.abs_diff(other.y))
    }
}

impl From<[u32; 2]> for Cell {
    fn from([x, y]: [u32; 2]) -> Self {
        Cell { x, y }
    }
}

impl From<Cell> for [u32; 2] {
    fn from(c: Cell) -> Self {
        [c.x, c.y]
    }
}

impl std::fmt::Display for Cell {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// Voxel map as stored on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "VoxelFile", into = "VoxelFile")]
pub struct OccupancyGrid3D {
    resolution_m: f64,
    dims: [u32; 3],
    origin_m: [f64; 3],
    occupied: Vec<[u32; 3]>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct VoxelFile {
    resolution_m: f64,
    dims: [u32; 3],
    #[serde(default)]
    origin_m: [f64; 3],
    occupied: Vec<[u32; 3]>,
}

impl TryFrom<VoxelFile> for OccupancyGrid3D {
    type Error = NavError;

    fn try_from(f: VoxelFile) -> Result<Self, NavError> {
        OccupancyGrid3D::new(f.resolution_m, f.dims, f.origin_m, f.occupied)
    }
}

impl From<OccupancyGrid3D> for VoxelFile {
    fn from(g: OccupancyGrid3D) -> Self {
        VoxelFile {
            resolution_m: g.resolution_m,
            dims: g.dims,
            origin_m: g.origin_m,
            occupied: g.occupied,
        }
    }
}

impl OccupancyGrid3D {
    pub fn new(
        resolution_m: f64,
        dims: [u32; 3],
        origin_m: [f64; 3],
        mut occupied: Vec<[u32; 3]>,
    ) -> Result<Self, NavError> {
        if !(resolution_m.is_finite() && resolution_m > 0.0) {
            return Err(NavError::InvalidMap(format!("resolution {resolution_m} m")));
        }
        if dims.contains(&0) {
            return Err(NavError::InvalidMap(format!(
                "dims {dims:?} must be positive"
            )));
        }
        if let Some(v) = occupied
            .iter()
            .find(|v| v[0] >= dims[0] || v[1] >= dims[1] || v[2] >= dims[2])
        {
            return Err(NavError::InvalidMap(format!(
                "voxel {v:?} outside dims {dims:?}"
            )));
        }
        occupied.sort_unstable();
        occupied.dedup();
        Ok(OccupancyGrid3D {
            resolution_m,
            dims,
            origin_m,
            occupied,
        })
    }

    pub fn resolution_m(&self) -> f64 {
        self.resolution_m
    }

    pub fn dims(&self) -> [u32; 3] {
        self.dims
    }

    pub fn origin_m(&self) -> [f64; 3] {
        self.origin_m
    }

    pub fn occupied(&self) -> &[[u32; 3]] {
        &self.occupied
    }

    /// Inclusive range of layers whose lower face lies in `[z_min, z_max]`.
    fn layer_range(&self, z_min_m: f64, z_max_m: f64) -> Option<(u32, u32)> {
        const EPS: f64 = 1e-9;
        let lo = ((z_min_m - self.origin_m[2]) / self.resolution_m - EPS).ceil();
        let hi = ((z_max_m - self.origin_m[2]) / self.resolution_m + EPS).floor();
        let lo = lo.max(0.0);
        let hi = hi.min(f64::from(self.dims[2] - 1));
        (lo <= hi).then_some((lo as u32, hi as u32))
    }

    /// Top-down projection: a cell is blocked iff some occupied voxel above it
    /// sits at a world height in `[z_min_m, z_max_m]`. A voxel's height is the
    /// height of its lower face.
    pub fn project_2d(&self, z_min_m: f64, z_max_m: f64) -> Result<Grid2D, NavError> {
        if z_min_m.partial_cmp(&z_max_m) != Some(std::cmp::Ordering::Less) {
            return Err(NavError::InvalidSlab(z_min_m, z_max_m));
        }
        let (lo, hi) = self
            .layer_range(z_min_m, z_max_m)
            .ok_or(NavError::EmptySlab(z_min_m, z_max_m))?;
        let mut grid = Grid2D::empty(
            self.resolution_m,
            [self.dims[0], self.dims[1]],
            [self.origin_m[0], self.origin_m[1]],
        )?;
        for v in self.occupied.iter().filter(|v| (lo..=hi).contains(&v[2])) {
            grid.set_blocked(Cell::new(v[0], v[1]), true);
        }
        Ok(grid)
    }
}

/// 2D navigation grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridFile", into = "GridFile")]
pub struct Grid2D {
    resolution_m: f64,
    dims: [u32; 2],
    origin_m: [f64; 2],
    blocked: Vec<bool>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct GridFile {
    resolution_m: f64,
    dims: [u32; 2],
    #[serde(default)]
    origin_m: [f64; 2],
    blocked: Vec<Cell>,
}

impl TryFrom<GridFile> for Grid2D {
    type Error = NavError;

    fn try_from(f: GridFile) -> Result<Self, NavError> {
        let mut g = Grid2D::empty(f.resolution_m, f.dims, f.origin_m)?;
        for c in f.blocked {
            if !g.in_bounds(c) {
                return Err(NavError::OutOfBounds(c));
            }
            g.set_blocked(c, true);
        }
        Ok(g)
    }
}

impl From<Grid2D> for GridFile {
    fn from(g: Grid2D) -> Self {
        GridFile {
            blocked: g.blocked_cells().collect(),
            resolution_m: g.resolution_m,
            dims: g.dims,
            origin_m: g.origin_m,
        }
    }
}

impl Grid2D {
    pub fn empty(resolution_m: f64, dims: [u32; 2], origin_m: [f64; 2]) -> Result<Self, NavError> {
        if !(resolution_m.is_finite() && resolution_m > 0.0) {
            return Err(NavError::InvalidMap(format!("resolution {resolution_m} m")));
        }
        if dims.contains(&0) {
            return Err(NavError::InvalidMap(format!(
                "dims {dims:?} must be positive"
            )));
        }
        Ok(Grid2D {
            resolution_m,
            dims,
            origin_m,
            blocked: vec![false; dims[0] as usize * dims[1] as usize],
        })
    }

    pub fn resolution_m(&self) -> f64 {
        self.resolution_m
    }

    pub fn dims(&self) -> [u32; 2] {
        self.dims
    }

    pub fn origin_m(&self) -> [f64; 2] {
        self.origin_m
    }

    pub fn in_bounds(&self, c: Cell) -> bool {
        c.x < self.dims[0] && c.y < self.dims[1]
    }

    /// Row-major index; also the final A-star tie-breaker.
    pub fn index(&self, c: Cell) -> usize {
        c.y as usize * self.dims[0] as usize + c.x as usize
    }

    fn cell_at(&self, idx: usize) -> Cell {
        let nx = self.dims[0] as usize;
        Cell::new((idx % nx) as u32, (idx / nx) as u32)
    }

    /// Out-of-bounds cells count as blocked.
    pub fn is_blocked(&self, c: Cell) -> bool {
        !self.in_bounds(c) || self.blocked[self.index(c)]
    }

    pub fn set_blocked(&mut self, c: Cell, blocked: bool) {
        let i = self.index(c);
        self.blocked[i] = blocked;
    }

    pub fn blocked_cells(&self) -> impl Iterator<Item = Cell> + '_ {
        self.blocked
            .iter()
            .enumerate()
            .filter(|(_, b)| **b)
            .map(|(i, _)| self.cell_at(i))
    }

    pub fn blocked_count(&self) -> usize {
        self.blocked.iter().filter(|b| **b).count()
    }

    /// World position of a cell's center.
    pub fn cell_center(&self, c: Cell) -> [f64; 2] {
        [
            self.origin_m[0] + (f64::from(c.x) + 0.5) * self.resolution_m,
            self.origin_m[1] + (f64::from(c.y) + 0.5) * self.resolution_m,
        ]
    }

    /// Cell containing a world position.
    pub fn cell_of(&self, pos: [f64; 2]) -> Result<Cell, NavError> {
        let fx = ((pos[0] - self.origin_m[0]) / self.resolution_m).floor();
        let fy = ((pos[1] - self.origin_m[1]) / self.resolution_m).floor();
        let out = || NavError::OutOfBounds(Cell::new(fx.max(0.0) as u32, fy.max(0.0) as u32));
        if fx < 0.0 || fy < 0.0 {
            return Err(out());
        }
        let c = Cell::new(fx as u32, fy as u32);
        if !self.in_bounds(c) {
            return Err(out());
        }
        Ok(c)
    }
}

/// Path cost as counts of axial and diagonal steps. Two costs are equal iff
/// both counts are, since sqrt(2) is irrational.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PathCost {
    pub axial: u32,
    pub diagonal: u32,
}

impl PathCost {
    pub fn value(self) -> f64 {
        f64::from(self.axial) + f64::from(self.diagonal) * SQRT_2
    }
}

/// Octile distance between two cells, in cell units.
pub fn octile(a: Cell, b: Cell) -> f64 {
    let dx = a.x.abs_diff(b.x);
    let dy = a.y.abs_diff(b.y);
    let (lo, hi) = if dx < dy { (dx, dy) } else { (dy, dx) };
    f64::from(hi - lo) + f64::from(lo) * SQRT_2
}

const STEPS: [(i32, i32); 8] = [
    (1, 0),
    (-1, 0),
    (0, 1),
    (0, -1),
    (1, 1),
    (1, -1),
    (-1, 1),
    (-1, -1),
];

fn offset(grid: &Grid2D, c: Cell, dx: i32, dy: i32) -> Option<Cell> {
    let x = c.x.checked_add_signed(dx)?;
    let y = c.y.checked_add_signed(dy)?;
    let n = Cell::new(x, y);
    grid.in_bounds(n).then_some(n)
}

/// Legal moves out of `c`. Diagonals need both orthogonal neighbours free.
fn moves(grid: &Grid2D, c: Cell) -> impl Iterator<Item = (Cell, bool)> + '_ {
    STEPS.iter().filter_map(move |&(dx, dy)| {
        let n = offset(grid, c, dx, dy)?;
        if grid.is_blocked(n) {
            return None;
        }
        let diagonal = dx != 0 && dy != 0;
        if diagonal {
            let side_a = offset(grid, c, dx, 0)?;
            let side_b = offset(grid, c, 0, dy)?;
            if grid.is_blocked(side_a) || grid.is_blocked(side_b) {
                return None;
            }
        }
        Some((n, diagonal))
    })
}

#[derive(Debug, PartialEq)]
struct OpenEntry {
    f: f64,
    h: f64,
    idx: usize,
    g: f64,
}

impl Eq for OpenEntry {}

impl Ord for OpenEntry {
    // BinaryHeap is a max-heap: reverse so the smallest (f, h, idx) pops first.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .f
            .total_cmp(&self.f)
            .then(other.h.total_cmp(&self.h))
            .then(other.idx.cmp(&self.idx))
    }
}

impl PartialOrd for OpenEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Route {
    pub cells: Vec<Cell>,
    pub cost: PathCost,
}

/// Minimum-cost 8-connected route (axial step 1, diagonal sqrt(2), no corner
/// cutting) under the octile heuristic. Open-set ties go to lower f, then
/// lower h, then lower row-major index.
pub fn astar(grid: &Grid2D, start: Cell, goal: Cell) -> Result<Route, NavError> {
    for c in [start, goal] {
        if !grid.in_bounds(c) {
            return Err(NavError::OutOfBounds(c));
        }
        if grid.is_blocked(c) {
            return Err(NavError::BlockedEndpoint(c));
        }
    }

    let n = grid.blocked.len();
    let mut best: Vec<Option<PathCost>> = vec![None; n];
    let mut parent = vec![usize::MAX; n];
    let mut closed = vec![false; n];
    let mut open = BinaryHeap::new();

    let start_idx = grid.index(start);
    let goal_idx = grid.index(goal);
    best[start_idx] = Some(PathCost::default());
    let h0 = octile(start, goal);
    open.push(OpenEntry {
        f: h0,
        h: h0,
        idx: start_idx,
        g: 0.0,
    });

    while let Some(entry) = open.pop() {
        if closed[entry.idx] {
            continue;
        }
        let g = best[entry.idx].expect("queued cells have a cost");
        if g.value() != entry.g {
            continue;
        }
        closed[entry.idx] = true;
        if entry.idx == goal_idx {
            let mut cells = vec![goal];
            let mut at = goal_idx;
            while at != start_idx {
                at = parent[at];
                cells.push(grid.cell_at(at));
            }
            cells.reverse();
            return Ok(Route { cells, cost: g });
        }

        let here = grid.cell_at(entry.idx);
        for (next, diagonal) in moves(grid, here) {
            let ni = grid.index(next);
            if closed[ni] {
                continue;
            }
            let mut cand = g;
            if diagonal {
                cand.diagonal += 1;
            } else {
                cand.axial += 1;
            }
            let improves = best[ni].is_none_or(|old| cand.value() < old.value());
            if improves {
                best[ni] = Some(cand);
                parent[ni] = entry.idx;
                let h = octile(next, goal);
                open.push(OpenEntry {
                    f: cand.value() + h,
                    h,
                    idx: ni,
                    g: cand.value(),
                });
            }
        }
    }
    Err(NavError::NoPath(start, goal))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Arrow {
    pub position_m: [f64; 2],
    pub heading_rad: f64,
}

/// Arrows every `spacing_m` of arc length along the polyline through the
/// cell centers, starting at the first cell. Each arrow points along the
/// segment it sits on; an arrow exactly on a vertex takes the outgoing
/// segment. A single-cell path gets one arrow with heading 0.
pub fn decimate(cells: &[Cell], grid: &Grid2D, spacing_m: f64) -> Result<Vec<Arrow>, NavError> {
    if !(spacing_m.is_finite() && spacing_m > 0.0) {
        return Err(NavError::InvalidSpacing(spacing_m));
    }
    let Some(&first) = cells.first() else {
        return Ok(Vec::new());
    };
    let points: Vec<[f64; 2]> = cells.iter().map(|&c| grid.cell_center(c)).collect();
    if points.len() == 1 {
        return Ok(vec![Arrow {
            position_m: grid.cell_center(first),
            heading_rad: 0.0,
        }]);
    }

    let seg_len: Vec<f64> = points
        .windows(2)
        .map(|w| (w[1][0] - w[0][0]).hypot(w[1][1] - w[0][1]))
        .collect();
    let total: f64 = seg_len.iter().sum();
    let count = (total / spacing_m + 1e-9).floor() as usize + 1;

    let mut arrows = Vec::with_capacity(count);
    let mut seg = 0;
    let mut seg_start = 0.0;
    for k in 0..count {
        let s = k as f64 * spacing_m;
        // Advance while the arrow lies at or past the end of this segment.
        while seg + 1 < seg_len.len() && s >= seg_start + seg_len[seg] - 1e-9 {
            seg_start += seg_len[seg];
            seg += 1;
        }
        let (a, b) = (points[seg], points[seg + 1]);
        let t = if seg_len[seg] > 0.0 {
            ((s - seg_start) / seg_len[seg]).clamp(0.0, 1.0)
        } else {
            0.0
        };
        arrows.push(Arrow {
            position_m: [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])],
            heading_rad: (b[1] - a[1]).atan2(b[0] - a[0]),
        });
    }
    Ok(arrows)
}

/// Flag heights per shelf level. Racks hold two shelves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlagHeights {
    pub lower_m: f64,
    pub upper_m: f64,
}

impl Default for FlagHeights {
    fn default() -> Self {
        FlagHeights {
            lower_m: 0.6,
            upper_m: 1.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Flag {
    pub position_m: [f64; 2],
    pub height_m: f64,
}

pub fn flag_for(goal: Cell, grid: &Grid2D, shelf_level: u8) -> Result<Flag, NavError> {
    flag_with_heights(goal, grid, shelf_level, &FlagHeights::default())
}

pub fn flag_with_heights(
    goal: Cell,
    grid: &Grid2D,
    shelf_level: u8,
    heights: &FlagHeights,
) -> Result<Flag, NavError> {
    let height_m = match shelf_level {
        0 => heights.lower_m,
        1 => heights.upper_m,
        other => return Err(NavError::InvalidShelfLevel(other)),
    };
    Ok(Flag {
        position_m: grid.cell_center(goal),
        height_m,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NavPath {
    pub cells: Vec<Cell>,
    /// Route cost in cell units.
    pub cost: f64,
    pub cost_m: f64,
    pub arrows: Vec<Arrow>,
    pub flag: Flag,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NavOptions {
    pub arrow_spacing_m: f64,
    pub flag_heights: FlagHeights,
}

impl Default for NavOptions {
    fn default() -> Self {
        NavOptions {
            arrow_spacing_m: 1.0,
            flag_heights: FlagHeights::default(),
        }
    }
}

/// Route, arrows and flag in one call.
pub fn plan(
    grid: &Grid2D,
    start: Cell,
    goal: Cell,
    shelf_level: u8,
    opts: &NavOptions,
) -> Result<NavPath, NavError> {
    let flag = flag_with_heights(goal, grid, shelf_level, &opts.flag_heights)?;
    let route = astar(grid, start, goal)?;
    let arrows = decimate(&route.cells, grid, opts.arrow_spacing_m)?;
    Ok(NavPath {
        cost: route.cost.value(),
        cost_m: route.cost.value() * grid.resolution_m(),
        cells: route.cells,
        arrows,
        flag,
    })
}

/// ASCII rendering, north (high y) up: `#` blocked, `*` route, `S`/`G` ends.
pub fn render_ascii(grid: &Grid2D, cells: &[Cell]) -> String {
    let on_route: std::collections::HashSet<Cell> = cells.iter().copied().collect();
    let [nx, ny] = grid.dims();
    let mut out = String::with_capacity((nx as usize + 1) * ny as usize);
    for y in (0..ny).rev() {
        for x in 0..nx {
            let c = Cell::new(x, y);
            let ch = if cells.first() == Some(&c) {
                'S'
            } else if cells.last() == Some(&c) {
                'G'
            } else if on_route.contains(&c) {
                '*'
            } else if grid.is_blocked(c) {
                '#'
            } else {
                '.'
            };
            out.push(ch);
        }
        let _ = writeln!(out);
    }
    out
}

/// True when consecutive cells are 8-neighbours, none is blocked, and no
/// diagonal step cuts a blocked corner.
pub fn is_valid_route(grid: &Grid2D, cells: &[Cell]) -> bool {
    cells.iter().all(|&c| !grid.is_blocked(c))
        && cells.windows(2).all(|w| {
            let (a, b) = (w[0], w[1]);
            if a.chebyshev(b) != 1 {
                return false;
            }
            if a.x != b.x && a.y != b.y {
                !grid.is_blocked(Cell::new(b.x, a.y)) && !grid.is_blocked(Cell::new(a.x, b.y))
            } else {
                true
            }
        })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn open(nx: u32, ny: u32, res: f64) -> Grid2D {
        Grid2D::empty(res, [nx, ny], [0.0, 0.0]).unwrap()
    }

    #[test]
    fn single_voxel_in_slab() {
        let g = OccupancyGrid3D::new(0.1, [4, 4, 20], [0.0; 3], vec![[2, 3, 5]]).unwrap();
        let p = g.project_2d(0.1, 1.8).unwrap();
        assert_eq!(p.blocked_cells().collect::<Vec<_>>(), vec![Cell::new(2, 3)]);
    }

    #[test]
    fn column_above_slab_is_free() {
        let occ = (19..25).map(|z| [1, 1, z]).collect();
        let g = OccupancyGrid3D::new(0.1, [4, 4, 25], [0.0; 3], occ).unwrap();
        assert_eq!(g.project_2d(0.1, 1.8).unwrap().blocked_count(), 0);
    }

    #[test]
    fn slab_edges_are_inclusive() {
        // 18 * 0.1 is 1.8000000000000003 in binary; layer 18 must still count.
        let g = OccupancyGrid3D::new(
            0.1,
            [3, 1, 25],
            [0.0; 3],
            vec![[0, 0, 0], [1, 0, 1], [2, 0, 18]],
        )
        .unwrap();
        let p = g.project_2d(0.1, 1.8).unwrap();
        assert_eq!(
            p.blocked_cells().collect::<Vec<_>>(),
            vec![Cell::new(1, 0), Cell::new(2, 0)]
        );
    }

    #[test]
    fn slab_errors() {
        let g = OccupancyGrid3D::new(0.1, [2, 2, 10], [0.0; 3], vec![]).unwrap();
        assert!(matches!(
            g.project_2d(1.0, 0.5),
            Err(NavError::InvalidSlab(..))
        ));
        assert!(matches!(
            g.project_2d(5.0, 6.0),
            Err(NavError::EmptySlab(..))
        ));
        assert!(matches!(
            g.project_2d(-3.0, -2.0),
            Err(NavError::EmptySlab(..))
        ));
    }

    #[test]
    fn voxel_outside_dims_rejected() {
        assert!(OccupancyGrid3D::new(0.1, [2, 2, 2], [0.0; 3], vec![[2, 0, 0]]).is_err());
        assert!(OccupancyGrid3D::new(0.0, [2, 2, 2], [0.0; 3], vec![]).is_err());
    }

    #[test]
    fn diagonal_across_empty_grid() {
        let r = astar(&open(10, 10, 1.0), Cell::new(0, 0), Cell::new(9, 9)).unwrap();
        assert_eq!(
            r.cost,
            PathCost {
                axial: 0,
                diagonal: 9
            }
        );
        assert!((r.cost.value() - 12.728).abs() < 1e-3);
        assert_eq!(r.cells.len(), 10);
    }

    #[test]
    fn start_equals_goal() {
        let r = astar(&open(3, 3, 1.0), Cell::new(1, 1), Cell::new(1, 1)).unwrap();
        assert_eq!(r.cells, vec![Cell::new(1, 1)]);
        assert_eq!(r.cost.value(), 0.0);
    }

    #[test]
    fn endpoint_errors() {
        let mut g = open(3, 3, 1.0);
        g.set_blocked(Cell::new(2, 2), true);
        assert_eq!(
            astar(&g, Cell::new(0, 0), Cell::new(2, 2)).unwrap_err(),
            NavError::BlockedEndpoint(Cell::new(2, 2))
        );
        assert_eq!(
            astar(&g, Cell::new(0, 5), Cell::new(1, 1)).unwrap_err(),
            NavError::OutOfBounds(Cell::new(0, 5))
        );
    }

    #[test]
    fn walled_goal_has_no_path() {
        let mut g = open(5, 5, 1.0);
        for c in [
            (1, 1),
            (2, 1),
            (3, 1),
            (1, 2),
            (3, 2),
            (1, 3),
            (2, 3),
            (3, 3),
        ] {
            g.set_blocked(Cell::new(c.0, c.1), true);
        }
        assert!(matches!(
            astar(&g, Cell::new(0, 0), Cell::new(2, 2)),
            Err(NavError::NoPath(..))
        ));
    }

    #[test]
    fn no_corner_cutting() {
        // # G
        // S .   the diagonal S->G would clip the blocked corner
        let mut g = open(2, 2, 1.0);
        g.set_blocked(Cell::new(0, 1), true);
        let r = astar(&g, Cell::new(0, 0), Cell::new(1, 1)).unwrap();
        assert_eq!(
            r.cost,
            PathCost {
                axial: 2,
                diagonal: 0
            }
        );
        assert!(is_valid_route(&g, &r.cells));
    }

    #[test]
    fn straight_path_arrows() {
        let g = open(5, 1, 1.0);
        let cells: Vec<Cell> = (0..5).map(|x| Cell::new(x, 0)).collect();
        let arrows = decimate(&cells, &g, 1.0).unwrap();
        assert_eq!(arrows.len(), 5);
        assert!(arrows.iter().all(|a| a.heading_rad == 0.0));
        assert_eq!(arrows[0].position_m, [0.5, 0.5]);
        assert_eq!(arrows[4].position_m, [4.5, 0.5]);
    }

    #[test]
    fn single_cell_arrow() {
        let g = open(3, 3, 0.5);
        let arrows = decimate(&[Cell::new(1, 1)], &g, 1.0).unwrap();
        assert_eq!(arrows.len(), 1);
        assert_eq!(arrows[0].heading_rad, 0.0);
        assert_eq!(arrows[0].position_m, [0.75, 0.75]);
    }

    #[test]
    fn l_shaped_headings_switch_at_corner() {
        let g = open(4, 4, 1.0);
        // east 3 cells, then north 3 cells; corner at (3, 0)
        let cells = vec![
            Cell::new(0, 0),
            Cell::new(1, 0),
            Cell::new(2, 0),
            Cell::new(3, 0),
            Cell::new(3, 1),
            Cell::new(3, 2),
            Cell::new(3, 3),
        ];
        let arrows = decimate(&cells, &g, 1.0).unwrap();
        let headings: Vec<f64> = arrows.iter().map(|a| a.heading_rad).collect();
        let half_pi = std::f64::consts::FRAC_PI_2;
        assert_eq!(
            headings,
            vec![0.0, 0.0, 0.0, half_pi, half_pi, half_pi, half_pi]
        );
        // The corner arrow sits on the vertex and takes the outgoing segment.
        assert_eq!(arrows[3].position_m, [3.5, 0.5]);
    }

    #[test]
    fn spacing_must_be_positive() {
        let g = open(2, 2, 1.0);
        assert!(matches!(
            decimate(&[Cell::new(0, 0)], &g, 0.0),
            Err(NavError::InvalidSpacing(_))
        ));
    }

    #[test]
    fn flag_levels() {
        let g = open(4, 4, 0.5);
        let goal = Cell::new(3, 1);
        assert_eq!(flag_for(goal, &g, 0).unwrap().height_m, 0.6);
        let upper = flag_for(goal, &g, 1).unwrap();
        assert_eq!(upper.height_m, 1.5);
        assert_eq!(upper.position_m, g.cell_center(goal));
        assert_eq!(
            flag_for(goal, &g, 2).unwrap_err(),
            NavError::InvalidShelfLevel(2)
        );
    }

    #[test]
    fn world_cell_round_trip() {
        let g = Grid2D::empty(0.1, [80, 60], [-1.0, 2.0]).unwrap();
        let c = Cell::new(17, 42);
        assert_eq!(g.cell_of(g.cell_center(c)).unwrap(), c);
        assert!(g.cell_of([-5.0, 2.5]).is_err());
        assert!(g.cell_of([100.0, 2.5]).is_err());
    }

    #[test]
    fn grid_serde_round_trip() {
        let mut g = open(3, 2, 0.25);
        g.set_blocked(Cell::new(2, 1), true);
        let json = serde_json::to_string(&g).unwrap();
        assert!(json.contains("[[2,1]]"));
        let back: Grid2D = serde_json::from_str(&json).unwrap();
        assert_eq!(back, g);
    }

    #[test]
    fn render_marks_route() {
        let g = open(3, 1, 1.0);
        let s = render_ascii(&g, &[Cell::new(0, 0), Cell::new(1, 0), Cell::new(2, 0)]);
        assert_eq!(s, "S*G\n");
    }
}
