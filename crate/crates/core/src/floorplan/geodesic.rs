//! Obstacle-aware distances on an 8-connected occupancy grid.
//!
//! Cells whose centre lies outside the region, cells a boundary edge passes
//! through, and every cell a wall touches are blocked. Diagonal moves cost
//! `sqrt(2) * resolution` and may not cut a blocked corner. A point inside a
//! free cell enters the grid at that cell or any reachable neighbour, paying
//! the straight-line distance to the cell centre; any other point is snapped
//! to the nearest free cell and pays the snap distance. The final distance
//! is floored by the straight-line distance.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use nalgebra::DMatrix;
use rayon::prelude::*;

use super::{FloorPlan, Point, Segment};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct OccupancyGrid {
    origin: Point,
    resolution: f64,
    nx: usize,
    ny: usize,
    free: Vec<bool>,
}

/// The free cell nearest to a point and the distance to its centre.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Snap {
    pub cell: usize,
    pub offset: f64,
}

#[derive(PartialEq)]
struct Frontier {
    dist: f64,
    cell: usize,
}

impl Eq for Frontier {}

impl Ord for Frontier {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.cell.cmp(&self.cell))
    }
}

impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

const NEIGHBOURS: [(isize, isize); 8] = [
    (1, 0),
    (-1, 0),
    (0, 1),
    (0, -1),
    (1, 1),
    (1, -1),
    (-1, 1),
    (-1, -1),
];

impl OccupancyGrid {
    pub fn new(plan: &FloorPlan, resolution: f64) -> Result<Self> {
        if !(resolution > 0.0 && resolution.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "grid resolution must be positive, got {resolution}"
            )));
        }
        let (lo, hi) = plan.bbox();
        let cells = |extent: f64| ((extent / resolution - 1e-9).ceil() as usize).max(1);
        let nx = cells(hi.x - lo.x);
        let ny = cells(hi.y - lo.y);
        if nx.saturating_mul(ny) > 50_000_000 {
            return Err(Error::InvalidParameter(format!(
                "grid of {nx}x{ny} cells is too large; use a coarser resolution"
            )));
        }
        let mut grid = Self {
            origin: lo,
            resolution,
            nx,
            ny,
            free: vec![false; nx * ny],
        };
        for cell in 0..nx * ny {
            grid.free[cell] = plan.in_region(&grid.center(cell));
        }
        for edge in plan.boundary_edges() {
            grid.block_along(&edge, false);
        }
        for wall in plan.walls() {
            grid.block_along(wall, true);
        }
        Ok(grid)
    }

    fn block_along(&mut self, seg: &Segment, closed: bool) {
        let r = self.resolution;
        let to_ix = |v: f64, o: f64, n: usize| (((v - o) / r).floor().max(0.0) as usize).min(n - 1);
        let ix0 = to_ix(seg.a.x.min(seg.b.x), self.origin.x, self.nx).saturating_sub(1);
        let ix1 = (to_ix(seg.a.x.max(seg.b.x), self.origin.x, self.nx) + 1).min(self.nx - 1);
        let iy0 = to_ix(seg.a.y.min(seg.b.y), self.origin.y, self.ny).saturating_sub(1);
        let iy1 = (to_ix(seg.a.y.max(seg.b.y), self.origin.y, self.ny) + 1).min(self.ny - 1);
        for iy in iy0..=iy1 {
            for ix in ix0..=ix1 {
                let lo = Point::new(self.origin.x + ix as f64 * r, self.origin.y + iy as f64 * r);
                let hi = Point::new(lo.x + r, lo.y + r);
                let hit = if closed {
                    seg.touches_box(lo, hi)
                } else {
                    seg.crosses_box_interior(lo, hi)
                };
                if hit {
                    self.free[iy * self.nx + ix] = false;
                }
            }
        }
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    pub fn is_free(&self, cell: usize) -> bool {
        self.free[cell]
    }

    pub fn free_count(&self) -> usize {
        self.free.iter().filter(|&&f| f).count()
    }

    pub fn center(&self, cell: usize) -> Point {
        let ix = cell % self.nx;
        let iy = cell / self.nx;
        Point::new(
            self.origin.x + (ix as f64 + 0.5) * self.resolution,
            self.origin.y + (iy as f64 + 0.5) * self.resolution,
        )
    }

    /// Cell containing `p`, if `p` lies inside the grid.
    fn home(&self, p: &Point) -> Option<usize> {
        let fx = (p.x - self.origin.x) / self.resolution;
        let fy = (p.y - self.origin.y) / self.resolution;
        if !(fx >= 0.0 && fy >= 0.0 && fx <= self.nx as f64 && fy <= self.ny as f64) {
            return None;
        }
        let ix = (fx as usize).min(self.nx - 1);
        let iy = (fy as usize).min(self.ny - 1);
        Some(iy * self.nx + ix)
    }

    /// Free neighbour reachable from `cell` in one move, honouring the
    /// no-corner-cutting rule.
    fn step(&self, cell: usize, (dx, dy): (isize, isize)) -> Option<usize> {
        let (nx, ny) = (self.nx as isize, self.ny as isize);
        let cx = (cell % self.nx) as isize;
        let cy = (cell / self.nx) as isize;
        let (x, y) = (cx + dx, cy + dy);
        if x < 0 || y < 0 || x >= nx || y >= ny {
            return None;
        }
        let next = (y * nx + x) as usize;
        if !self.free[next] {
            return None;
        }
        if dx != 0
            && dy != 0
            && (!self.free[(cy * nx + x) as usize] || !self.free[(y * nx + cx) as usize])
        {
            return None;
        }
        Some(next)
    }

    /// Nearest free cell to `p` by centre distance (ties by smallest index).
    pub fn snap(&self, p: &Point) -> Option<Snap> {
        if let Some(home) = self.home(p) {
            if self.free[home] {
                return Some(Snap {
                    cell: home,
                    offset: self.center(home).dist(p),
                });
            }
        }
        let fx = ((p.x - self.origin.x) / self.resolution).floor();
        let fy = ((p.y - self.origin.y) / self.resolution).floor();
        let ix = fx.clamp(0.0, (self.nx - 1) as f64) as isize;
        let iy = fy.clamp(0.0, (self.ny - 1) as f64) as isize;
        // A ring at Chebyshev radius r holds no centre closer than
        // (r - 1) * resolution to the point.
        let mut best: Option<(f64, usize)> = None;
        for r in 0..=(self.nx.max(self.ny) as isize) {
            if let Some((d, _)) = best {
                if (r as f64 - 1.0) * self.resolution > d {
                    break;
                }
            }
            for jy in (iy - r)..=(iy + r) {
                for jx in (ix - r)..=(ix + r) {
                    let on_ring = (jy - iy).abs() == r || (jx - ix).abs() == r;
                    if !on_ring
                        || jx < 0
                        || jy < 0
                        || jx >= self.nx as isize
                        || jy >= self.ny as isize
                    {
                        continue;
                    }
                    let cell = jy as usize * self.nx + jx as usize;
                    if !self.free[cell] {
                        continue;
                    }
                    let d = self.center(cell).dist(p);
                    if !matches!(best, Some((bd, bc)) if d > bd || (d == bd && cell > bc)) {
                        best = Some((d, cell));
                    }
                }
            }
        }
        best.map(|(offset, cell)| Snap { cell, offset })
    }

    /// Cells through which `p` enters the grid, with the cost of reaching
    /// each centre. The straight segment from a point in a free cell to a
    /// reachable neighbour's centre stays inside free cells.
    pub fn attach(&self, p: &Point) -> Vec<(usize, f64)> {
        match self.home(p) {
            Some(home) if self.free[home] => {
                let mut out = vec![(home, self.center(home).dist(p))];
                for dir in NEIGHBOURS {
                    if let Some(n) = self.step(home, dir) {
                        out.push((n, self.center(n).dist(p)));
                    }
                }
                out
            }
            _ => self
                .snap(p)
                .map(|s| vec![(s.cell, s.offset)])
                .unwrap_or_default(),
        }
    }

    /// Shortest 8-connected path length from a set of seeded cells to every
    /// cell; `f64::INFINITY` for unreachable or blocked cells.
    pub fn distances_from_seeds(&self, seeds: &[(usize, f64)]) -> Vec<f64> {
        let mut dist = vec![f64::INFINITY; self.nx * self.ny];
        let mut heap = BinaryHeap::new();
        for &(cell, d) in seeds {
            if self.free[cell] && d < dist[cell] {
                dist[cell] = d;
                heap.push(Frontier { dist: d, cell });
            }
        }
        let diag = std::f64::consts::SQRT_2 * self.resolution;
        while let Some(Frontier { dist: d, cell }) = heap.pop() {
            if d > dist[cell] {
                continue;
            }
            for dir in NEIGHBOURS {
                let Some(next) = self.step(cell, dir) else {
                    continue;
                };
                let cost = if dir.0 != 0 && dir.1 != 0 {
                    diag
                } else {
                    self.resolution
                };
                let nd = d + cost;
                if nd < dist[next] {
                    dist[next] = nd;
                    heap.push(Frontier {
                        dist: nd,
                        cell: next,
                    });
                }
            }
        }
        dist
    }

    pub fn distances_from(&self, cell: usize) -> Vec<f64> {
        self.distances_from_seeds(&[(cell, 0.0)])
    }

    /// Grid path length between two points, without the straight-line floor.
    pub fn path_length(&self, p: &Point, q: &Point) -> Option<f64> {
        let field = self.distances_from_seeds(&self.attach(p));
        let d = exit_cost(&field, &self.attach(q));
        d.is_finite().then_some(d)
    }
}

fn exit_cost(field: &[f64], attachment: &[(usize, f64)]) -> f64 {
    attachment
        .iter()
        .map(|&(c, off)| field[c] + off)
        .fold(f64::INFINITY, f64::min)
}

fn floored(grid: f64, euclid: f64) -> f64 {
    if grid.is_finite() {
        grid.max(euclid)
    } else {
        f64::INFINITY
    }
}

/// Pairwise geodesic distances between points of the plan.
///
/// Symmetric with zero diagonal; disconnected pairs get `f64::INFINITY`.
/// Rows are computed independently, so the result does not depend on the
/// thread schedule.
pub fn geodesic_distances(
    plan: &FloorPlan,
    points: &[Point],
    resolution: f64,
) -> Result<DMatrix<f64>> {
    let grid = OccupancyGrid::new(plan, resolution)?;
    if let Some(i) = points.iter().position(|p| !plan.contains(p)) {
        return Err(Error::InvalidParameter(format!(
            "point {i} ({}, {}) is outside the free region",
            points[i].x, points[i].y
        )));
    }
    let attachments: Vec<Vec<(usize, f64)>> = points.iter().map(|p| grid.attach(p)).collect();
    if let Some(i) = attachments.iter().position(|a| a.is_empty()) {
        return Err(Error::Unreachable(format!(
            "no free grid cell for point {i}"
        )));
    }
    let n = points.len();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let field = grid.distances_from_seeds(&attachments[i]);
            ((i + 1)..n)
                .map(|j| {
                    floored(
                        exit_cost(&field, &attachments[j]),
                        points[i].dist(&points[j]),
                    )
                })
                .collect()
        })
        .collect();
    // grid paths are not exactly symmetric in their endpoints; keep the
    // upper triangle and mirror it
    let mut out = DMatrix::zeros(n, n);
    for (i, row) in rows.into_iter().enumerate() {
        for (k, d) in row.into_iter().enumerate() {
            let j = i + 1 + k;
            out[(i, j)] = d;
            out[(j, i)] = d;
        }
    }
    Ok(out)
}

/// Geodesic distance from one fixed source (e.g. a receiver) to any point.
#[derive(Debug, Clone)]
pub struct GeodesicField {
    grid: OccupancyGrid,
    source: Point,
    dist: Vec<f64>,
}

impl GeodesicField {
    /// The source may lie outside the region; it is then snapped to the
    /// nearest free cell.
    pub fn new(plan: &FloorPlan, source: Point, resolution: f64) -> Result<Self> {
        let grid = OccupancyGrid::new(plan, resolution)?;
        let seeds = grid.attach(&source);
        if seeds.is_empty() {
            return Err(Error::Unreachable("grid has no free cell".into()));
        }
        let dist = grid.distances_from_seeds(&seeds);
        Ok(Self { grid, source, dist })
    }

    pub fn distance_to(&self, p: &Point) -> f64 {
        floored(
            exit_cost(&self.dist, &self.grid.attach(p)),
            self.source.dist(p),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::floorplan::{sample_uniform, Polygon, Segment};

    fn walled_square() -> FloorPlan {
        // wall from the bottom edge up to y = 0.7, leaving a gap at the top
        FloorPlan::new(
            Polygon::rect(0.0, 0.0, 1.0, 1.0),
            Vec::new(),
            vec![Segment::new(Point::new(0.5, 0.0), Point::new(0.5, 0.7))],
        )
        .unwrap()
    }

    #[test]
    fn empty_square_close_to_euclidean() {
        let plan = FloorPlan::rectangle(0.0, 0.0, 2.0, 2.0).unwrap();
        let pts = [Point::new(0.3, 0.4), Point::new(1.1, 1.0)];
        let d = geodesic_distances(&plan, &pts, 0.05).unwrap();
        assert!((d[(0, 1)] - 1.0).abs() <= 0.09, "{}", d[(0, 1)]);
        assert_eq!(d[(0, 0)], 0.0);
        assert_eq!(d[(0, 1)], d[(1, 0)]);
    }

    #[test]
    fn wall_forces_detour() {
        let plan = walled_square();
        let pts = [Point::new(0.4, 0.2), Point::new(0.6, 0.2)];
        let d = geodesic_distances(&plan, &pts, 0.02).unwrap();
        let euclid = pts[0].dist(&pts[1]);
        assert!(d[(0, 1)] > euclid + 0.5, "{} vs {}", d[(0, 1)], euclid);
    }

    #[test]
    fn sealed_room_is_unreachable() {
        let plan = FloorPlan::new(
            Polygon::rect(0.0, 0.0, 1.0, 1.0),
            Vec::new(),
            vec![Segment::new(Point::new(0.5, 0.0), Point::new(0.5, 1.0))],
        )
        .unwrap();
        let pts = [Point::new(0.2, 0.5), Point::new(0.8, 0.5)];
        let d = geodesic_distances(&plan, &pts, 0.05).unwrap();
        assert!(d[(0, 1)].is_infinite());
    }

    #[test]
    fn hole_blocks_paths() {
        let plan = FloorPlan::new(
            Polygon::rect(0.0, 0.0, 3.0, 3.0),
            vec![Polygon::rect(1.0, 0.5, 2.0, 3.0 - 1e-9 - 0.5)],
            Vec::new(),
        )
        .unwrap();
        let pts = [Point::new(0.5, 1.5), Point::new(2.5, 1.5)];
        let d = geodesic_distances(&plan, &pts, 0.05).unwrap();
        assert!(d[(0, 1)] > 2.5, "{}", d[(0, 1)]);
    }

    #[test]
    fn snap_outside_point_adds_offset() {
        let plan = FloorPlan::rectangle(0.0, 0.0, 1.0, 1.0).unwrap();
        let grid = OccupancyGrid::new(&plan, 0.1).unwrap();
        let s = grid.snap(&Point::new(-1.0, 0.55)).unwrap();
        let c = grid.center(s.cell);
        assert!((c.x - 0.05).abs() < 1e-12 && (c.y - 0.55).abs() < 1e-12);
        assert!((s.offset - 1.05).abs() < 1e-12);
    }

    #[test]
    fn field_matches_pairwise() {
        let plan = walled_square();
        let src = Point::new(0.25, 0.25);
        let field = GeodesicField::new(&plan, src, 0.02).unwrap();
        let q = Point::new(0.75, 0.3);
        let pair = geodesic_distances(&plan, &[src, q], 0.02).unwrap();
        assert!((field.distance_to(&q) - pair[(0, 1)]).abs() < 1e-12);
    }

    #[test]
    fn no_corner_cutting_through_wall() {
        // diagonal wall; the grid must not slip between blocked cells
        let plan = FloorPlan::new(
            Polygon::rect(0.0, 0.0, 1.0, 1.0),
            Vec::new(),
            vec![Segment::new(Point::new(0.0, 0.0), Point::new(1.0, 1.0))],
        )
        .unwrap();
        let pts = [Point::new(0.2, 0.8), Point::new(0.8, 0.2)];
        let d = geodesic_distances(&plan, &pts, 0.05).unwrap();
        assert!(d[(0, 1)].is_infinite());
    }

    /// Independent reference: Dijkstra on an explicit adjacency list with a
    /// plain O(V^2) frontier scan, on its own rasterization.
    fn dense_reference(plan: &FloorPlan, a: Point, b: Point, res: f64) -> f64 {
        let (lo, hi) = plan.bbox();
        let nx = ((hi.x - lo.x) / res).round() as usize;
        let ny = ((hi.y - lo.y) / res).round() as usize;
        let center = |i: usize, j: usize| {
            Point::new(lo.x + (i as f64 + 0.5) * res, lo.y + (j as f64 + 0.5) * res)
        };
        let mut free = vec![vec![false; ny]; nx];
        for (i, col) in free.iter_mut().enumerate() {
            for (j, cell) in col.iter_mut().enumerate() {
                let c = center(i, j);
                let blo = Point::new(c.x - res / 2.0, c.y - res / 2.0);
                let bhi = Point::new(c.x + res / 2.0, c.y + res / 2.0);
                *cell = plan.in_region(&c) && !plan.walls().iter().any(|w| w.touches_box(blo, bhi));
            }
        }
        let nearest = |p: Point| {
            let mut best = (f64::INFINITY, 0, 0);
            for i in 0..nx {
                for j in 0..ny {
                    if free[i][j] {
                        let d = center(i, j).dist(&p);
                        if d < best.0 {
                            best = (d, i, j);
                        }
                    }
                }
            }
            best
        };
        let (oa, ai, aj) = nearest(a);
        let (ob, bi, bj) = nearest(b);
        let idx = |i: usize, j: usize| i * ny + j;
        let n = nx * ny;
        let mut dist = vec![f64::INFINITY; n];
        let mut done = vec![false; n];
        dist[idx(ai, aj)] = 0.0;
        loop {
            let mut u = usize::MAX;
            let mut best = f64::INFINITY;
            for v in 0..n {
                if !done[v] && dist[v] < best {
                    best = dist[v];
                    u = v;
                }
            }
            if u == usize::MAX {
                break;
            }
            done[u] = true;
            let (ui, uj) = ((u / ny) as isize, (u % ny) as isize);
            for di in -1..=1isize {
                for dj in -1..=1isize {
                    let (vi, vj) = (ui + di, uj + dj);
                    if (di, dj) == (0, 0)
                        || vi < 0
                        || vj < 0
                        || vi >= nx as isize
                        || vj >= ny as isize
                    {
                        continue;
                    }
                    let (vi, vj) = (vi as usize, vj as usize);
                    if !free[vi][vj] {
                        continue;
                    }
                    if di != 0 && dj != 0 && (!free[vi][uj as usize] || !free[ui as usize][vj]) {
                        continue;
                    }
                    let w = res * ((di * di + dj * dj) as f64).sqrt();
                    let v = idx(vi, vj);
                    if dist[u] + w < dist[v] {
                        dist[v] = dist[u] + w;
                    }
                }
            }
        }
        let g = dist[idx(bi, bj)];
        let off = |o: f64| {
            if o > res * std::f64::consts::FRAC_1_SQRT_2 {
                o
            } else {
                0.0
            }
        };
        (off(oa) + g + off(ob)).max(a.dist(&b))
    }

    #[test]
    fn three_points_match_fine_grid_reference() {
        let plan = walled_square();
        let pts = [
            Point::new(0.3, 0.2),
            Point::new(0.7, 0.15),
            Point::new(0.55, 0.9),
        ];
        let res = 0.05;
        let d = geodesic_distances(&plan, &pts, res).unwrap();
        for i in 0..3 {
            for j in (i + 1)..3 {
                let reference = dense_reference(&plan, pts[i], pts[j], res / 2.0);
                assert!(
                    (d[(i, j)] - reference).abs() <= 2.0 * res,
                    "({i},{j}): {} vs {}",
                    d[(i, j)],
                    reference
                );
            }
        }
    }

    #[test]
    fn triangle_inequality_with_slack() {
        let plan = walled_square();
        let res = 0.02;
        let s = sample_uniform(&plan, 40, 5).unwrap();
        let d = geodesic_distances(&plan, &s.points, res).unwrap();
        let n = s.len();
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    assert!(d[(i, k)] <= d[(i, j)] + d[(j, k)] + 2.0 * res + 1e-12);
                }
            }
        }
    }

    #[test]
    fn never_shorter_than_straight_line() {
        let plan = walled_square();
        let s = sample_uniform(&plan, 30, 9).unwrap();
        let d = geodesic_distances(&plan, &s.points, 0.03).unwrap();
        for i in 0..s.len() {
            for j in 0..s.len() {
                assert!(d[(i, j)] >= s.points[i].dist(&s.points[j]) - 1e-15);
            }
        }
    }

    #[test]
    fn error_shrinks_with_resolution_without_walls() {
        // axis-aligned and diagonal pairs have no grid anisotropy, so only
        // the discretization error remains
        let plan = FloorPlan::rectangle(0.0, 0.0, 1.0, 1.0).unwrap();
        let pts = [
            Point::new(0.13, 0.21),
            Point::new(0.87, 0.21),
            Point::new(0.13, 0.95),
        ];
        let err = |res: f64| {
            let d = geodesic_distances(&plan, &pts, res).unwrap();
            let grid = OccupancyGrid::new(&plan, res).unwrap();
            let mut worst = 0.0_f64;
            for i in 0..3 {
                for j in (i + 1)..3 {
                    let raw = grid.path_length(&pts[i], &pts[j]).unwrap();
                    worst = worst.max((raw - pts[i].dist(&pts[j])).abs());
                    assert!(d[(i, j)] >= pts[i].dist(&pts[j]));
                }
            }
            worst
        };
        let coarse = err(0.1);
        let fine = err(0.01);
        assert!(fine < coarse, "fine {fine} coarse {coarse}");
        assert!(fine < 0.02, "fine {fine}");
    }

    #[test]
    fn points_outside_region_are_rejected() {
        let plan = walled_square();
        let r = geodesic_distances(&plan, &[Point::new(2.0, 2.0)], 0.05);
        assert!(matches!(r, Err(Error::InvalidParameter(_))));
        let r = geodesic_distances(&plan, &[Point::new(0.5, 0.5)], 0.0);
        assert!(matches!(r, Err(Error::InvalidParameter(_))));
    }
}
