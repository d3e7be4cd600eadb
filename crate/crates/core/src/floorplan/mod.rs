//! Venue geometry: the region a device can occupy, uniform sampling over it,
//! and obstacle-aware distances.

mod geodesic;
mod geometry;

pub use geodesic::{geodesic_distances, GeodesicField, OccupancyGrid};
pub use geometry::{Point, Polygon, Segment};

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Distance below which a point counts as lying on a boundary or wall.
const ON_LINE_TOL: f64 = 1e-12;

/// Polygonal venue with holes (pillars, shafts) and zero-thickness interior
/// walls. All coordinates in meters.
#[derive(Debug, Clone, PartialEq)]
pub struct FloorPlan {
    outer: Polygon,
    holes: Vec<Polygon>,
    walls: Vec<Segment>,
}

/// On-disk layout of a floor plan.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct FloorPlanFile {
    outer: Vec<[f64; 2]>,
    #[serde(default)]
    holes: Vec<Vec<[f64; 2]>>,
    #[serde(default)]
    walls: Vec<[[f64; 2]; 2]>,
}

impl FloorPlan {
    /// Validates and builds a plan.
    pub fn new(outer: Polygon, holes: Vec<Polygon>, walls: Vec<Segment>) -> Result<Self> {
        let all_finite = outer
            .vertices()
            .iter()
            .chain(holes.iter().flat_map(|h| h.vertices()))
            .chain(walls.iter().flat_map(|w| [&w.a, &w.b]))
            .all(Point::is_finite);
        if !all_finite {
            return Err(Error::InvalidPlan("non-finite coordinate".into()));
        }
        if !outer.is_simple() {
            return Err(Error::InvalidPlan(
                "outer boundary is not a simple polygon".into(),
            ));
        }
        if outer.area() == 0.0 {
            return Err(Error::EmptyRegion);
        }
        for (i, hole) in holes.iter().enumerate() {
            if !hole.is_simple() || hole.area() == 0.0 {
                return Err(Error::InvalidPlan(format!(
                    "hole {i} is not a simple polygon"
                )));
            }
            let inside = hole.vertices().iter().all(|v| outer.contains(v))
                && !hole
                    .edges()
                    .any(|e| outer.edges().any(|o| o.intersects(&e)));
            if !inside {
                return Err(Error::InvalidPlan(format!(
                    "hole {i} is not inside the outer boundary"
                )));
            }
            for (j, other) in holes.iter().enumerate().skip(i + 1) {
                let overlap = hole
                    .edges()
                    .any(|e| other.edges().any(|o| o.intersects(&e)))
                    || hole.vertices().iter().any(|v| other.contains(v))
                    || other.vertices().iter().any(|v| hole.contains(v));
                if overlap {
                    return Err(Error::InvalidPlan(format!("holes {i} and {j} overlap")));
                }
            }
        }
        let plan = Self {
            outer,
            holes,
            walls,
        };
        for (i, wall) in plan.walls.iter().enumerate() {
            let ends_inside = plan.in_closed_region(&wall.a) && plan.in_closed_region(&wall.b);
            let mid_inside = plan.in_closed_region(&wall.midpoint());
            let crosses = plan.boundary_edges().any(|e| {
                e.intersects(wall)
                    && e.distance_to(&wall.a) > ON_LINE_TOL
                    && e.distance_to(&wall.b) > ON_LINE_TOL
            });
            if !ends_inside || !mid_inside || crosses {
                return Err(Error::InvalidPlan(format!(
                    "wall {i} leaves the free region"
                )));
            }
        }
        if plan.free_area() <= 0.0 {
            return Err(Error::EmptyRegion);
        }
        Ok(plan)
    }

    /// Axis-aligned rectangle `[x0, x1] x [y0, y1]` with no obstacles.
    pub fn rectangle(x0: f64, y0: f64, x1: f64, y1: f64) -> Result<Self> {
        Self::new(Polygon::rect(x0, y0, x1, y1), Vec::new(), Vec::new())
    }

    /// Same outline and holes, different walls.
    pub fn with_walls(&self, walls: Vec<Segment>) -> Result<Self> {
        Self::new(self.outer.clone(), self.holes.clone(), walls)
    }

    pub fn outer(&self) -> &Polygon {
        &self.outer
    }

    pub fn holes(&self) -> &[Polygon] {
        &self.holes
    }

    pub fn walls(&self) -> &[Segment] {
        &self.walls
    }

    /// Outer and hole edges (not walls).
    pub fn boundary_edges(&self) -> impl Iterator<Item = Segment> + '_ {
        self.outer
            .edges()
            .chain(self.holes.iter().flat_map(|h| h.edges()))
    }

    pub fn bbox(&self) -> (Point, Point) {
        self.outer.bbox()
    }

    pub fn free_area(&self) -> f64 {
        self.outer.area() - self.holes.iter().map(Polygon::area).sum::<f64>()
    }

    /// Default grid resolution: `max(bbox diagonal / 400, 1 cm)`.
    pub fn default_resolution(&self) -> f64 {
        let (lo, hi) = self.bbox();
        (lo.dist(&hi) / 400.0).max(0.01)
    }

    /// Inside the outer boundary and outside every hole; walls ignored.
    pub fn in_region(&self, p: &Point) -> bool {
        self.outer.contains(p) && !self.holes.iter().any(|h| h.contains(p))
    }

    fn in_closed_region(&self, p: &Point) -> bool {
        let on_boundary = self
            .boundary_edges()
            .any(|e| e.distance_to(p) <= ON_LINE_TOL);
        on_boundary || self.in_region(p)
    }

    /// True for points a device may occupy: in the region and not on a wall.
    pub fn contains(&self, p: &Point) -> bool {
        self.in_region(p) && !self.walls.iter().any(|w| w.distance_to(p) <= ON_LINE_TOL)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let file: FloorPlanFile = serde_json::from_str(s)?;
        let to_poly = |v: &[[f64; 2]]| Polygon::new(v.iter().copied().map(Point::from).collect());
        Self::new(
            to_poly(&file.outer),
            file.holes.iter().map(|h| to_poly(h)).collect(),
            file.walls
                .iter()
                .map(|w| Segment::new(w[0].into(), w[1].into()))
                .collect(),
        )
    }

    pub fn to_json_string(&self) -> Result<String> {
        let ring = |p: &Polygon| {
            p.vertices()
                .iter()
                .map(|&v| v.into())
                .collect::<Vec<[f64; 2]>>()
        };
        let file = FloorPlanFile {
            outer: ring(&self.outer),
            holes: self.holes.iter().map(ring).collect(),
            walls: self
                .walls
                .iter()
                .map(|w| [w.a.into(), w.b.into()])
                .collect(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json_string()?)?;
        Ok(())
    }
}

/// Points drawn uniformly over a floor plan, reproducible from the seed.
#[derive(Debug, Clone, PartialEq)]
pub struct AreaSample {
    pub points: Vec<Point>,
    pub rng_seed: u64,
}

impl AreaSample {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Draws `count` i.i.d. uniform points over the free region by rejection
/// from the bounding box.
pub fn sample_uniform(plan: &FloorPlan, count: usize, seed: u64) -> Result<AreaSample> {
    if count == 0 {
        return Err(Error::InvalidParameter(
            "sample count must be positive".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = sample_with_rng(plan, count, &mut rng)?;
    Ok(AreaSample {
        points,
        rng_seed: seed,
    })
}

pub(crate) fn sample_with_rng<R: Rng>(
    plan: &FloorPlan,
    count: usize,
    rng: &mut R,
) -> Result<Vec<Point>> {
    let (lo, hi) = plan.bbox();
    let bbox_area = (hi.x - lo.x) * (hi.y - lo.y);
    let area = plan.free_area();
    if area <= 0.0 || bbox_area <= 0.0 {
        return Err(Error::EmptyRegion);
    }
    // Generous cap on rejections; hitting it means the region is
    // numerically empty even though its nominal area is not.
    let max_tries = ((bbox_area / area).ceil() as usize)
        .saturating_mul(1000)
        .max(10_000);
    let mut points = Vec::with_capacity(count);
    for _ in 0..count {
        let mut tries = 0usize;
        let p = loop {
            let p = Point::new(rng.gen_range(lo.x..hi.x), rng.gen_range(lo.y..hi.y));
            if plan.contains(&p) {
                break p;
            }
            tries += 1;
            if tries > max_tries {
                return Err(Error::EmptyRegion);
            }
        };
        points.push(p);
    }
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square_with_hole() -> FloorPlan {
        FloorPlan::new(
            Polygon::rect(0.0, 0.0, 1.0, 1.0),
            vec![Polygon::rect(0.25, 0.25, 0.75, 0.75)],
            Vec::new(),
        )
        .unwrap()
    }

    #[test]
    fn unit_square_sample_in_bounds() {
        let plan = FloorPlan::rectangle(0.0, 0.0, 1.0, 1.0).unwrap();
        let s = sample_uniform(&plan, 4, 7).unwrap();
        assert_eq!(s.len(), 4);
        for p in &s.points {
            assert!((0.0..=1.0).contains(&p.x) && (0.0..=1.0).contains(&p.y));
        }
    }

    #[test]
    fn sampling_is_reproducible() {
        let plan = FloorPlan::rectangle(0.0, 0.0, 3.0, 2.0).unwrap();
        assert_eq!(
            sample_uniform(&plan, 50, 11).unwrap(),
            sample_uniform(&plan, 50, 11).unwrap()
        );
        assert_ne!(
            sample_uniform(&plan, 50, 11).unwrap(),
            sample_uniform(&plan, 50, 12).unwrap()
        );
    }

    #[test]
    fn hole_is_never_sampled() {
        let plan = square_with_hole();
        assert!((plan.free_area() - 0.75).abs() < 1e-12);
        let s = sample_uniform(&plan, 2000, 3).unwrap();
        for p in &s.points {
            let in_hole = p.x > 0.25 && p.x < 0.75 && p.y > 0.25 && p.y < 0.75;
            assert!(!in_hole, "{p:?} inside hole");
        }
    }

    #[test]
    fn empirical_mean_near_centroid() {
        let plan = FloorPlan::rectangle(0.0, 0.0, 1.0, 1.0).unwrap();
        let s = sample_uniform(&plan, 10_000, 1).unwrap();
        let n = s.len() as f64;
        let mx = s.points.iter().map(|p| p.x).sum::<f64>() / n;
        let my = s.points.iter().map(|p| p.y).sum::<f64>() / n;
        assert!(
            (mx - 0.5).abs() < 0.02 && (my - 0.5).abs() < 0.02,
            "({mx}, {my})"
        );
    }

    #[test]
    fn equal_split_between_congruent_halves() {
        // Binomial(n, 1/2): standard deviation sqrt(n)/2.
        let plan = FloorPlan::rectangle(0.0, 0.0, 2.0, 1.0).unwrap();
        let n = 4000;
        for seed in 0..5 {
            let s = sample_uniform(&plan, n, seed).unwrap();
            let left = s.points.iter().filter(|p| p.x < 1.0).count() as f64;
            let sd = (n as f64).sqrt() / 2.0;
            assert!(
                (left - n as f64 / 2.0).abs() <= 4.0 * sd,
                "seed {seed}: {left}"
            );
        }
    }

    #[test]
    fn zero_count_rejected() {
        let plan = FloorPlan::rectangle(0.0, 0.0, 1.0, 1.0).unwrap();
        assert!(matches!(
            sample_uniform(&plan, 0, 0),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn degenerate_plans_rejected() {
        let flat = Polygon::new(vec![
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(2.0, 0.0),
        ]);
        assert!(FloorPlan::new(flat, Vec::new(), Vec::new()).is_err());
        let outside_hole = FloorPlan::new(
            Polygon::rect(0.0, 0.0, 1.0, 1.0),
            vec![Polygon::rect(2.0, 2.0, 3.0, 3.0)],
            Vec::new(),
        );
        assert!(matches!(outside_hole, Err(Error::InvalidPlan(_))));
        let leaking_wall = FloorPlan::new(
            Polygon::rect(0.0, 0.0, 1.0, 1.0),
            Vec::new(),
            vec![Segment::new(Point::new(0.5, 0.5), Point::new(1.5, 0.5))],
        );
        assert!(matches!(leaking_wall, Err(Error::InvalidPlan(_))));
    }

    #[test]
    fn wall_touching_boundary_is_valid() {
        let plan = FloorPlan::new(
            Polygon::rect(0.0, 0.0, 1.0, 1.0),
            Vec::new(),
            vec![Segment::new(Point::new(0.5, 0.0), Point::new(0.5, 0.7))],
        )
        .unwrap();
        assert!(!plan.contains(&Point::new(0.5, 0.3)));
        assert!(plan.contains(&Point::new(0.5, 0.8)));
    }

    #[test]
    fn json_round_trip() {
        let json = r#"{"outer": [[0,0],[4,0],[4,3],[0,3]],
                       "holes": [[[1,1],[2,1],[2,2],[1,2]]],
                       "walls": [[[3,0],[3,2]]]}"#;
        let plan = FloorPlan::from_json_str(json).unwrap();
        assert_eq!(plan.holes().len(), 1);
        assert_eq!(plan.walls().len(), 1);
        let again = FloorPlan::from_json_str(&plan.to_json_string().unwrap()).unwrap();
        assert_eq!(plan, again);
    }

    #[test]
    fn default_resolution_floor() {
        let small = FloorPlan::rectangle(0.0, 0.0, 1.0, 1.0).unwrap();
        assert_eq!(small.default_resolution(), 0.01);
        let big = FloorPlan::rectangle(0.0, 0.0, 80.0, 60.0).unwrap();
        assert!((big.default_resolution() - 0.25).abs() < 1e-12);
    }
}
