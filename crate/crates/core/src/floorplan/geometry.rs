//! Planar primitives: points, segments, polygons.

use serde::{Deserialize, Serialize};

/// A position in the venue, in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dist(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn dist_sq(&self, other: &Point) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl From<[f64; 2]> for Point {
    fn from(v: [f64; 2]) -> Self {
        Point::new(v[0], v[1])
    }
}

impl From<Point> for [f64; 2] {
    fn from(p: Point) -> Self {
        [p.x, p.y]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub a: Point,
    pub b: Point,
}

impl Segment {
    pub const fn new(a: Point, b: Point) -> Self {
        Self { a, b }
    }

    pub fn length(&self) -> f64 {
        self.a.dist(&self.b)
    }

    pub fn midpoint(&self) -> Point {
        Point::new(0.5 * (self.a.x + self.b.x), 0.5 * (self.a.y + self.b.y))
    }

    /// Euclidean distance from `p` to the closest point of the segment.
    pub fn distance_to(&self, p: &Point) -> f64 {
        let dx = self.b.x - self.a.x;
        let dy = self.b.y - self.a.y;
        let len2 = dx * dx + dy * dy;
        if len2 == 0.0 {
            return self.a.dist(p);
        }
        let t = (((p.x - self.a.x) * dx + (p.y - self.a.y) * dy) / len2).clamp(0.0, 1.0);
        p.dist(&Point::new(self.a.x + t * dx, self.a.y + t * dy))
    }

    /// True when the two closed segments share at least one point.
    pub fn intersects(&self, other: &Segment) -> bool {
        let (p1, p2, p3, p4) = (self.a, self.b, other.a, other.b);
        let d1 = orient(p3, p4, p1);
        let d2 = orient(p3, p4, p2);
        let d3 = orient(p1, p2, p3);
        let d4 = orient(p1, p2, p4);
        if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
            && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
        {
            return true;
        }
        (d1 == 0.0 && on_segment(p3, p4, p1))
            || (d2 == 0.0 && on_segment(p3, p4, p2))
            || (d3 == 0.0 && on_segment(p1, p2, p3))
            || (d4 == 0.0 && on_segment(p1, p2, p4))
    }

    /// Parameter interval `[t0, t1]` of the segment inside the closed
    /// axis-aligned box, or `None` when they do not meet (Liang-Barsky).
    pub fn clip_to_box(&self, lo: Point, hi: Point) -> Option<(f64, f64)> {
        let dx = self.b.x - self.a.x;
        let dy = self.b.y - self.a.y;
        let mut t0 = 0.0_f64;
        let mut t1 = 1.0_f64;
        for (p, q) in [
            (-dx, self.a.x - lo.x),
            (dx, hi.x - self.a.x),
            (-dy, self.a.y - lo.y),
            (dy, hi.y - self.a.y),
        ] {
            if p == 0.0 {
                if q < 0.0 {
                    return None;
                }
            } else {
                let r = q / p;
                if p < 0.0 {
                    t0 = t0.max(r);
                } else {
                    t1 = t1.min(r);
                }
            }
        }
        (t0 <= t1).then_some((t0, t1))
    }

    /// True when the segment touches the closed box.
    pub fn touches_box(&self, lo: Point, hi: Point) -> bool {
        self.clip_to_box(lo, hi).is_some()
    }

    /// True when the segment passes through the open interior of the box.
    ///
    /// The clipped piece of a segment lies either in one face of the box or
    /// has its relative interior in the open box, so testing the midpoint of
    /// the clipped piece is exact.
    pub fn crosses_box_interior(&self, lo: Point, hi: Point) -> bool {
        match self.clip_to_box(lo, hi) {
            None => false,
            Some((t0, t1)) => {
                let t = 0.5 * (t0 + t1);
                let x = self.a.x + t * (self.b.x - self.a.x);
                let y = self.a.y + t * (self.b.y - self.a.y);
                x > lo.x && x < hi.x && y > lo.y && y < hi.y
            }
        }
    }
}

fn orient(a: Point, b: Point, c: Point) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

fn on_segment(a: Point, b: Point, p: Point) -> bool {
    p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
}

/// Closed polygon given by its vertex ring; the closing edge is implicit.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    vertices: Vec<Point>,
}

impl Polygon {
    pub fn new(mut vertices: Vec<Point>) -> Self {
        if vertices.len() > 1 && vertices.first() == vertices.last() {
            vertices.pop();
        }
        Self { vertices }
    }

    pub fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self::new(vec![
            Point::new(x0, y0),
            Point::new(x1, y0),
            Point::new(x1, y1),
            Point::new(x0, y1),
        ])
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn edges(&self) -> impl Iterator<Item = Segment> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| Segment::new(self.vertices[i], self.vertices[(i + 1) % n]))
    }

    /// Shoelace area, positive for counter-clockwise rings.
    pub fn signed_area(&self) -> f64 {
        self.edges()
            .map(|e| e.a.x * e.b.y - e.b.x * e.a.y)
            .sum::<f64>()
            * 0.5
    }

    pub fn area(&self) -> f64 {
        self.signed_area().abs()
    }

    /// Even-odd ray casting. Boundary points may land on either side.
    pub fn contains(&self, p: &Point) -> bool {
        let mut inside = false;
        let n = self.vertices.len();
        let mut j = n.wrapping_sub(1);
        for i in 0..n {
            let vi = self.vertices[i];
            let vj = self.vertices[j];
            if (vi.y > p.y) != (vj.y > p.y) {
                let x_cross = vj.x + (p.y - vj.y) / (vi.y - vj.y) * (vi.x - vj.x);
                if p.x < x_cross {
                    inside = !inside;
                }
            }
            j = i;
        }
        inside
    }

    pub fn boundary_distance(&self, p: &Point) -> f64 {
        self.edges()
            .map(|e| e.distance_to(p))
            .fold(f64::INFINITY, f64::min)
    }

    /// No two non-adjacent edges meet, and adjacent edges meet only at
    /// their shared vertex.
    pub fn is_simple(&self) -> bool {
        let edges: Vec<Segment> = self.edges().collect();
        let n = edges.len();
        if n < 3 {
            return false;
        }
        for i in 0..n {
            for j in (i + 1)..n {
                let adjacent = j == i + 1 || (i == 0 && j == n - 1);
                if adjacent {
                    // Collinear backtracking shows up as an overlap longer
                    // than the shared vertex.
                    let (e, f) = (edges[i], edges[j]);
                    let shared = if j == i + 1 { e.b } else { e.a };
                    let other_e = if shared == e.a { e.b } else { e.a };
                    let other_f = if shared == f.a { f.b } else { f.a };
                    if orient(shared, other_e, other_f) == 0.0
                        && (other_e.x - shared.x) * (other_f.x - shared.x)
                            + (other_e.y - shared.y) * (other_f.y - shared.y)
                            > 0.0
                    {
                        return false;
                    }
                } else if edges[i].intersects(&edges[j]) {
                    return false;
                }
            }
        }
        true
    }

    pub fn bbox(&self) -> (Point, Point) {
        let mut lo = Point::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for v in &self.vertices {
            lo.x = lo.x.min(v.x);
            lo.y = lo.y.min(v.y);
            hi.x = hi.x.max(v.x);
            hi.y = hi.y.max(v.y);
        }
        (lo, hi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn crossing_and_touching_segments() {
        let s = Segment::new(Point::new(0.0, 0.0), Point::new(1.0, 1.0));
        let t = Segment::new(Point::new(0.0, 1.0), Point::new(1.0, 0.0));
        assert!(s.intersects(&t));
        let u = Segment::new(Point::new(1.0, 1.0), Point::new(2.0, 0.0));
        assert!(s.intersects(&u));
        let v = Segment::new(Point::new(2.0, 2.0), Point::new(3.0, 3.0));
        assert!(!s.intersects(&v));
    }

    #[test]
    fn box_interior_vs_border() {
        let lo = Point::new(0.0, 0.0);
        let hi = Point::new(1.0, 1.0);
        let border = Segment::new(Point::new(1.0, -1.0), Point::new(1.0, 2.0));
        assert!(border.touches_box(lo, hi));
        assert!(!border.crosses_box_interior(lo, hi));
        let through = Segment::new(Point::new(-1.0, 0.5), Point::new(2.0, 0.5));
        assert!(through.crosses_box_interior(lo, hi));
        let miss = Segment::new(Point::new(2.0, 0.0), Point::new(2.0, 1.0));
        assert!(!miss.touches_box(lo, hi));
    }

    #[test]
    fn polygon_area_and_containment() {
        let sq = Polygon::rect(0.0, 0.0, 2.0, 1.0);
        assert_eq!(sq.area(), 2.0);
        assert!(sq.contains(&Point::new(1.0, 0.5)));
        assert!(!sq.contains(&Point::new(2.5, 0.5)));
        assert!(sq.is_simple());
    }

    #[test]
    fn bowtie_is_not_simple() {
        let bowtie = Polygon::new(vec![
            Point::new(0.0, 0.0),
            Point::new(1.0, 1.0),
            Point::new(1.0, 0.0),
            Point::new(0.0, 1.0),
        ]);
        assert!(!bowtie.is_simple());
    }

    #[test]
    fn closing_vertex_is_dropped() {
        let p = Polygon::new(vec![
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(0.0, 1.0),
            Point::new(0.0, 0.0),
        ]);
        assert_eq!(p.vertices().len(), 3);
    }
}
