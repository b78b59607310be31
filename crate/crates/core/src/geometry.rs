//! Planar polygon primitives.
//!
//! Every text box, word or character, is a simple polygon in image pixel
//! coordinates with the origin at the top-left corner and `y` growing
//! downward. Polygons are validated once on construction; afterwards area,
//! centroid and a triangulation are cached so overlap queries only pay for
//! clipping.
//!
//! Intersections of arbitrary simple polygons are computed by triangulating
//! both operands (ear clipping) and summing the areas of all pairwise
//! triangle/triangle clips. Triangles are convex, so each clip is a plain
//! Sutherland-Hodgman pass.

use std::cmp::Ordering;
use std::fmt;

use thiserror::Error;

/// Absolute slack used when deciding whether three points are collinear.
const COLLINEAR_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("polygon needs at least 3 vertices, got {0}")]
    TooFewVertices(usize),
    #[error("vertex {index} is not finite ({x}, {y})")]
    NonFinite { index: usize, x: f64, y: f64 },
    #[error("polygon has zero area")]
    Degenerate,
    #[error("polygon is self-intersecting")]
    SelfIntersecting,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }
}

impl From<(f64, f64)> for Point {
    fn from((x, y): (f64, f64)) -> Self {
        Point { x, y }
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// Axis-aligned bounds, used to skip clipping for pairs that cannot overlap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub min: Point,
    pub max: Point,
}

impl Bounds {
    fn of(points: &[Point]) -> Self {
        let mut min = Point::new(f64::INFINITY, f64::INFINITY);
        let mut max = Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in points {
            min.x = min.x.min(p.x);
            min.y = min.y.min(p.y);
            max.x = max.x.max(p.x);
            max.y = max.y.max(p.y);
        }
        Bounds { min, max }
    }

    /// True when the interiors can overlap (touching edges do not count).
    pub fn overlaps(&self, other: &Bounds) -> bool {
        self.min.x < other.max.x && other.min.x < self.max.x && self.min.y < other.max.y && other.min.y < self.max.y
    }
}

/// A validated simple polygon with nonzero area.
///
/// The vertex list is kept exactly as given so it can be written back out;
/// derived quantities are computed from a counter-clockwise copy.
#[derive(Debug, Clone)]
pub struct Polygon {
    vertices: Vec<Point>,
    triangles: Vec<[Point; 3]>,
    area: f64,
    centroid: Point,
    bounds: Bounds,
}

impl PartialEq for Polygon {
    fn eq(&self, other: &Self) -> bool {
        self.vertices == other.vertices
    }
}

impl Polygon {
    pub fn new(vertices: Vec<Point>) -> Result<Self, GeometryError> {
        if vertices.len() < 3 {
            return Err(GeometryError::TooFewVertices(vertices.len()));
        }
        for (index, p) in vertices.iter().enumerate() {
            if !p.x.is_finite() || !p.y.is_finite() {
                return Err(GeometryError::NonFinite { index, x: p.x, y: p.y });
            }
        }

        let signed = signed_area(&vertices);
        if signed.abs() <= COLLINEAR_EPS {
            // Zero net area is either a flat ring or lobes cancelling out.
            return Err(if all_collinear(&vertices) {
                GeometryError::Degenerate
            } else {
                GeometryError::SelfIntersecting
            });
        }
        let mut ring = vertices.clone();
        if signed < 0.0 {
            ring.reverse();
        }
        let ring = clean_ring(ring)?;
        if ring.len() < 3 {
            return Err(GeometryError::Degenerate);
        }
        if !is_simple(&ring) {
            return Err(GeometryError::SelfIntersecting);
        }

        let area = signed.abs();
        let centroid = area_centroid(&ring);
        let triangles = triangulate(&ring);
        let bounds = Bounds::of(&ring);
        Ok(Polygon {
            vertices,
            triangles,
            area,
            centroid,
            bounds,
        })
    }

    /// Axis-aligned rectangle from its left/top/right/bottom edges, listed
    /// clockwise in image coordinates starting at the top-left corner.
    pub fn rect(left: f64, top: f64, right: f64, bottom: f64) -> Result<Self, GeometryError> {
        Polygon::new(vec![
            Point::new(left, top),
            Point::new(right, top),
            Point::new(right, bottom),
            Point::new(left, bottom),
        ])
    }

    pub fn from_coords(coords: &[(f64, f64)]) -> Result<Self, GeometryError> {
        Polygon::new(coords.iter().copied().map(Point::from).collect())
    }

    /// Vertices in input order.
    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn bounds(&self) -> Bounds {
        self.bounds
    }

    pub fn area(&self) -> f64 {
        self.area
    }

    pub fn centroid(&self) -> Point {
        self.centroid
    }

    /// Distance from the image's top-left corner to the centroid.
    pub fn origin_distance(&self) -> f64 {
        self.centroid.norm()
    }

    /// Returns the same polygon moved by `(dx, dy)`.
    pub fn translate(&self, dx: f64, dy: f64) -> Polygon {
        let moved = |p: &Point| Point::new(p.x + dx, p.y + dy);
        Polygon {
            vertices: self.vertices.iter().map(moved).collect(),
            triangles: self
                .triangles
                .iter()
                .map(|t| [moved(&t[0]), moved(&t[1]), moved(&t[2])])
                .collect(),
            area: self.area,
            centroid: moved(&self.centroid),
            bounds: Bounds {
                min: moved(&self.bounds.min),
                max: moved(&self.bounds.max),
            },
        }
    }

    // Total order on polygons, used only to make intersection evaluation
    // independent of argument order.
    fn canonical_cmp(&self, other: &Polygon) -> Ordering {
        let a = self.vertices.iter().flat_map(|p| [p.x, p.y]);
        let b = other.vertices.iter().flat_map(|p| [p.x, p.y]);
        a.map(f64::to_bits).cmp(b.map(f64::to_bits))
    }
}

pub fn area(p: &Polygon) -> f64 {
    p.area()
}

pub fn centroid(p: &Polygon) -> Point {
    p.centroid()
}

pub fn origin_distance(p: &Polygon) -> f64 {
    p.origin_distance()
}

/// Area of the geometric intersection of two polygons.
///
/// Symmetric bit-for-bit in its arguments and clamped to
/// `[0, min(area(a), area(b))]`.
pub fn intersection_area(a: &Polygon, b: &Polygon) -> f64 {
    if !a.bounds.overlaps(&b.bounds) {
        return 0.0;
    }
    let (first, second) = match a.canonical_cmp(b) {
        Ordering::Greater => (b, a),
        _ => (a, b),
    };
    let mut total = 0.0;
    for ta in &first.triangles {
        let ba = Bounds::of(ta);
        for tb in &second.triangles {
            if !ba.overlaps(&Bounds::of(tb)) {
                continue;
            }
            let clipped = clip_convex(ta, tb);
            if clipped.len() >= 3 {
                total += signed_area(&clipped).abs();
            }
        }
    }
    total.clamp(0.0, a.area.min(b.area))
}

/// Intersection over union.
pub fn iou(a: &Polygon, b: &Polygon) -> f64 {
    let inter = intersection_area(a, b);
    let union = a.area + b.area - inter;
    if union <= 0.0 {
        return 0.0;
    }
    (inter / union).clamp(0.0, 1.0)
}

/// Fraction of the ground-truth polygon covered by the detection.
pub fn area_recall(gt: &Polygon, det: &Polygon) -> f64 {
    (intersection_area(gt, det) / gt.area).clamp(0.0, 1.0)
}

/// Fraction of the detection polygon covered by the ground truth.
pub fn area_precision(gt: &Polygon, det: &Polygon) -> f64 {
    (intersection_area(gt, det) / det.area).clamp(0.0, 1.0)
}

/// Whether two polygons overlap by strictly more than `epsilon` px².
pub fn intersects(a: &Polygon, b: &Polygon, epsilon: f64) -> bool {
    intersection_area(a, b) > epsilon
}

fn cross(o: Point, a: Point, b: Point) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

fn signed_area(points: &[Point]) -> f64 {
    let n = points.len();
    let mut sum = 0.0;
    for i in 0..n {
        let p = points[i];
        let q = points[(i + 1) % n];
        sum += p.x * q.y - q.x * p.y;
    }
    sum * 0.5
}

fn area_centroid(ring: &[Point]) -> Point {
    // Shift to the first vertex to keep the cross products small.
    let origin = ring[0];
    let n = ring.len();
    let (mut cx, mut cy, mut a2) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let p = Point::new(ring[i].x - origin.x, ring[i].y - origin.y);
        let j = ring[(i + 1) % n];
        let q = Point::new(j.x - origin.x, j.y - origin.y);
        let c = p.x * q.y - q.x * p.y;
        a2 += c;
        cx += (p.x + q.x) * c;
        cy += (p.y + q.y) * c;
    }
    Point::new(origin.x + cx / (3.0 * a2), origin.y + cy / (3.0 * a2))
}

/// Drops repeated and collinear vertices from a counter-clockwise ring.
/// A vertex where the boundary doubles back on itself is a self-overlap.
fn all_collinear(points: &[Point]) -> bool {
    let a = points[0];
    let Some(&b) = points.iter().find(|p| **p != a) else {
        return true;
    };
    let len = ((b.x - a.x).powi(2) + (b.y - a.y).powi(2)).sqrt();
    points
        .iter()
        .all(|&p| cross(a, b, p).abs() <= COLLINEAR_EPS * len.max(1.0) * (1.0 + (p.x - a.x).abs() + (p.y - a.y).abs()))
}

fn clean_ring(mut ring: Vec<Point>) -> Result<Vec<Point>, GeometryError> {
    ring.dedup();
    while ring.len() > 1 && ring.first() == ring.last() {
        ring.pop();
    }
    let mut changed = true;
    while changed && ring.len() >= 3 {
        changed = false;
        let n = ring.len();
        for i in 0..n {
            let prev = ring[(i + n - 1) % n];
            let cur = ring[i];
            let next = ring[(i + 1) % n];
            let scale =
                (cur.x - prev.x).abs().max((cur.y - prev.y).abs()) * (next.x - cur.x).abs().max((next.y - cur.y).abs());
            if cross(prev, cur, next).abs() <= COLLINEAR_EPS * scale.max(1.0) {
                let dot = (cur.x - prev.x) * (next.x - cur.x) + (cur.y - prev.y) * (next.y - cur.y);
                if dot < 0.0 {
                    return Err(GeometryError::SelfIntersecting);
                }
                ring.remove(i);
                changed = true;
                break;
            }
        }
    }
    Ok(ring)
}

fn on_segment(p: Point, q: Point, r: Point) -> bool {
    r.x >= p.x.min(q.x) && r.x <= p.x.max(q.x) && r.y >= p.y.min(q.y) && r.y <= p.y.max(q.y)
}

fn segments_touch(p1: Point, p2: Point, q1: Point, q2: Point) -> bool {
    let d1 = cross(q1, q2, p1);
    let d2 = cross(q1, q2, p2);
    let d3 = cross(p1, p2, q1);
    let d4 = cross(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    (d1 == 0.0 && on_segment(q1, q2, p1))
        || (d2 == 0.0 && on_segment(q1, q2, p2))
        || (d3 == 0.0 && on_segment(p1, p2, q1))
        || (d4 == 0.0 && on_segment(p1, p2, q2))
}

fn is_simple(ring: &[Point]) -> bool {
    let n = ring.len();
    for i in 0..n {
        let (a1, a2) = (ring[i], ring[(i + 1) % n]);
        for j in (i + 1)..n {
            // Adjacent edges share exactly one endpoint by construction.
            if j == i + 1 || (i == 0 && j == n - 1) {
                continue;
            }
            let (b1, b2) = (ring[j], ring[(j + 1) % n]);
            if segments_touch(a1, a2, b1, b2) {
                return false;
            }
        }
    }
    true
}

fn point_in_triangle(p: Point, a: Point, b: Point, c: Point) -> bool {
    cross(a, b, p) >= 0.0 && cross(b, c, p) >= 0.0 && cross(c, a, p) >= 0.0
}

/// Ear-clipping triangulation of a clean counter-clockwise simple ring.
fn triangulate(ring: &[Point]) -> Vec<[Point; 3]> {
    let mut idx: Vec<usize> = (0..ring.len()).collect();
    let mut out = Vec::with_capacity(ring.len().saturating_sub(2));
    while idx.len() > 3 {
        let n = idx.len();
        let mut ear = None;
        let mut fallback = (0, f64::NEG_INFINITY);
        for k in 0..n {
            let a = ring[idx[(k + n - 1) % n]];
            let b = ring[idx[k]];
            let c = ring[idx[(k + 1) % n]];
            let turn = cross(a, b, c);
            if turn <= 0.0 {
                continue;
            }
            if turn > fallback.1 {
                fallback = (k, turn);
            }
            let blocked = idx.iter().enumerate().any(|(m, &v)| {
                m != k && m != (k + n - 1) % n && m != (k + 1) % n && point_in_triangle(ring[v], a, b, c)
            });
            if !blocked {
                ear = Some(k);
                break;
            }
        }
        // Rounding can hide every ear in near-degenerate rings; the most
        // convex vertex is then the least harmful cut.
        let k = ear.unwrap_or(fallback.0);
        let n = idx.len();
        out.push([ring[idx[(k + n - 1) % n]], ring[idx[k]], ring[idx[(k + 1) % n]]]);
        idx.remove(k);
    }
    if idx.len() == 3 {
        out.push([ring[idx[0]], ring[idx[1]], ring[idx[2]]]);
    }
    out
}

/// Sutherland-Hodgman clip of `subject` against the convex CCW `clip`.
fn clip_convex(subject: &[Point], clip: &[Point; 3]) -> Vec<Point> {
    let mut output = subject.to_vec();
    for i in 0..clip.len() {
        if output.len() < 3 {
            return Vec::new();
        }
        let a = clip[i];
        let b = clip[(i + 1) % clip.len()];
        let input = std::mem::take(&mut output);
        let n = input.len();
        for j in 0..n {
            let s = input[j];
            let e = input[(j + 1) % n];
            let sd = cross(a, b, s);
            let ed = cross(a, b, e);
            let s_in = sd >= 0.0;
            let e_in = ed >= 0.0;
            if s_in != e_in {
                let t = sd / (sd - ed);
                output.push(Point::new(s.x + (e.x - s.x) * t, s.y + (e.y - s.y) * t));
            }
            if e_in {
                output.push(e);
            }
        }
    }
    output
}
