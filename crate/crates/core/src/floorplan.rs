//! Indoor geometry: rooms, walls and access-point placements.
//!
//! A [`FloorPlan`] is immutable after loading and answers the two
//! queries the tracker and simulator need: which room contains a point
//! ([`FloorPlan::room_at`]) and whether a displacement segment crosses
//! a wall ([`FloorPlan::crosses_wall`]). Boundary points count as
//! inside a room and wall-touching counts as crossing, so particles
//! can never tunnel through geometry via edge cases.

use std::collections::BTreeSet;
use std::io::Read;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Identifier of a room. Lexicographic order breaks containment ties.
pub type RoomId = String;
/// Identifier of a WiFi access point.
pub type ApId = String;

/// Collinearity / touching tolerance for geometric predicates, in
/// meters. Plan coordinates are building-scale, so this is far below
/// survey precision.
pub const GEOM_EPS: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum PlanError {
    #[error("malformed floor-plan document: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("i/o error reading floor plan: {0}")]
    Io(#[from] std::io::Error),
    #[error("invalid floor plan: {entity}: {reason}")]
    Validation { entity: String, reason: String },
}

fn invalid(entity: impl Into<String>, reason: impl Into<String>) -> PlanError {
    PlanError::Validation {
        entity: entity.into(),
        reason: reason.into(),
    }
}

/// A point in the floor-plan frame, meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "(f64, f64)", into = "(f64, f64)")]
pub struct Point2D {
    pub x: f64,
    pub y: f64,
}

impl From<(f64, f64)> for Point2D {
    fn from((x, y): (f64, f64)) -> Self {
        Point2D { x, y }
    }
}

impl From<Point2D> for (f64, f64) {
    fn from(p: Point2D) -> Self {
        (p.x, p.y)
    }
}

impl Point2D {
    pub fn new(x: f64, y: f64) -> Self {
        Point2D { x, y }
    }

    pub fn distance(&self, other: &Point2D) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// A wall (or piece of furniture): a segment particles may not cross.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "(Point2D, Point2D)", into = "(Point2D, Point2D)")]
pub struct WallSegment {
    pub a: Point2D,
    pub b: Point2D,
}

impl From<(Point2D, Point2D)> for WallSegment {
    fn from((a, b): (Point2D, Point2D)) -> Self {
        WallSegment { a, b }
    }
}

impl From<WallSegment> for (Point2D, Point2D) {
    fn from(w: WallSegment) -> Self {
        (w.a, w.b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RoomKind {
    Office,
    Corridor,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Room {
    pub id: RoomId,
    pub name: String,
    pub kind: RoomKind,
    /// Closed simple polygon, first vertex not repeated.
    pub vertices: Vec<Point2D>,
}

impl Room {
    pub fn centroid(&self) -> Point2D {
        polygon_centroid(&self.vertices)
    }

    pub fn area(&self) -> f64 {
        polygon_area(&self.vertices).abs()
    }

    pub fn contains(&self, p: &Point2D) -> bool {
        point_in_polygon(p, &self.vertices)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ApPlacement {
    pub id: ApId,
    pub position: Point2D,
}

/// Axis-aligned rectangle in meters.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Bounds {
    pub min: Point2D,
    pub max: Point2D,
}

impl Bounds {
    pub fn contains(&self, p: &Point2D) -> bool {
        p.x >= self.min.x - GEOM_EPS
            && p.x <= self.max.x + GEOM_EPS
            && p.y >= self.min.y - GEOM_EPS
            && p.y <= self.max.y + GEOM_EPS
    }
}

/// Immutable indoor geometry; safe to share across threads after load.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FloorPlan {
    pub bounds: Bounds,
    pub rooms: Vec<Room>,
    pub walls: Vec<WallSegment>,
    pub aps: Vec<ApPlacement>,
}

impl FloorPlan {
    /// Parses and validates a floor-plan document.
    pub fn load(mut source: impl Read) -> Result<FloorPlan, PlanError> {
        let mut buf = String::new();
        source.read_to_string(&mut buf)?;
        let plan: FloorPlan = serde_json::from_str(&buf)?;
        plan.validate()?;
        Ok(plan)
    }

    pub fn load_path(path: impl AsRef<std::path::Path>) -> Result<FloorPlan, PlanError> {
        Self::load(std::fs::File::open(path)?)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("floor plan serializes")
    }

    pub fn validate(&self) -> Result<(), PlanError> {
        if !(self.bounds.min.x < self.bounds.max.x && self.bounds.min.y < self.bounds.max.y) {
            return Err(invalid("bounds", "min must be strictly below max"));
        }
        let mut room_ids = BTreeSet::new();
        for room in &self.rooms {
            if !room_ids.insert(room.id.clone()) {
                return Err(invalid(&room.id, "duplicate room id"));
            }
            if room.vertices.len() < 3 {
                return Err(invalid(&room.id, "polygon needs at least 3 vertices"));
            }
            for v in &room.vertices {
                if !v.is_finite() {
                    return Err(invalid(&room.id, "non-finite vertex"));
                }
                if !self.bounds.contains(v) {
                    return Err(invalid(&room.id, "vertex outside bounds"));
                }
            }
            if !polygon_is_simple(&room.vertices) {
                return Err(invalid(&room.id, "polygon is self-intersecting"));
            }
        }
        for (i, a) in self.rooms.iter().enumerate() {
            for b in self.rooms.iter().skip(i + 1) {
                if rooms_overlap(a, b) {
                    return Err(invalid(
                        &a.id,
                        format!("interior overlaps room {}", b.id),
                    ));
                }
            }
        }
        for (i, w) in self.walls.iter().enumerate() {
            if w.a.distance(&w.b) <= GEOM_EPS {
                return Err(invalid(format!("wall[{i}]"), "zero-length wall"));
            }
            if !self.bounds.contains(&w.a) || !self.bounds.contains(&w.b) {
                return Err(invalid(format!("wall[{i}]"), "wall outside bounds"));
            }
        }
        let mut ap_ids = BTreeSet::new();
        for ap in &self.aps {
            if !ap_ids.insert(ap.id.clone()) {
                return Err(invalid(&ap.id, "duplicate ap id"));
            }
            if !self.bounds.contains(&ap.position) {
                return Err(invalid(&ap.id, "ap outside bounds"));
            }
        }
        Ok(())
    }

    /// The unique room containing `p`. Boundary counts as inside;
    /// shared boundaries resolve to the lexicographically lowest id.
    pub fn room_at(&self, p: &Point2D) -> Option<&RoomId> {
        self.rooms
            .iter()
            .filter(|r| r.contains(p))
            .map(|r| &r.id)
            .min()
    }

    pub fn room(&self, id: &str) -> Option<&Room> {
        self.rooms.iter().find(|r| r.id == id)
    }

    pub fn ap(&self, id: &str) -> Option<&ApPlacement> {
        self.aps.iter().find(|a| a.id == id)
    }

    /// AP ids in their fixed fingerprint ordering (declaration order).
    pub fn ap_order(&self) -> Vec<ApId> {
        self.aps.iter().map(|a| a.id.clone()).collect()
    }

    /// True iff the segment `from`→`to` touches or crosses any wall.
    /// A degenerate segment (`from == to`) crosses iff the point lies
    /// on a wall.
    pub fn crosses_wall(&self, from: &Point2D, to: &Point2D) -> bool {
        self.walls
            .iter()
            .any(|w| segments_intersect(from, to, &w.a, &w.b))
    }

    /// True iff `p` lies inside some room (walkable space).
    pub fn is_allowed(&self, p: &Point2D) -> bool {
        self.room_at(p).is_some()
    }

    pub fn total_room_area(&self) -> f64 {
        self.rooms.iter().map(Room::area).sum()
    }
}

/// Twice the signed area of triangle abc; > 0 for counterclockwise.
fn cross(a: &Point2D, b: &Point2D, c: &Point2D) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

#[derive(PartialEq, Clone, Copy)]
enum Orient {
    Ccw,
    Cw,
    Collinear,
}

fn orient(a: &Point2D, b: &Point2D, c: &Point2D) -> Orient {
    // Scale tolerance with segment extent so long walls stay robust.
    let scale = (b.x - a.x).abs().max((b.y - a.y).abs()).max(1.0);
    let v = cross(a, b, c);
    if v > GEOM_EPS * scale {
        Orient::Ccw
    } else if v < -GEOM_EPS * scale {
        Orient::Cw
    } else {
        Orient::Collinear
    }
}

/// True iff `p` lies on segment ab (collinear and within its extent).
pub fn on_segment(p: &Point2D, a: &Point2D, b: &Point2D) -> bool {
    orient(a, b, p) == Orient::Collinear
        && p.x >= a.x.min(b.x) - GEOM_EPS
        && p.x <= a.x.max(b.x) + GEOM_EPS
        && p.y >= a.y.min(b.y) - GEOM_EPS
        && p.y <= a.y.max(b.y) + GEOM_EPS
}

/// Segment intersection where touching an endpoint or collinear
/// overlap both count as intersecting.
pub fn segments_intersect(p1: &Point2D, p2: &Point2D, q1: &Point2D, q2: &Point2D) -> bool {
    let o1 = orient(p1, p2, q1);
    let o2 = orient(p1, p2, q2);
    let o3 = orient(q1, q2, p1);
    let o4 = orient(q1, q2, p2);

    if o1 != o2 && o3 != o4 && o1 != Orient::Collinear && o2 != Orient::Collinear
        && o3 != Orient::Collinear && o4 != Orient::Collinear
    {
        return true;
    }
    (o1 == Orient::Collinear && on_segment(q1, p1, p2))
        || (o2 == Orient::Collinear && on_segment(q2, p1, p2))
        || (o3 == Orient::Collinear && on_segment(p1, q1, q2))
        || (o4 == Orient::Collinear && on_segment(p2, q1, q2))
}

/// Boundary-inclusive point-in-polygon test.
pub fn point_in_polygon(p: &Point2D, poly: &[Point2D]) -> bool {
    let n = poly.len();
    if n < 3 {
        return false;
    }
    for i in 0..n {
        if on_segment(p, &poly[i], &poly[(i + 1) % n]) {
            return true;
        }
    }
    // Half-open crossing count; boundary cases were handled above.
    let mut inside = false;
    for i in 0..n {
        let a = &poly[i];
        let b = &poly[(i + 1) % n];
        if (a.y > p.y) != (b.y > p.y) {
            let x_cross = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
            if p.x < x_cross {
                inside = !inside;
            }
        }
    }
    inside
}

fn polygon_is_simple(poly: &[Point2D]) -> bool {
    let n = poly.len();
    for i in 0..n {
        let (a1, a2) = (&poly[i], &poly[(i + 1) % n]);
        if a1.distance(a2) <= GEOM_EPS {
            return false; // repeated vertex
        }
        for j in i + 1..n {
            // Skip adjacent edges (they share an endpoint by construction).
            if j == i || (j + 1) % n == i || (i + 1) % n == j {
                continue;
            }
            let (b1, b2) = (&poly[j], &poly[(j + 1) % n]);
            if segments_intersect(a1, a2, b1, b2) {
                return false;
            }
        }
    }
    true
}

/// Approximate interior-overlap test: rooms may share boundary but a
/// vertex or centroid strictly inside the other, or a proper edge
/// crossing, means overlapping interiors.
fn rooms_overlap(a: &Room, b: &Room) -> bool {
    let strictly_inside = |p: &Point2D, poly: &[Point2D]| {
        point_in_polygon(p, poly)
            && !(0..poly.len()).any(|i| on_segment(p, &poly[i], &poly[(i + 1) % poly.len()]))
    };
    if a.vertices.iter().any(|v| strictly_inside(v, &b.vertices))
        || b.vertices.iter().any(|v| strictly_inside(v, &a.vertices))
    {
        return true;
    }
    if strictly_inside(&a.centroid(), &b.vertices) || strictly_inside(&b.centroid(), &a.vertices) {
        return true;
    }
    let na = a.vertices.len();
    let nb = b.vertices.len();
    for i in 0..na {
        for j in 0..nb {
            let (a1, a2) = (&a.vertices[i], &a.vertices[(i + 1) % na]);
            let (b1, b2) = (&b.vertices[j], &b.vertices[(j + 1) % nb]);
            // Proper crossing only: touching shared boundary is fine.
            let o1 = orient(a1, a2, b1);
            let o2 = orient(a1, a2, b2);
            let o3 = orient(b1, b2, a1);
            let o4 = orient(b1, b2, a2);
            if o1 != o2 && o3 != o4 && o1 != Orient::Collinear && o2 != Orient::Collinear
                && o3 != Orient::Collinear && o4 != Orient::Collinear
            {
                return true;
            }
        }
    }
    false
}

pub fn polygon_area(poly: &[Point2D]) -> f64 {
    let n = poly.len();
    let mut s = 0.0;
    for i in 0..n {
        let a = &poly[i];
        let b = &poly[(i + 1) % n];
        s += a.x * b.y - b.x * a.y;
    }
    s / 2.0
}

pub fn polygon_centroid(poly: &[Point2D]) -> Point2D {
    let a = polygon_area(poly);
    if a.abs() < GEOM_EPS {
        // Degenerate: fall back to vertex mean.
        let n = poly.len() as f64;
        return Point2D::new(
            poly.iter().map(|p| p.x).sum::<f64>() / n,
            poly.iter().map(|p| p.y).sum::<f64>() / n,
        );
    }
    let n = poly.len();
    let (mut cx, mut cy) = (0.0, 0.0);
    for i in 0..n {
        let p = &poly[i];
        let q = &poly[(i + 1) % n];
        let w = p.x * q.y - q.x * p.y;
        cx += (p.x + q.x) * w;
        cy += (p.y + q.y) * w;
    }
    Point2D::new(cx / (6.0 * a), cy / (6.0 * a))
}
