//! Planar primitives: points, oriented polylines, transversal crossing counts,
//! and parity-based separation predicates.
//!
//! Separation is decided by crossing parity along the straight segment joining
//! the query points, not by global topology. The parity proxy is exact when
//! the curve properly spans the window containing the query points; queries
//! that cannot be decided inside the sampled window return
//! [`Error::Inconclusive`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Angle threshold below which a transversal crossing is treated as a
/// degenerate overlap rather than a crossing.
const PARALLEL_SIN_TOL: f64 = 1e-12;

/// Distance tolerance for "point lies on the curve" tests.
pub const ON_CURVE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x1: f64,
    pub x2: f64,
}

impl Point {
    pub const fn new(x1: f64, x2: f64) -> Self {
        Self { x1, x2 }
    }

    pub fn is_finite(&self) -> bool {
        self.x1.is_finite() && self.x2.is_finite()
    }

    pub fn dist(&self, other: Point) -> f64 {
        (self.x1 - other.x1).hypot(self.x2 - other.x2)
    }
}

impl std::ops::Add for Point {
    type Output = Point;
    fn add(self, rhs: Point) -> Point {
        Point::new(self.x1 + rhs.x1, self.x2 + rhs.x2)
    }
}

impl std::ops::Sub for Point {
    type Output = Point;
    fn sub(self, rhs: Point) -> Point {
        Point::new(self.x1 - rhs.x1, self.x2 - rhs.x2)
    }
}

impl std::ops::Mul<f64> for Point {
    type Output = Point;
    fn mul(self, s: f64) -> Point {
        Point::new(self.x1 * s, self.x2 * s)
    }
}

/// Axis-aligned window. Defaults to `[-64, 64]^2`, which covers the
/// desk-scale experiments with expansion constant 2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub min: Point,
    pub max: Point,
}

impl Default for Window {
    fn default() -> Self {
        Window {
            min: Point::new(-64.0, -64.0),
            max: Point::new(64.0, 64.0),
        }
    }
}

impl Window {
    pub fn new(min: Point, max: Point) -> Self {
        Window { min, max }
    }

    pub fn contains(&self, p: Point) -> bool {
        p.x1 >= self.min.x1 && p.x1 <= self.max.x1 && p.x2 >= self.min.x2 && p.x2 <= self.max.x2
    }

    pub fn diameter(&self) -> f64 {
        self.min.dist(self.max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct BBox {
    xmin: f64,
    xmax: f64,
    ymin: f64,
    ymax: f64,
}

impl BBox {
    fn of_segment(a: Point, b: Point) -> Self {
        BBox {
            xmin: a.x1.min(b.x1),
            xmax: a.x1.max(b.x1),
            ymin: a.x2.min(b.x2),
            ymax: a.x2.max(b.x2),
        }
    }

    fn of_points(pts: impl Iterator<Item = Point>) -> Self {
        let mut b = BBox {
            xmin: f64::INFINITY,
            xmax: f64::NEG_INFINITY,
            ymin: f64::INFINITY,
            ymax: f64::NEG_INFINITY,
        };
        for p in pts {
            b.xmin = b.xmin.min(p.x1);
            b.xmax = b.xmax.max(p.x1);
            b.ymin = b.ymin.min(p.x2);
            b.ymax = b.ymax.max(p.x2);
        }
        b
    }

    fn overlaps(&self, other: &BBox) -> bool {
        self.xmin <= other.xmax
            && other.xmin <= self.xmax
            && self.ymin <= other.ymax
            && other.ymin <= self.ymax
    }
}

/// Sign of the orientation of the triangle `(a, b, c)`: `+1` when `c` lies to
/// the left of the directed line `a -> b`, `-1` to the right, `0` collinear.
/// Backed by an adaptive exact predicate, so grid-aligned inputs classify
/// without epsilon tuning.
pub fn orient_sign(a: Point, b: Point, c: Point) -> i8 {
    let v = robust::orient2d(
        robust::Coord { x: a.x1, y: a.x2 },
        robust::Coord { x: b.x1, y: b.x2 },
        robust::Coord { x: c.x1, y: c.x2 },
    );
    if v > 0.0 {
        1
    } else if v < 0.0 {
        -1
    } else {
        0
    }
}

fn dot(a: Point, b: Point) -> f64 {
    a.x1 * b.x1 + a.x2 * b.x2
}

fn cross(a: Point, b: Point) -> f64 {
    a.x1 * b.x2 - a.x2 * b.x1
}

pub fn point_segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let ab = b - a;
    let len2 = dot(ab, ab);
    if len2 == 0.0 {
        return p.dist(a);
    }
    let t = (dot(p - a, ab) / len2).clamp(0.0, 1.0);
    p.dist(a + ab * t)
}

/// An oriented polyline with at least two vertices. Construction validates
/// finiteness, consecutive-vertex distinctness, and absence of
/// self-intersection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polyline {
    vertices: Vec<Point>,
    closed: bool,
}

impl Polyline {
    pub fn new(vertices: Vec<Point>) -> Result<Self> {
        if vertices.len() < 2 {
            return Err(Error::InvalidInput("polyline needs at least two vertices"));
        }
        for v in &vertices {
            if !v.is_finite() {
                return Err(Error::NonFinite);
            }
        }
        for w in vertices.windows(2) {
            if w[0] == w[1] {
                return Err(Error::InvalidInput(
                    "consecutive polyline vertices must be distinct",
                ));
            }
        }
        let line = Polyline {
            vertices,
            closed: false,
        };
        line.check_simple()?;
        Ok(line)
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn first(&self) -> Point {
        self.vertices[0]
    }

    pub fn last(&self) -> Point {
        *self.vertices.last().unwrap()
    }

    pub fn segment_count(&self) -> usize {
        self.vertices.len() - 1
    }

    pub fn segment(&self, i: usize) -> (Point, Point) {
        (self.vertices[i], self.vertices[i + 1])
    }

    pub fn arclength(&self) -> f64 {
        self.vertices.windows(2).map(|w| w[0].dist(w[1])).sum()
    }

    /// Arclength from the first vertex to the point `(seg, t)`.
    pub fn arclength_to(&self, seg: usize, t: f64) -> f64 {
        let mut s = 0.0;
        for i in 0..seg {
            s += self.vertices[i].dist(self.vertices[i + 1]);
        }
        s + self.vertices[seg].dist(self.vertices[seg + 1]) * t
    }

    pub fn bbox_min(&self) -> Point {
        let b = BBox::of_points(self.vertices.iter().copied());
        Point::new(b.xmin, b.ymin)
    }

    pub fn bbox_max(&self) -> Point {
        let b = BBox::of_points(self.vertices.iter().copied());
        Point::new(b.xmax, b.ymax)
    }

    pub fn distance_to_point(&self, p: Point) -> f64 {
        self.vertices
            .windows(2)
            .map(|w| point_segment_distance(p, w[0], w[1]))
            .fold(f64::INFINITY, f64::min)
    }

    /// Locate `p` on the polyline: segment index and parameter of the nearest
    /// polyline point.
    pub fn project(&self, p: Point) -> (usize, f64, f64) {
        let mut best = (0usize, 0.0f64, f64::INFINITY);
        for i in 0..self.segment_count() {
            let (a, b) = self.segment(i);
            let ab = b - a;
            let len2 = dot(ab, ab);
            let t = if len2 == 0.0 {
                0.0
            } else {
                (dot(p - a, ab) / len2).clamp(0.0, 1.0)
            };
            let d = p.dist(a + ab * t);
            if d < best.2 {
                best = (i, t, d);
            }
        }
        best
    }

    /// Apply a pointwise transformation; the image is re-validated.
    pub fn map_points(&self, f: impl Fn(Point) -> Result<Point>) -> Result<Polyline> {
        let mut out = Vec::with_capacity(self.vertices.len());
        for &v in &self.vertices {
            out.push(f(v)?);
        }
        // Collapse consecutive duplicates the image map may create.
        out.dedup();
        Polyline::new(out)
    }

    /// CSV serialization: header `x1,x2`, one vertex per row.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("x1,x2\n");
        for v in &self.vertices {
            s.push_str(&format!("{},{}\n", v.x1, v.x2));
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Polyline> {
        let mut vertices = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || (i == 0 && line.starts_with("x1")) {
                continue;
            }
            let mut cols = line.split(',');
            let x1 = cols
                .next()
                .and_then(|c| c.trim().parse::<f64>().ok())
                .ok_or(Error::InvalidInput("bad csv row"))?;
            let x2 = cols
                .next()
                .and_then(|c| c.trim().parse::<f64>().ok())
                .ok_or(Error::InvalidInput("bad csv row"))?;
            vertices.push(Point::new(x1, x2));
        }
        Polyline::new(vertices)
    }

    fn check_simple(&self) -> Result<()> {
        // Adjacent segments may only share the common vertex; a fold-back
        // (collinear reversal) counts as self-contact.
        for i in 0..self.segment_count().saturating_sub(1) {
            let (a, b) = self.segment(i);
            let (_, c) = self.segment(i + 1);
            if orient_sign(a, b, c) == 0 && dot(b - a, c - b) < 0.0 {
                return Err(Error::InvalidInput("polyline folds back on itself"));
            }
        }
        let order = sort_segments_by_xmin(self);
        for idx in 0..order.len() {
            let i = order[idx].1;
            let (a0, a1) = self.segment(i);
            let bb_i = BBox::of_segment(a0, a1);
            for &(xmin_j, j) in order.iter().skip(idx + 1) {
                if xmin_j > bb_i.xmax {
                    break;
                }
                if i.abs_diff(j) <= 1 {
                    continue;
                }
                let (b0, b1) = self.segment(j);
                if !bb_i.overlaps(&BBox::of_segment(b0, b1)) {
                    continue;
                }
                if segments_interact(a0, a1, b0, b1) {
                    return Err(Error::InvalidInput("polyline self-intersects"));
                }
            }
        }
        Ok(())
    }
}

fn sort_segments_by_xmin(line: &Polyline) -> Vec<(f64, usize)> {
    let mut order: Vec<(f64, usize)> = (0..line.segment_count())
        .map(|i| {
            let (a, b) = line.segment(i);
            (a.x1.min(b.x1), i)
        })
        .collect();
    order.sort_by(|p, q| p.0.total_cmp(&q.0));
    order
}

/// True when the two segments share any point (proper crossing, touch, or
/// overlap). Used for the simplicity check only.
fn segments_interact(a0: Point, a1: Point, b0: Point, b1: Point) -> bool {
    let o1 = orient_sign(a0, a1, b0);
    let o2 = orient_sign(a0, a1, b1);
    let o3 = orient_sign(b0, b1, a0);
    let o4 = orient_sign(b0, b1, a1);
    if o1 != o2 && o3 != o4 {
        return true;
    }
    let on = |p: Point, a: Point, b: Point| {
        orient_sign(a, b, p) == 0
            && p.x1 >= a.x1.min(b.x1)
            && p.x1 <= a.x1.max(b.x1)
            && p.x2 >= a.x2.min(b.x2)
            && p.x2 <= a.x2.max(b.x2)
    };
    on(b0, a0, a1) || on(b1, a0, a1) || on(a0, b0, b1) || on(a1, b0, b1)
}

/// Transversal crossings of one polyline with another, in order along the
/// first, with the side-change sign at each crossing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossingReport {
    pub count: usize,
    pub points: Vec<Point>,
    /// Side of `a` that `b` ends up on after each crossing (`+1` left,
    /// `-1` right of `a`'s local direction).
    pub parities: Vec<i8>,
}

#[derive(Debug, Clone, Copy)]
struct RawEvent {
    point: Point,
    /// Position along `a` for ordering.
    seg_a: usize,
    t_a: f64,
    proper: bool,
    /// Side sign for proper crossings (side of `b`'s segment end).
    parity: i8,
}

/// All transversal intersection points of `a` and `b`, ordered along `a`.
///
/// Vertex-on-segment contacts count as crossings only when the other curve
/// changes side locally; touch-and-retreat contacts are ignored. Collinear
/// overlapping segments and near-parallel crossings (angle below 1e-12) are
/// [`Error::DegenerateOverlap`]. Shared endpoints of the two polylines are
/// rejected up front.
pub fn crossing_points(a: &Polyline, b: &Polyline) -> Result<CrossingReport> {
    for &pa in [a.first(), a.last()].iter() {
        for &pb in [b.first(), b.last()].iter() {
            if pa == pb {
                return Err(Error::SharedEndpoint(pa));
            }
        }
    }

    let scale = 1.0
        + a.vertices()
            .iter()
            .chain(b.vertices())
            .map(|p| p.x1.abs().max(p.x2.abs()))
            .fold(0.0, f64::max);
    let merge_tol = 1e-12 * scale;

    let order_b = sort_segments_by_xmin(b);
    let mut events: Vec<RawEvent> = Vec::new();

    for i in 0..a.segment_count() {
        let (a0, a1) = a.segment(i);
        let bb_a = BBox::of_segment(a0, a1);
        for &(xmin_j, j) in &order_b {
            if xmin_j > bb_a.xmax {
                break;
            }
            let (b0, b1) = b.segment(j);
            if !bb_a.overlaps(&BBox::of_segment(b0, b1)) {
                continue;
            }
            classify_pair(a0, a1, i, b0, b1, &mut events)?;
        }
    }

    events.sort_by(|p, q| (p.seg_a, p.t_a).partial_cmp(&(q.seg_a, q.t_a)).unwrap());

    // Merge events that describe the same geometric point (a crossing at a
    // shared vertex is reported by every adjacent segment pair).
    let mut merged: Vec<RawEvent> = Vec::new();
    for ev in events {
        match merged.last_mut() {
            Some(last) if last.point.dist(ev.point) <= merge_tol => {
                last.proper = last.proper || ev.proper;
                if ev.proper {
                    last.parity = ev.parity;
                }
            }
            _ => merged.push(ev),
        }
    }

    let mut points = Vec::new();
    let mut parities = Vec::new();
    for ev in merged {
        if ev.proper {
            points.push(ev.point);
            parities.push(ev.parity);
        } else if let Some(parity) = touch_side_change(a, b, ev.point)? {
            points.push(ev.point);
            parities.push(parity);
        }
    }

    Ok(CrossingReport {
        count: points.len(),
        points,
        parities,
    })
}

fn classify_pair(
    a0: Point,
    a1: Point,
    seg_a: usize,
    b0: Point,
    b1: Point,
    events: &mut Vec<RawEvent>,
) -> Result<()> {
    let o1 = orient_sign(a0, a1, b0);
    let o2 = orient_sign(a0, a1, b1);
    let o3 = orient_sign(b0, b1, a0);
    let o4 = orient_sign(b0, b1, a1);

    if o1 != o2 && o3 != o4 && o1 != 0 && o2 != 0 && o3 != 0 && o4 != 0 {
        let u = a1 - a0;
        let v = b1 - b0;
        let denom = cross(u, v);
        let sin_angle = denom.abs() / (u.x1.hypot(u.x2) * v.x1.hypot(v.x2));
        let t = cross(b0 - a0, v) / denom;
        let p = a0 + u * t;
        if sin_angle < PARALLEL_SIN_TOL {
            return Err(Error::DegenerateOverlap(p));
        }
        events.push(RawEvent {
            point: p,
            seg_a,
            t_a: t.clamp(0.0, 1.0),
            proper: true,
            parity: o2,
        });
        return Ok(());
    }

    if o1 == 0 && o2 == 0 {
        // Collinear pair: overlap in more than a point is degenerate.
        let u = a1 - a0;
        let proj = |p: Point| dot(p - a0, u);
        let (s0, s1) = (proj(b0).min(proj(b1)), proj(b0).max(proj(b1)));
        let (r0, r1) = (0.0f64.min(dot(u, u)), 0.0f64.max(dot(u, u)));
        if s1.min(r1) - s0.max(r0) > 0.0 {
            return Err(Error::DegenerateOverlap(a0));
        }
        if s1.min(r1) - s0.max(r0) == 0.0 {
            let touch = if proj(b0) == s1.min(r1) || proj(b0) == s0.max(r0) {
                b0
            } else {
                b1
            };
            if between(touch, a0, a1) {
                events.push(touch_event(touch, seg_a, a0, a1));
            }
        }
        return Ok(());
    }

    // Some endpoint lies exactly on the other segment: record a touch.
    for (p, on_a) in [(b0, o1 == 0), (b1, o2 == 0)] {
        if on_a && between(p, a0, a1) {
            events.push(touch_event(p, seg_a, a0, a1));
        }
    }
    for (p, on_b) in [(a0, o3 == 0), (a1, o4 == 0)] {
        if on_b && between(p, b0, b1) {
            events.push(touch_event(p, seg_a, a0, a1));
        }
    }
    Ok(())
}

fn between(p: Point, a: Point, b: Point) -> bool {
    p.x1 >= a.x1.min(b.x1)
        && p.x1 <= a.x1.max(b.x1)
        && p.x2 >= a.x2.min(b.x2)
        && p.x2 <= a.x2.max(b.x2)
}

fn touch_event(p: Point, seg_a: usize, a0: Point, a1: Point) -> RawEvent {
    let u = a1 - a0;
    let len2 = dot(u, u);
    let t = if len2 == 0.0 { 0.0 } else { dot(p - a0, u) / len2 };
    RawEvent {
        point: p,
        seg_a,
        t_a: t.clamp(0.0, 1.0),
        proper: false,
        parity: 0,
    }
}

/// Decide whether `b` changes side of `a` at the contact point `p`.
/// Returns the side `b` ends up on, or `None` for a graze.
fn touch_side_change(a: &Polyline, b: &Polyline, p: Point) -> Result<Option<i8>> {
    let tol = ON_CURVE_TOL;

    // Segments of `a` supporting the contact.
    let mut support: Vec<(Point, Point)> = Vec::new();
    for i in 0..a.segment_count() {
        let (s0, s1) = a.segment(i);
        if point_segment_distance(p, s0, s1) <= tol {
            support.push((s0, s1));
        }
    }
    if support.is_empty() {
        return Ok(None);
    }

    let side_of = |q: Point| -> Result<i8> {
        let seg = support
            .iter()
            .min_by(|s, t| {
                point_segment_distance(q, s.0, s.1).total_cmp(&point_segment_distance(q, t.0, t.1))
            })
            .unwrap();
        let s = orient_sign(seg.0, seg.1, q);
        if s == 0 {
            return Err(Error::DegenerateOverlap(p));
        }
        Ok(s)
    };

    // Index on `b` nearest the contact.
    let (jp, t, d) = b.project(p);
    if d > tol {
        return Ok(None);
    }
    let verts = b.vertices();
    let (mut back, mut fwd) = if t <= 0.0 {
        (jp.wrapping_sub(1), jp + 1)
    } else if t >= 1.0 {
        (jp, jp + 2)
    } else {
        (jp, jp + 1)
    };

    // Walk outward to the first vertices strictly off `a`; a whole stretch of
    // `b` lying along `a` is an overlap.
    let q_before = loop {
        let Some(&v) = back.checked_sub(0).and_then(|i| verts.get(i)) else {
            return Ok(None); // b terminates on a: not a transversal crossing
        };
        if a.distance_to_point(v) > tol {
            break v;
        }
        if v.dist(p) > 4.0 * tol {
            return Err(Error::DegenerateOverlap(p));
        }
        if back == 0 {
            return Ok(None);
        }
        back -= 1;
    };
    let q_after = loop {
        let Some(&v) = verts.get(fwd) else {
            return Ok(None);
        };
        if a.distance_to_point(v) > tol {
            break v;
        }
        if v.dist(p) > 4.0 * tol {
            return Err(Error::DegenerateOverlap(p));
        }
        fwd += 1;
    };

    let s_before = side_of(q_before)?;
    let s_after = side_of(q_after)?;
    if s_before != s_after {
        Ok(Some(s_after))
    } else {
        Ok(None)
    }
}

/// Whether `curve` separates `p` from `q`, decided by the parity of crossings
/// of the straight segment `pq` with the curve.
pub fn separates(curve: &Polyline, p: Point, q: Point) -> Result<bool> {
    if !p.is_finite() || !q.is_finite() {
        return Err(Error::NonFinite);
    }
    if curve.distance_to_point(p) <= ON_CURVE_TOL || curve.distance_to_point(q) <= ON_CURVE_TOL {
        return Err(Error::Inconclusive("query point lies on the curve"));
    }
    check_curve_spans_window(curve, &[p, q])?;
    let seg = Polyline::new(vec![p, q])?;
    let report = crossing_points(&seg, curve)?;
    Ok(report.count % 2 == 1)
}

/// The curve must exit the window spanned jointly by itself and the query
/// points; an endpoint strictly inside that window means the parity proxy
/// cannot be trusted between the queries.
fn check_curve_spans_window(curve: &Polyline, queries: &[Point]) -> Result<()> {
    let bb = BBox::of_points(curve.vertices().iter().copied().chain(queries.iter().copied()));
    let eps = 1e-9 * (1.0 + (bb.xmax - bb.xmin).hypot(bb.ymax - bb.ymin));
    for e in [curve.first(), curve.last()] {
        let on_edge = (e.x1 - bb.xmin).abs() <= eps
            || (bb.xmax - e.x1).abs() <= eps
            || (e.x2 - bb.ymin).abs() <= eps
            || (bb.ymax - e.x2).abs() <= eps;
        if !on_edge {
            return Err(Error::Inconclusive("curve terminates inside the window"));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RegionMembership {
    Inside,
    Outside,
    Boundary,
}

/// Classify `p` against the region bounded below/above by two disjoint proper
/// curves, by crossing parity against each boundary curve.
pub fn region_between_membership(
    lower: &Polyline,
    upper: &Polyline,
    p: Point,
    boundary_tol: f64,
) -> Result<RegionMembership> {
    if !p.is_finite() {
        return Err(Error::NonFinite);
    }
    if lower.distance_to_point(p) <= boundary_tol || upper.distance_to_point(p) <= boundary_tol {
        return Ok(RegionMembership::Boundary);
    }
    let rep_low = lower.vertices()[lower.vertices().len() / 2];
    let rep_up = upper.vertices()[upper.vertices().len() / 2];
    let cut_by_lower = separates(lower, p, rep_up)?;
    let cut_by_upper = separates(upper, p, rep_low)?;
    if !cut_by_lower && !cut_by_upper {
        Ok(RegionMembership::Inside)
    } else {
        Ok(RegionMembership::Outside)
    }
}

/// Largest distance from any of `points` to the polyline (discrete one-sided
/// Hausdorff distance).
pub fn max_min_distance(points: &[Point], target: &Polyline) -> f64 {
    points
        .iter()
        .map(|&p| target.distance_to_point(p))
        .fold(0.0, f64::max)
}
