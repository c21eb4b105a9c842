//! Escape-time estimation of bounded-orbit sets, their grid components, and
//! continuation tracing of stable and unstable leaves.
//!
//! A point belongs to the k-bounded set of a base point when the metric gap
//! of the two orbits stays below `k` for every iterate up to the horizon.
//! Leaves are traced by continuation: erect a transversal at each step and
//! relocate the point whose escape time is maximal (midpoint of the
//! no-escape plateau, ties broken by the terminal metric value). Tracing
//! anchors membership to the base orbit, so the traced curve cannot drift
//! off the leaf; the price is that the extent is limited by the membership
//! bound, which is reported as truncation metadata.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{CrossingReport, Point, Polyline, Window};
use crate::maps::PlaneMap;
use crate::metrics::LyapunovMetric;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Forward,
    Backward,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stability {
    Stable,
    Unstable,
}

impl Stability {
    /// Stable membership is tested along forward iterates, unstable along
    /// backward ones.
    pub fn escape_direction(self) -> Direction {
        match self {
            Stability::Stable => Direction::Forward,
            Stability::Unstable => Direction::Backward,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EscapeValue {
    Escaped(u32),
    NoEscape,
}

impl EscapeValue {
    pub fn is_no_escape(self) -> bool {
        matches!(self, EscapeValue::NoEscape)
    }
}

/// Least `n <= n_max` with `U(f^n(x), f^n(y)) > k` in the given direction
/// (n = 0 included), else `NoEscape`. Iterate overflow counts as escape at
/// the step where it occurs.
pub fn escape_time(
    metric: &LyapunovMetric,
    map: &PlaneMap,
    x: Point,
    y: Point,
    k: f64,
    n_max: u32,
    direction: Direction,
) -> Result<EscapeValue> {
    if !(k > 0.0) || n_max < 1 {
        return Err(Error::InvalidInput("need k > 0 and n_max >= 1"));
    }
    let orbit = BaseOrbit::new(map, x, n_max, direction)?;
    Ok(orbit.score(metric, map, y, k).to_escape_value(n_max))
}

/// Base orbit cached once so repeated membership probes against the same
/// base pay for one orbit only.
struct BaseOrbit {
    pts: Vec<Point>,
    direction: Direction,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Score {
    /// First step with a metric gap above the bound; `n_max + 1` encodes
    /// no escape within the horizon.
    rank: u32,
    /// Metric gap at the stopping step; smaller is closer to the leaf.
    tie_u: f64,
}

impl Score {
    fn better_than(&self, other: &Score) -> bool {
        self.rank > other.rank || (self.rank == other.rank && self.tie_u < other.tie_u)
    }

    fn to_escape_value(self, n_max: u32) -> EscapeValue {
        if self.rank > n_max {
            EscapeValue::NoEscape
        } else {
            EscapeValue::Escaped(self.rank)
        }
    }
}

impl BaseOrbit {
    fn new(map: &PlaneMap, base: Point, n_max: u32, direction: Direction) -> Result<Self> {
        let mut pts = Vec::with_capacity(n_max as usize + 1);
        let mut p = base;
        pts.push(p);
        for _ in 0..n_max {
            p = match direction {
                Direction::Forward => map.forward(p)?,
                Direction::Backward => map.inverse(p)?,
            };
            pts.push(p);
        }
        Ok(BaseOrbit { pts, direction })
    }

    fn score(&self, metric: &LyapunovMetric, map: &PlaneMap, y: Point, k: f64) -> Score {
        let n_max = (self.pts.len() - 1) as u32;
        let mut q = y;
        let mut last_u = f64::INFINITY;
        for n in 0..=n_max {
            let u = metric.u(self.pts[n as usize], q).unwrap_or(f64::INFINITY);
            if u > k {
                return Score { rank: n, tie_u: u };
            }
            last_u = u;
            if n < n_max {
                let step = match self.direction {
                    Direction::Forward => map.forward(q),
                    Direction::Backward => map.inverse(q),
                };
                match step {
                    Ok(next) => q = next,
                    // Iterate overflow counts as escape at the next step.
                    Err(_) => {
                        return Score {
                            rank: n + 1,
                            tie_u: f64::INFINITY,
                        }
                    }
                }
            }
        }
        Score {
            rank: n_max + 1,
            tie_u: last_u,
        }
    }
}

/// Rectangular node lattice: `min + (i*spacing, j*spacing)`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GridSpec {
    pub window: Window,
    pub spacing: f64,
}

impl GridSpec {
    pub fn shape(&self) -> (usize, usize) {
        let nx = ((self.window.max.x1 - self.window.min.x1) / self.spacing).round() as usize + 1;
        let ny = ((self.window.max.x2 - self.window.min.x2) / self.spacing).round() as usize + 1;
        (nx, ny)
    }

    pub fn node(&self, i: usize, j: usize) -> Point {
        Point::new(
            self.window.min.x1 + i as f64 * self.spacing,
            self.window.min.x2 + j as f64 * self.spacing,
        )
    }

    pub fn nearest_node(&self, p: Point) -> (usize, usize) {
        let (nx, ny) = self.shape();
        let i = ((p.x1 - self.window.min.x1) / self.spacing).round();
        let j = ((p.x2 - self.window.min.x2) / self.spacing).round();
        (
            (i.max(0.0) as usize).min(nx - 1),
            (j.max(0.0) as usize).min(ny - 1),
        )
    }
}

/// Per-node first escape step against a fixed base orbit.
#[derive(Debug, Clone, Serialize)]
pub struct EscapeTimeField {
    pub grid: GridSpec,
    pub base: Point,
    pub k: f64,
    pub n_max: u32,
    pub direction: Direction,
    pub nx: usize,
    pub ny: usize,
    /// Row-major `j * nx + i`.
    pub values: Vec<EscapeValue>,
}

impl EscapeTimeField {
    pub fn value(&self, i: usize, j: usize) -> EscapeValue {
        self.values[j * self.nx + i]
    }

    /// CSV rows `x1,x2,escape_n` with `-1` encoding no escape.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("x1,x2,escape_n\n");
        for j in 0..self.ny {
            for i in 0..self.nx {
                let p = self.grid.node(i, j);
                let v = match self.value(i, j) {
                    EscapeValue::Escaped(n) => n as i64,
                    EscapeValue::NoEscape => -1,
                };
                s.push_str(&format!("{},{},{}\n", p.x1, p.x2, v));
            }
        }
        s
    }
}

pub fn escape_time_field(
    metric: &LyapunovMetric,
    map: &PlaneMap,
    x: Point,
    k: f64,
    n_max: u32,
    direction: Direction,
    grid: GridSpec,
) -> Result<EscapeTimeField> {
    if !(k > 0.0) || n_max < 1 || !(grid.spacing > 0.0) {
        return Err(Error::InvalidInput("bad escape-field parameters"));
    }
    let orbit = BaseOrbit::new(map, x, n_max, direction)?;
    let (nx, ny) = grid.shape();
    let values: Vec<EscapeValue> = (0..nx * ny)
        .into_par_iter()
        .map(|idx| {
            let (i, j) = (idx % nx, idx / nx);
            orbit
                .score(metric, map, grid.node(i, j), k)
                .to_escape_value(n_max)
        })
        .collect();
    Ok(EscapeTimeField {
        grid,
        base: x,
        k,
        n_max,
        direction,
        nx,
        ny,
        values,
    })
}

/// Connected grid component (4-connectivity) of no-escape nodes containing
/// the node nearest the base point.
#[derive(Debug, Clone, Serialize)]
pub struct GridComponent {
    pub grid: GridSpec,
    pub base_node: (usize, usize),
    pub nodes: Vec<(usize, usize)>,
}

impl GridComponent {
    pub fn points(&self) -> Vec<Point> {
        self.nodes.iter().map(|&(i, j)| self.grid.node(i, j)).collect()
    }

    pub fn contains_node(&self, node: (usize, usize)) -> bool {
        self.nodes.binary_search(&node).is_ok()
    }
}

pub fn k_stable_component(
    metric: &LyapunovMetric,
    map: &PlaneMap,
    x: Point,
    k: f64,
    n_max: u32,
    grid: GridSpec,
) -> Result<GridComponent> {
    if !grid.window.contains(x) {
        return Err(Error::InvalidInput("base point outside grid window"));
    }
    let field = escape_time_field(metric, map, x, k, n_max, Direction::Forward, grid)?;
    let (nx, ny) = (field.nx, field.ny);
    let start = grid.nearest_node(x);
    if !field.value(start.0, start.1).is_no_escape() {
        return Err(Error::EmptyComponent);
    }
    let mut seen = vec![false; nx * ny];
    let mut queue = std::collections::VecDeque::new();
    let mut nodes = Vec::new();
    seen[start.1 * nx + start.0] = true;
    queue.push_back(start);
    while let Some((i, j)) = queue.pop_front() {
        nodes.push((i, j));
        let mut push = |ii: usize, jj: usize, seen: &mut Vec<bool>, queue: &mut std::collections::VecDeque<(usize, usize)>| {
            if !seen[jj * nx + ii] && field.value(ii, jj).is_no_escape() {
                seen[jj * nx + ii] = true;
                queue.push_back((ii, jj));
            }
        };
        if i > 0 {
            push(i - 1, j, &mut seen, &mut queue);
        }
        if i + 1 < nx {
            push(i + 1, j, &mut seen, &mut queue);
        }
        if j > 0 {
            push(i, j - 1, &mut seen, &mut queue);
        }
        if j + 1 < ny {
            push(i, j + 1, &mut seen, &mut queue);
        }
    }
    nodes.sort_unstable();
    Ok(GridComponent {
        grid,
        base_node: start,
        nodes,
    })
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TraceParams {
    /// Membership bound for the no-escape test.
    pub k: f64,
    /// Iterate horizon of the membership test.
    pub n_max: u32,
    /// Continuation step; the transversal has length `2 * step`.
    pub step: f64,
    /// Total arclength cap, split evenly between the two directions.
    pub arclength_budget: f64,
    pub window: Window,
}

impl Default for TraceParams {
    fn default() -> Self {
        TraceParams {
            k: 1.0,
            n_max: 40,
            step: 0.02,
            arclength_budget: 256.0,
            window: Window::default(),
        }
    }
}

/// Truncation metadata of a traced leaf.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TraceTruncation {
    pub k: f64,
    pub n_max: u32,
    pub step: f64,
    /// The trace stopped against the membership bound rather than window or
    /// budget in at least one direction.
    pub hit_membership_edge: bool,
    pub hit_window_edge: bool,
    pub hit_budget: bool,
}

/// Oriented polyline approximating a stable or unstable leaf through a base
/// point, with the truncation parameters it was traced under.
#[derive(Debug, Clone, Serialize)]
pub struct LeafCurve {
    pub base: Point,
    pub stability: Stability,
    pub polyline: Polyline,
    pub truncation: TraceTruncation,
}

impl LeafCurve {
    /// Worst membership ratio `max_n U(f^n(base), f^n(v)) / k` over sampled
    /// vertices; at most 1.0 by construction, and at most 1.05 for curves
    /// whose vertices were produced by images of a traced leaf.
    pub fn membership_deviation(
        &self,
        metric: &LyapunovMetric,
        map: &PlaneMap,
        sample_stride: usize,
    ) -> Result<f64> {
        let dir = self.stability.escape_direction();
        let orbit = BaseOrbit::new(map, self.base, self.truncation.n_max, dir)?;
        let mut worst = 0.0f64;
        for v in self.polyline.vertices().iter().step_by(sample_stride.max(1)) {
            let score = orbit.score(metric, map, *v, self.truncation.k);
            if score.rank <= self.truncation.n_max {
                // Escaped: report the overshoot ratio at the escape step.
                worst = worst.max(score.tie_u / self.truncation.k);
            } else {
                worst = worst.max(1.0f64.min(score.tie_u / self.truncation.k));
            }
        }
        Ok(worst)
    }
}

struct Tracer<'a> {
    metric: &'a LyapunovMetric,
    map: &'a PlaneMap,
    orbit: BaseOrbit,
    k: f64,
    n_max: u32,
}

impl<'a> Tracer<'a> {
    fn score(&self, y: Point) -> Score {
        self.orbit.score(self.metric, self.map, y, self.k)
    }

    fn no_escape(&self, s: &Score) -> bool {
        s.rank > self.n_max
    }

    /// Best-scoring point on the segment `center + s * half` for
    /// `s in [-1, 1]`: coarse scan plus golden-section refinement of the
    /// escape-time peak, which lands on the midpoint of the no-escape
    /// plateau as the plateau collapses.
    fn refine_on_segment(&self, center: Point, half: Point) -> (Point, Score) {
        let eval = |s: f64| {
            let p = center + half * s;
            (p, self.score(p))
        };
        let coarse = 16usize;
        let mut best = eval(-1.0);
        let mut best_s = -1.0f64;
        for i in 1..=coarse {
            let s = -1.0 + 2.0 * i as f64 / coarse as f64;
            let cand = eval(s);
            if cand.1.better_than(&best.1) {
                best = cand;
                best_s = s;
            }
        }
        let width = 2.0 / coarse as f64;
        let (mut lo, mut hi) = (best_s - width, best_s + width);
        const INV_PHI: f64 = 0.618_033_988_749_894_8;
        for _ in 0..72 {
            let m1 = hi - (hi - lo) * INV_PHI;
            let m2 = lo + (hi - lo) * INV_PHI;
            let c1 = eval(m1);
            let c2 = eval(m2);
            if c1.1.better_than(&c2.1) {
                hi = m2;
                if c1.1.better_than(&best.1) {
                    best = c1;
                }
            } else {
                lo = m1;
                if c2.1.better_than(&best.1) {
                    best = c2;
                }
            }
            if hi - lo < 1e-15 {
                break;
            }
        }
        best
    }

    /// Direction of maximal escape time on the circle of the given radius.
    fn best_direction(&self, base: Point, radius: f64) -> Option<(f64, Score)> {
        let eval = |theta: f64| {
            let p = base + Point::new(theta.cos(), theta.sin()) * radius;
            self.score(p)
        };
        let coarse = 360usize;
        let tau = std::f64::consts::TAU;
        let mut best_theta = 0.0;
        let mut best = eval(0.0);
        for i in 1..coarse {
            let theta = tau * i as f64 / coarse as f64;
            let s = eval(theta);
            if s.better_than(&best) {
                best = s;
                best_theta = theta;
            }
        }
        let width = tau / coarse as f64;
        let (mut lo, mut hi) = (best_theta - width, best_theta + width);
        const INV_PHI: f64 = 0.618_033_988_749_894_8;
        for _ in 0..48 {
            let m1 = hi - (hi - lo) * INV_PHI;
            let m2 = lo + (hi - lo) * INV_PHI;
            let s1 = eval(m1);
            let s2 = eval(m2);
            if s1.better_than(&s2) {
                hi = m2;
                if s1.better_than(&best) {
                    best = s1;
                    best_theta = m1;
                }
            } else {
                lo = m1;
                if s2.better_than(&best) {
                    best = s2;
                    best_theta = m2;
                }
            }
        }
        Some((best_theta, best))
    }
}

/// Trace the stable or unstable leaf through `x` by transversal continuation.
pub fn trace_leaf(
    metric: &LyapunovMetric,
    map: &PlaneMap,
    x: Point,
    stability: Stability,
    params: &TraceParams,
) -> Result<LeafCurve> {
    if !(params.step > 0.0) {
        return Err(Error::InvalidInput("step must be positive"));
    }
    if !params.window.contains(x) {
        return Err(Error::InvalidInput("base point outside window"));
    }
    let tracer = Tracer {
        metric,
        map,
        orbit: BaseOrbit::new(map, x, params.n_max, stability.escape_direction())?,
        k: params.k,
        n_max: params.n_max,
    };

    let base_score = tracer.score(x);
    if !tracer.no_escape(&base_score) {
        return Err(Error::LeafLost);
    }
    let Some((theta, first_score)) = tracer.best_direction(x, params.step) else {
        return Err(Error::LeafLost);
    };
    if !tracer.no_escape(&first_score) {
        return Err(Error::LeafLost);
    }
    let tangent = Point::new(theta.cos(), theta.sin());

    let mut truncation = TraceTruncation {
        k: params.k,
        n_max: params.n_max,
        step: params.step,
        hit_membership_edge: false,
        hit_window_edge: false,
        hit_budget: false,
    };
    let half_budget = 0.5 * params.arclength_budget;

    let mut trace_direction = |dir: Point| -> Vec<Point> {
        let mut pts: Vec<Point> = Vec::new();
        let mut prev = x;
        let mut tangent = dir;
        let mut arclen = 0.0f64;
        while arclen < half_budget {
            let cand = prev + tangent * params.step;
            let normal = Point::new(-tangent.x2, tangent.x1) * params.step;
            let (point, score) = tracer.refine_on_segment(cand, normal);
            if !tracer.no_escape(&score) {
                truncation.hit_membership_edge = true;
                break;
            }
            if !params.window.contains(point) {
                truncation.hit_window_edge = true;
                break;
            }
            arclen += point.dist(prev);
            tangent = (point - prev) * (1.0 / point.dist(prev));
            pts.push(point);
            prev = point;
        }
        if arclen >= half_budget {
            truncation.hit_budget = true;
        }
        pts
    };

    let forward_pts = trace_direction(tangent);
    let backward_pts = trace_direction(tangent * -1.0);
    if forward_pts.is_empty() && backward_pts.is_empty() {
        return Err(Error::LeafLost);
    }

    let mut vertices: Vec<Point> = backward_pts.into_iter().rev().collect();
    vertices.push(x);
    vertices.extend(forward_pts);
    vertices.dedup();
    let polyline = Polyline::new(vertices)?;

    Ok(LeafCurve {
        base: x,
        stability,
        polyline,
        truncation,
    })
}

/// Crossing report of a stable leaf against an unstable one. The transversal
/// foliation contract makes the count 0 or 1; 1 exactly when both leaves
/// fully cross the shared window.
pub fn leaf_pair_intersection(
    stable: &LeafCurve,
    unstable: &LeafCurve,
) -> Result<CrossingReport> {
    crate::geometry::crossing_points(&stable.polyline, &unstable.polyline)
}

/// Diagnostic scan counting locally bounded sectors around a point: the
/// number of circularly contiguous direction runs whose escape time reaches
/// the observed maximum. Regular points show 2 (one leaf through the point);
/// 3 or more flags a singular point, which the supported hypotheses exclude.
pub fn singular_sector_scan(
    metric: &LyapunovMetric,
    map: &PlaneMap,
    x: Point,
    stability: Stability,
    k: f64,
    n_max: u32,
    radius: f64,
    directions: usize,
) -> Result<usize> {
    if directions < 8 || !(radius > 0.0) {
        return Err(Error::InvalidInput("bad sector-scan parameters"));
    }
    let orbit = BaseOrbit::new(map, x, n_max, stability.escape_direction())?;
    let tau = std::f64::consts::TAU;
    let ranks: Vec<u32> = (0..directions)
        .map(|i| {
            let theta = tau * i as f64 / directions as f64;
            let p = x + Point::new(theta.cos(), theta.sin()) * radius;
            orbit.score(metric, map, p, k).rank
        })
        .collect();
    // Mark directions whose escape time stands well above the generic level
    // of the circle; each leaf arc through the point produces one such run.
    let mut sorted = ranks.clone();
    sorted.sort_unstable();
    let baseline = sorted[directions / 4];
    let threshold = baseline + 3;
    let marked: Vec<bool> = ranks.iter().map(|&r| r >= threshold).collect();
    if marked.iter().all(|&m| m) || marked.iter().all(|&m| !m) {
        return Ok(1);
    }
    // Count circular runs of marked directions.
    let mut runs = 0usize;
    for i in 0..directions {
        let prev = marked[(i + directions - 1) % directions];
        if marked[i] && !prev {
            runs += 1;
        }
    }
    Ok(runs)
}
