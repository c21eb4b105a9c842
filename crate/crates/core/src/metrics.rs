//! Adapted metrics with stable/unstable component pseudo-metrics.
//!
//! Five constructions are provided. The path-infimum mode discretizes the
//! weighted path integrals directly and exposes their degeneracy (leftward
//! detours make the unstable weight arbitrarily small). The strip-restricted
//! mode confines paths to the vertical strip spanned by the endpoints. The
//! exact-form mode replaces the integrands by exact differentials of
//! `psi(x) = lambda^{-x1}/ln(lambda)` and `phi(x) = lambda^{x1} x2`, which
//! restores the triangle inequality while keeping the scaling identities
//! exact. The Euclidean-split mode pairs with the linear hyperbolic map, and
//! the pullback mode transports a base metric through a conjugating
//! homeomorphism.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::maps::{MapSpec, PlaneMap, OVERFLOW_LIMIT};

/// Floor used in relative deviations to avoid 0/0 on coincident pairs.
pub const RELATIVE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricComponents {
    pub ds: f64,
    pub du: f64,
    pub u: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WeightKind {
    Stable,
    Unstable,
}

/// Parameters of the discretized path family used by the path-infimum mode.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PathFamily {
    /// Total control points including both endpoints (>= 2).
    pub control_points: usize,
    /// How far paths may detour beyond the axis-aligned box of the endpoints.
    pub detour_bound: f64,
    pub restarts: usize,
    pub eval_budget: usize,
    pub seed: u64,
}

impl Default for PathFamily {
    fn default() -> Self {
        PathFamily {
            control_points: 33,
            detour_bound: 0.0,
            restarts: 20,
            eval_budget: 100_000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub enum MetricMode {
    /// Numeric infimum of the discretized path integrals.
    PathInfimum { family: PathFamily },
    /// Closed forms with paths confined to the strip spanned by the endpoints.
    StripRestricted,
    /// Exact-differential forms; the default.
    ExactForm,
    /// `ds = |dx2|`, `du = |dx1|`; pairs with the linear hyperbolic map.
    EuclideanSplit,
    /// Base metric evaluated at conjugator images.
    Pullback {
        conjugator: PlaneMap,
        base: Box<LyapunovMetric>,
    },
}

#[derive(Debug, Clone)]
pub struct LyapunovMetric {
    mode: MetricMode,
    lambda: f64,
}

fn check_lambda(lambda: f64) -> Result<f64> {
    if !(lambda > 1.0) || !lambda.is_finite() {
        return Err(Error::InvalidInput("expansion constant must exceed 1"));
    }
    Ok(lambda)
}

impl LyapunovMetric {
    pub fn exact_form(lambda: f64) -> Result<Self> {
        Ok(LyapunovMetric {
            mode: MetricMode::ExactForm,
            lambda: check_lambda(lambda)?,
        })
    }

    pub fn strip_restricted(lambda: f64) -> Result<Self> {
        Ok(LyapunovMetric {
            mode: MetricMode::StripRestricted,
            lambda: check_lambda(lambda)?,
        })
    }

    pub fn euclidean_split(lambda: f64) -> Result<Self> {
        Ok(LyapunovMetric {
            mode: MetricMode::EuclideanSplit,
            lambda: check_lambda(lambda)?,
        })
    }

    pub fn path_infimum(lambda: f64, family: PathFamily) -> Result<Self> {
        if family.control_points < 2 {
            return Err(Error::InvalidInput("need at least two control points"));
        }
        if !(family.detour_bound >= 0.0) {
            return Err(Error::InvalidInput("detour bound must be non-negative"));
        }
        Ok(LyapunovMetric {
            mode: MetricMode::PathInfimum { family },
            lambda: check_lambda(lambda)?,
        })
    }

    pub fn pullback(conjugator: PlaneMap, base: LyapunovMetric) -> Self {
        let lambda = base.lambda;
        LyapunovMetric {
            mode: MetricMode::Pullback {
                conjugator,
                base: Box::new(base),
            },
            lambda,
        }
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn mode(&self) -> &MetricMode {
        &self.mode
    }

    fn psi(&self, x1: f64) -> f64 {
        self.lambda.powf(-x1) / self.lambda.ln()
    }

    fn phi(&self, p: Point) -> f64 {
        self.lambda.powf(p.x1) * p.x2
    }

    /// Stable component, unstable component, and their sum.
    pub fn components(&self, p: Point, q: Point) -> Result<MetricComponents> {
        if !p.is_finite() || !q.is_finite() {
            return Err(Error::NonFinite);
        }
        let (ds, du) = match &self.mode {
            MetricMode::StripRestricted => {
                let ds = (self.psi(p.x1) - self.psi(q.x1)).abs();
                let du = self.lambda.powf(p.x1.min(q.x1)) * (p.x2 - q.x2).abs();
                (ds, du)
            }
            MetricMode::ExactForm => {
                let ds = (self.psi(p.x1) - self.psi(q.x1)).abs();
                let du = (self.phi(p) - self.phi(q)).abs();
                (ds, du)
            }
            MetricMode::EuclideanSplit => ((p.x2 - q.x2).abs(), (p.x1 - q.x1).abs()),
            MetricMode::Pullback { conjugator, base } => {
                let c = base.components(conjugator.forward(p)?, conjugator.forward(q)?)?;
                (c.ds, c.du)
            }
            MetricMode::PathInfimum { family } => {
                let ds = path_infimum_numeric(WeightKind::Stable, self.lambda, p, q, family)?;
                let du = path_infimum_numeric(WeightKind::Unstable, self.lambda, p, q, family)?;
                (ds, du)
            }
        };
        let u = ds + du;
        if !u.is_finite() || u > OVERFLOW_LIMIT {
            return Err(Error::Overflow);
        }
        Ok(MetricComponents { ds, du, u })
    }

    pub fn u(&self, p: Point, q: Point) -> Result<f64> {
        Ok(self.components(p, q)?.u)
    }
}

/// Trapezoidal cost of one polyline path under the requested weight.
fn path_cost(weight: WeightKind, lambda: f64, pts: &[Point]) -> f64 {
    let mut cost = 0.0;
    for w in pts.windows(2) {
        let (a, b) = (w[0], w[1]);
        let (wa, wb) = match weight {
            WeightKind::Stable => (lambda.powf(-a.x1), lambda.powf(-b.x1)),
            WeightKind::Unstable => (lambda.powf(a.x1), lambda.powf(b.x1)),
        };
        let component = match weight {
            WeightKind::Stable => (b.x1 - a.x1).abs(),
            WeightKind::Unstable => (b.x2 - a.x2).abs(),
        };
        cost += 0.5 * (wa + wb) * component;
    }
    cost
}

fn straight_path(p: Point, q: Point, n: usize) -> Vec<Point> {
    (0..n)
        .map(|i| {
            let t = i as f64 / (n - 1) as f64;
            p + (q - p) * t
        })
        .collect()
}

/// Three-leg path hugging the left edge of the detour box; corners included
/// exactly so the constant-weight middle leg is integrated without error.
fn detour_path(p: Point, q: Point, lo1: f64, n: usize) -> Option<Vec<Point>> {
    if n < 4 {
        return None;
    }
    let c1 = Point::new(lo1, p.x2);
    let c2 = Point::new(lo1, q.x2);
    let legs = [(p, c1), (c1, c2), (c2, q)];
    let lens: Vec<f64> = legs.iter().map(|(a, b)| a.dist(*b)).collect();
    let interior = n - 4;
    let total: f64 = lens.iter().sum();
    let mut counts = [0usize; 3];
    if total > 0.0 {
        for i in 0..3 {
            counts[i] = ((interior as f64) * lens[i] / total).floor() as usize;
        }
    }
    while counts.iter().sum::<usize>() < interior {
        let i = (0..3).max_by(|&a, &b| lens[a].total_cmp(&lens[b])).unwrap();
        counts[i] += 1;
    }
    let mut pts = Vec::with_capacity(n);
    for (leg, (a, b)) in legs.iter().enumerate() {
        pts.push(*a);
        for k in 1..=counts[leg] {
            let t = k as f64 / (counts[leg] + 1) as f64;
            pts.push(*a + (*b - *a) * t);
        }
    }
    pts.push(q);
    // Degenerate legs can duplicate consecutive points; the cost is unaffected.
    Some(pts)
}

struct DescentOutcome {
    cost: f64,
    stabilized: bool,
    evals: usize,
}

fn coordinate_descent(
    weight: WeightKind,
    lambda: f64,
    pts: &mut Vec<Point>,
    lo: Point,
    hi: Point,
    eval_cap: usize,
) -> DescentOutcome {
    let diam = lo.dist(hi).max(1e-6);
    let mut step = 0.25 * diam;
    let mut evals = 0usize;
    let mut best = path_cost(weight, lambda, pts);
    let stab_tol = 1e-9 * (1.0 + diam);

    while step > stab_tol {
        let sweep_start = best;
        for i in 1..pts.len() - 1 {
            for coord in 0..2 {
                for dir in [-1.0, 1.0] {
                    // Slide in the improving direction until it stops paying.
                    for _ in 0..64 {
                        if evals + 1 > eval_cap {
                            return DescentOutcome {
                                cost: best,
                                stabilized: false,
                                evals,
                            };
                        }
                        let old = pts[i];
                        let mut cand = old;
                        match coord {
                            0 => cand.x1 = (cand.x1 + dir * step).clamp(lo.x1, hi.x1),
                            _ => cand.x2 = (cand.x2 + dir * step).clamp(lo.x2, hi.x2),
                        }
                        if cand == old {
                            break;
                        }
                        pts[i] = cand;
                        let c = path_cost(weight, lambda, pts);
                        evals += 1;
                        if c < best {
                            best = c;
                        } else {
                            pts[i] = old;
                            break;
                        }
                    }
                }
            }
        }
        let gain = sweep_start - best;
        if gain <= 1e-4 * best.abs().max(1e-12) {
            step *= 0.5;
        }
    }
    DescentOutcome {
        cost: best,
        stabilized: true,
        evals,
    }
}

/// Minimize the discretized weighted path integral over piecewise-linear
/// paths from `p` to `q` whose control points stay within the detour box.
/// The result is an upper bound on the true infimum.
pub fn path_infimum_numeric(
    weight: WeightKind,
    lambda: f64,
    p: Point,
    q: Point,
    family: &PathFamily,
) -> Result<f64> {
    check_lambda(lambda)?;
    if !p.is_finite() || !q.is_finite() {
        return Err(Error::NonFinite);
    }
    let n = family.control_points.max(2);
    let m = family.detour_bound;
    let lo = Point::new(p.x1.min(q.x1) - m, p.x2.min(q.x2) - m);
    let hi = Point::new(p.x1.max(q.x1) + m, p.x2.max(q.x2) + m);

    let restarts = family.restarts.max(1);
    // The budget is shared: each restart draws from what remains, so the
    // deterministic starts are never starved by the random ones.
    let mut remaining = family.eval_budget;
    let mut rng = ChaCha8Rng::seed_from_u64(family.seed);

    let mut best = f64::INFINITY;
    let mut any_stabilized = false;
    for r in 0..restarts {
        let mut pts = match r {
            0 => straight_path(p, q, n),
            1 => detour_path(p, q, lo.x1, n).unwrap_or_else(|| straight_path(p, q, n)),
            _ => {
                let mut pts = straight_path(p, q, n);
                for pt in pts.iter_mut().take(n - 1).skip(1) {
                    pt.x1 = (pt.x1 + rng.gen_range(-0.5..0.5) * (hi.x1 - lo.x1))
                        .clamp(lo.x1, hi.x1);
                    pt.x2 = (pt.x2 + rng.gen_range(-0.5..0.5) * (hi.x2 - lo.x2))
                        .clamp(lo.x2, hi.x2);
                }
                pts
            }
        };
        if remaining < 8 * n {
            break;
        }
        let out = coordinate_descent(weight, lambda, &mut pts, lo, hi, remaining);
        remaining = remaining.saturating_sub(out.evals);
        any_stabilized |= out.stabilized;
        best = best.min(out.cost);
    }
    if !any_stabilized {
        return Err(Error::BudgetExceeded("path descent did not stabilize"));
    }
    Ok(best)
}

/// Max relative deviation of the component scaling identities over the pairs:
/// the stable component should contract by `1/lambda` and the unstable one
/// expand by `lambda` under one application of the map.
pub fn scaling_check(
    metric: &LyapunovMetric,
    map: &PlaneMap,
    pairs: &[(Point, Point)],
) -> Result<(f64, f64)> {
    let lambda = metric.lambda();
    let mut dev_s = 0.0f64;
    let mut dev_u = 0.0f64;
    for &(p, q) in pairs {
        let before = metric.components(p, q)?;
        let after = metric.components(map.forward(p)?, map.forward(q)?)?;
        dev_s = dev_s.max(
            (after.ds - before.ds / lambda).abs() / before.ds.max(RELATIVE_FLOOR),
        );
        dev_u = dev_u.max(
            (after.du - before.du * lambda).abs() / before.du.max(RELATIVE_FLOOR),
        );
    }
    Ok((dev_s, dev_u))
}

#[derive(Debug, Clone, Serialize)]
pub struct AxiomScanReport {
    pub sample_size: usize,
    pub symmetry_deviation: f64,
    pub identity_deviation: f64,
    pub triangle_violations: usize,
    pub worst_triple: Option<[Point; 3]>,
    pub worst_excess: f64,
}

/// Brute-force metric axiom scan over the sample: symmetry, identity of
/// indiscernibles, and triangle-inequality violations over all triples.
pub fn metric_axiom_scan(metric: &LyapunovMetric, sample: &[Point]) -> Result<AxiomScanReport> {
    if sample.len() < 3 {
        return Err(Error::InvalidInput("need at least three sample points"));
    }
    let n = sample.len();
    let mut u = vec![0.0f64; n * n];
    let mut symmetry_deviation = 0.0f64;
    let mut identity_deviation = 0.0f64;
    for i in 0..n {
        identity_deviation = identity_deviation.max(metric.u(sample[i], sample[i])?);
        for j in (i + 1)..n {
            let forward = metric.u(sample[i], sample[j])?;
            let backward = metric.u(sample[j], sample[i])?;
            symmetry_deviation = symmetry_deviation.max((forward - backward).abs());
            u[i * n + j] = forward;
            u[j * n + i] = forward;
        }
    }
    let mut triangle_violations = 0usize;
    let mut worst_excess = 0.0f64;
    let mut worst_triple = None;
    for i in 0..n {
        for j in 0..n {
            if j == i {
                continue;
            }
            for k in 0..n {
                if k == i || k == j {
                    continue;
                }
                let excess = u[i * n + k] - u[i * n + j] - u[j * n + k];
                if excess > 1e-9 {
                    triangle_violations += 1;
                    if excess > worst_excess {
                        worst_excess = excess;
                        worst_triple = Some([sample[i], sample[j], sample[k]]);
                    }
                }
            }
        }
    }
    Ok(AxiomScanReport {
        sample_size: n,
        symmetry_deviation,
        identity_deviation,
        triangle_violations,
        worst_triple,
        worst_excess,
    })
}

/// JSON metric specification: `{"mode": "A".."E", "lambda": 2.0, ...}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricSpec {
    pub mode: String,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    /// Path-family parameters for mode A.
    #[serde(default)]
    pub control_points: Option<usize>,
    #[serde(default)]
    pub detour_bound: Option<f64>,
    /// Conjugator and base for mode E.
    #[serde(default)]
    pub conjugator: Option<MapSpec>,
    #[serde(default)]
    pub base: Option<Box<MetricSpec>>,
}

fn default_lambda() -> f64 {
    2.0
}

impl MetricSpec {
    pub fn build(&self) -> Result<LyapunovMetric> {
        match self.mode.as_str() {
            "A" => {
                let mut family = PathFamily::default();
                if let Some(n) = self.control_points {
                    family.control_points = n;
                }
                if let Some(m) = self.detour_bound {
                    family.detour_bound = m;
                }
                LyapunovMetric::path_infimum(self.lambda, family)
            }
            "B" => LyapunovMetric::strip_restricted(self.lambda),
            "C" => LyapunovMetric::exact_form(self.lambda),
            "D" => LyapunovMetric::euclidean_split(self.lambda),
            "E" => {
                let conjugator = self
                    .conjugator
                    .as_ref()
                    .ok_or(Error::InvalidInput("mode E needs a conjugator"))?
                    .build()?;
                let base = self
                    .base
                    .as_ref()
                    .ok_or(Error::InvalidInput("mode E needs a base metric"))?
                    .build()?;
                Ok(LyapunovMetric::pullback(conjugator, base))
            }
            _ => Err(Error::InvalidInput("unknown metric mode")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    const LN2: f64 = std::f64::consts::LN_2;

    fn random_points(count: usize, half_width: f64, seed: u64) -> Vec<Point> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count)
            .map(|_| {
                Point::new(
                    rng.gen_range(-half_width..half_width),
                    rng.gen_range(-half_width..half_width),
                )
            })
            .collect()
    }

    #[test]
    fn exact_form_components_match_closed_forms() {
        let metric = LyapunovMetric::exact_form(2.0).unwrap();
        // Antiderivative of 2^{-x} dx between 0 and 1.
        let c = metric
            .components(Point::new(0.0, 0.0), Point::new(1.0, 0.0))
            .unwrap();
        assert_abs_diff_eq!(c.ds, 0.5 / LN2, epsilon = 1e-12);
        assert_abs_diff_eq!(c.ds, 0.7213475204444817, epsilon = 1e-12);
        assert_eq!(c.du, 0.0);

        let c = metric
            .components(Point::new(0.0, 0.0), Point::new(0.0, 1.0))
            .unwrap();
        assert_eq!(c.ds, 0.0);
        assert_abs_diff_eq!(c.du, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(c.u, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn coincident_points_have_zero_components_in_every_mode() {
        let p = Point::new(1.3, -0.4);
        let modes: Vec<LyapunovMetric> = vec![
            LyapunovMetric::exact_form(2.0).unwrap(),
            LyapunovMetric::strip_restricted(2.0).unwrap(),
            LyapunovMetric::euclidean_split(2.0).unwrap(),
            LyapunovMetric::pullback(
                PlaneMap::sine_shear(0.5),
                LyapunovMetric::exact_form(2.0).unwrap(),
            ),
            LyapunovMetric::path_infimum(
                2.0,
                PathFamily {
                    control_points: 5,
                    ..PathFamily::default()
                },
            )
            .unwrap(),
        ];
        for m in &modes {
            let c = m.components(p, p).unwrap();
            assert_eq!((c.ds, c.du, c.u), (0.0, 0.0, 0.0));
        }
    }

    #[test]
    fn stable_path_cost_matches_antiderivative() {
        let family = PathFamily {
            control_points: 33,
            detour_bound: 0.0,
            restarts: 6,
            eval_budget: 120_000,
            seed: 1,
        };
        let cost = path_infimum_numeric(
            WeightKind::Stable,
            2.0,
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            &family,
        )
        .unwrap();
        let closed = 0.5 / LN2;
        assert!((cost - closed).abs() < 1e-4, "cost {cost} vs {closed}");
        // The closed form is a true lower bound for the discretized cost.
        assert!(cost >= closed - 1e-6);
    }

    #[test]
    fn unstable_path_cost_collapses_with_detour_room() {
        let base = PathFamily {
            control_points: 33,
            detour_bound: 0.0,
            restarts: 8,
            eval_budget: 160_000,
            seed: 2,
        };
        let p = Point::new(0.0, 0.0);
        let q = Point::new(0.0, 1.0);

        let pinned = path_infimum_numeric(WeightKind::Unstable, 2.0, p, q, &base).unwrap();
        assert_abs_diff_eq!(pinned, 1.0, epsilon = 1e-9);

        let mut last = pinned;
        for m in [2.0, 5.0, 10.0] {
            let family = PathFamily {
                detour_bound: m,
                ..base.clone()
            };
            let cost = path_infimum_numeric(WeightKind::Unstable, 2.0, p, q, &family).unwrap();
            let floor = (-m).exp2();
            assert!(cost <= floor + 0.01, "detour {m}: cost {cost}");
            assert!(cost >= floor - 1e-9, "detour {m}: below true infimum");
            assert!(cost <= last + 1e-12, "cost not non-increasing in detour");
            last = cost;
        }
    }

    #[test]
    fn exact_form_agrees_with_path_infimum_on_stable_pairs() {
        let exact = LyapunovMetric::exact_form(2.0).unwrap();
        let family = PathFamily {
            control_points: 65,
            restarts: 4,
            eval_budget: 400_000,
            ..PathFamily::default()
        };
        for (p, q) in [
            (Point::new(0.0, 0.0), Point::new(1.0, 0.0)),
            (Point::new(-1.0, 0.5), Point::new(0.5, 0.5)),
        ] {
            let numeric =
                path_infimum_numeric(WeightKind::Stable, 2.0, p, q, &family).unwrap();
            let closed = exact.components(p, q).unwrap().ds;
            assert!((numeric - closed).abs() < 1e-4);
        }
    }

    #[test]
    fn scaling_identities_under_unit_translation() {
        let map = PlaneMap::unit_translation();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let pairs: Vec<(Point, Point)> = (0..1000)
            .map(|_| {
                (
                    Point::new(rng.gen_range(-8.0..8.0), rng.gen_range(-8.0..8.0)),
                    Point::new(rng.gen_range(-8.0..8.0), rng.gen_range(-8.0..8.0)),
                )
            })
            .collect();
        for metric in [
            LyapunovMetric::strip_restricted(2.0).unwrap(),
            LyapunovMetric::exact_form(2.0).unwrap(),
        ] {
            let (ds, du) = scaling_check(&metric, &map, &pairs).unwrap();
            assert!(ds <= 1e-9 && du <= 1e-9, "deviations {ds}, {du}");
        }
    }

    #[test]
    fn scaling_identities_for_euclidean_split_and_pullback() {
        let pairs: Vec<(Point, Point)> = {
            let pts = random_points(80, 8.0, 5);
            pts.iter()
                .zip(pts.iter().rev())
                .map(|(&p, &q)| (p, q))
                .collect()
        };

        let metric = LyapunovMetric::euclidean_split(2.0).unwrap();
        let map = PlaneMap::linear_hyperbolic(2.0).unwrap();
        let (ds, du) = scaling_check(&metric, &map, &pairs).unwrap();
        assert!(ds <= 1e-12 && du <= 1e-12);

        let h = PlaneMap::sine_shear(0.5);
        let pulled = LyapunovMetric::pullback(h.clone(), LyapunovMetric::exact_form(2.0).unwrap());
        let g = PlaneMap::conjugated(h, PlaneMap::unit_translation());
        let (ds, du) = scaling_check(&pulled, &g, &pairs).unwrap();
        assert!(ds <= 1e-9 && du <= 1e-9, "pullback deviations {ds}, {du}");
    }

    #[test]
    fn axiom_scan_exact_form_has_no_triangle_violations() {
        let metric = LyapunovMetric::exact_form(2.0).unwrap();
        let sample = random_points(60, 6.0, 3);
        let report = metric_axiom_scan(&metric, &sample).unwrap();
        assert_eq!(report.triangle_violations, 0);
        assert!(report.symmetry_deviation <= 1e-12);
        assert!(report.identity_deviation <= 1e-15);
    }

    #[test]
    fn axiom_scan_strip_restricted_records_violation() {
        // Direct arithmetic witness: a vertical move at x1 = 5 costs 32, but
        // relaying through a strip touching x1 = 0 costs under 4.
        let metric = LyapunovMetric::strip_restricted(2.0).unwrap();
        let p = Point::new(5.0, 0.0);
        let q = Point::new(0.0, 0.5);
        let r = Point::new(5.0, 1.0);
        let direct = metric.u(p, r).unwrap();
        let relay = metric.u(p, q).unwrap() + metric.u(q, r).unwrap();
        assert_abs_diff_eq!(direct, 32.0, epsilon = 1e-12);
        assert!(relay < 4.0, "relay cost {relay}");

        let mut sample = random_points(20, 2.0, 7);
        sample.extend([p, q, r]);
        let report = metric_axiom_scan(&metric, &sample).unwrap();
        assert!(report.triangle_violations >= 1);
    }

    #[test]
    fn axiom_scan_euclidean_split_is_a_metric() {
        let metric = LyapunovMetric::euclidean_split(2.0).unwrap();
        let report = metric_axiom_scan(&metric, &random_points(60, 6.0, 9)).unwrap();
        assert_eq!(report.triangle_violations, 0);
    }

    #[test]
    fn strip_and_exact_forms_share_the_stable_component() {
        let strip = LyapunovMetric::strip_restricted(2.0).unwrap();
        let exact = LyapunovMetric::exact_form(2.0).unwrap();
        let pts = random_points(40, 8.0, 13);
        for (i, &p) in pts.iter().enumerate() {
            let q = pts[(i + 7) % pts.len()];
            let cs = strip.components(p, q).unwrap();
            let ce = exact.components(p, q).unwrap();
            assert_abs_diff_eq!(cs.ds, ce.ds, epsilon = 1e-12);
            // Unstable components agree on vertical pairs.
            let qv = Point::new(p.x1, q.x2);
            let cs = strip.components(p, qv).unwrap();
            let ce = exact.components(p, qv).unwrap();
            assert_abs_diff_eq!(cs.du, ce.du, epsilon = 1e-9);
        }
    }

    #[test]
    fn pullback_positive_definite() {
        let metric = LyapunovMetric::pullback(
            PlaneMap::sine_shear(0.5),
            LyapunovMetric::exact_form(2.0).unwrap(),
        );
        let pts = random_points(30, 5.0, 17);
        for (i, &p) in pts.iter().enumerate() {
            assert_eq!(metric.u(p, p).unwrap(), 0.0);
            let q = pts[(i + 11) % pts.len()];
            if p != q {
                assert!(metric.u(p, q).unwrap() > 0.0);
            }
        }
    }

    #[test]
    fn overflow_is_reported() {
        let metric = LyapunovMetric::exact_form(2.0).unwrap();
        assert!(matches!(
            metric.components(Point::new(1100.0, 1.0), Point::new(0.0, 0.0)),
            Err(Error::Overflow)
        ));
    }

    #[test]
    fn metric_spec_builds_every_mode() {
        for text in [
            r#"{"mode": "A", "lambda": 2.0, "control_points": 9, "detour_bound": 1.0}"#,
            r#"{"mode": "B", "lambda": 2.0}"#,
            r#"{"mode": "C", "lambda": 2.0}"#,
            r#"{"mode": "D", "lambda": 2.0}"#,
            r#"{"mode": "E", "lambda": 2.0,
                "conjugator": {"kind": "sine_shear", "params": {"amplitude": 0.5}},
                "base": {"mode": "C", "lambda": 2.0}}"#,
        ] {
            let spec: MetricSpec = serde_json::from_str(text).unwrap();
            spec.build().unwrap();
        }
    }
}
