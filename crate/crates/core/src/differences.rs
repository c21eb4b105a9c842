//! First and second differences of a metric along a map, sign probes on
//! metric spheres, and expansiveness certificates.
//!
//! The first difference `V(x,y) = U(f(x),f(y)) - U(x,y)` measures one-step
//! growth of the pair distance; the second difference `W = V.(f x f) - V`
//! must be positive for distinct pairs on a valid metric/map pairing, which
//! forces every orbit pair to diverge monotonically forward or backward.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::maps::PlaneMap;
use crate::metrics::LyapunovMetric;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DifferenceValues {
    pub v: f64,
    pub w: f64,
}

/// `V(x,y) = U(f(x),f(y)) - U(x,y)`.
pub fn first_difference(
    metric: &LyapunovMetric,
    map: &PlaneMap,
    x: Point,
    y: Point,
) -> Result<f64> {
    let u0 = metric.u(x, y)?;
    let u1 = metric.u(map.forward(x)?, map.forward(y)?)?;
    Ok(u1 - u0)
}

/// `W(x,y) = V(f(x),f(y)) - V(x,y)`. For distinct points a non-positive value
/// signals an invalid metric/map pairing and is reported as an error.
pub fn second_difference(
    metric: &LyapunovMetric,
    map: &PlaneMap,
    x: Point,
    y: Point,
) -> Result<f64> {
    let w = difference_values(metric, map, x, y)?.w;
    if x != y && w <= 0.0 {
        return Err(Error::NonPositiveW { value: w });
    }
    Ok(w)
}

/// Both differences at once; `w = v(f(x),f(y)) - v(x,y)` by construction.
pub fn difference_values(
    metric: &LyapunovMetric,
    map: &PlaneMap,
    x: Point,
    y: Point,
) -> Result<DifferenceValues> {
    let v0 = first_difference(metric, map, x, y)?;
    let v1 = first_difference(metric, map, map.forward(x)?, map.forward(y)?)?;
    Ok(DifferenceValues { v: v0, w: v1 - v0 })
}

/// Witnesses of both signs of the first difference on the metric sphere of
/// radius `k` about `x`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SignProbeResult {
    pub x: Point,
    pub k: f64,
    pub y_plus: Point,
    pub v_plus: f64,
    pub z_minus: Point,
    pub v_minus: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct ProbeParams {
    /// Coarse direction count around the full circle.
    pub directions: usize,
    /// Zoom rounds around the extremal direction when a sign is missing.
    pub refinement_rounds: usize,
}

impl Default for ProbeParams {
    fn default() -> Self {
        ProbeParams {
            directions: 720,
            refinement_rounds: 8,
        }
    }
}

/// Point on the sphere `U(x, .) = k` along direction `theta`, by bisection in
/// the radius. Directions along which the metric stays below `k` have no
/// sphere point and yield `None`.
pub fn metric_sphere_point(metric: &LyapunovMetric, x: Point, k: f64, theta: f64) -> Option<Point> {
    let e = Point::new(theta.cos(), theta.sin());
    let u_at = |r: f64| -> f64 {
        metric
            .u(Point::new(x.x1 + r * e.x1, x.x2 + r * e.x2), x)
            .unwrap_or(f64::INFINITY)
    };
    let mut lo = 0.0f64;
    let mut hi = 1e6f64;
    if u_at(hi) < k {
        return None;
    }
    let tol = 1e-12 * k.max(1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let u = u_at(mid);
        if (u - k).abs() <= tol {
            return Some(Point::new(x.x1 + mid * e.x1, x.x2 + mid * e.x2));
        }
        if u < k {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let r = 0.5 * (lo + hi);
    Some(Point::new(x.x1 + r * e.x1, x.x2 + r * e.x2))
}

struct AngularScan {
    best_pos: Option<(Point, f64)>,
    best_neg: Option<(Point, f64)>,
    argmax: Option<(f64, f64)>,
    argmin: Option<(f64, f64)>,
}

fn scan_angles(
    metric: &LyapunovMetric,
    map: &PlaneMap,
    x: Point,
    k: f64,
    angles: impl Iterator<Item = f64>,
) -> Result<AngularScan> {
    let mut scan = AngularScan {
        best_pos: None,
        best_neg: None,
        argmax: None,
        argmin: None,
    };
    for theta in angles {
        let Some(p) = sphere_point(metric, x, k, theta) else {
            continue;
        };
        let v = first_difference(metric, map, x, p)?;
        if v > 0.0 && scan.best_pos.map_or(true, |(_, best)| v > best) {
            scan.best_pos = Some((p, v));
        }
        if v < 0.0 && scan.best_neg.map_or(true, |(_, best)| v < best) {
            scan.best_neg = Some((p, v));
        }
        if scan.argmax.map_or(true, |(_, best)| v > best) {
            scan.argmax = Some((theta, v));
        }
        if scan.argmin.map_or(true, |(_, best)| v < best) {
            scan.argmin = Some((theta, v));
        }
    }
    Ok(scan)
}

/// Find points of both first-difference signs on the sphere `U(x, .) = k`.
///
/// A coarse full-circle scan is refined by zooming on the extremal direction
/// when one sign is missing; failure over all rounds signals that the
/// metric/map pairing violates the both-signs hypothesis.
pub fn sphere_sign_probe(
    metric: &LyapunovMetric,
    map: &PlaneMap,
    x: Point,
    k: f64,
    params: ProbeParams,
) -> Result<SignProbeResult> {
    if !(k > 0.0) {
        return Err(Error::InvalidInput("sphere radius must be positive"));
    }
    let d = params.directions.max(8);
    let tau = std::f64::consts::TAU;
    let coarse = scan_angles(
        metric,
        map,
        x,
        k,
        (0..d).map(|j| tau * j as f64 / d as f64),
    )?;

    let mut best_pos = coarse.best_pos;
    let mut best_neg = coarse.best_neg;

    // Zoom on the extremal direction for a missing sign.
    let mut width = tau / d as f64;
    let mut center_max = coarse.argmax.map(|(t, _)| t);
    let mut center_min = coarse.argmin.map(|(t, _)| t);
    for _ in 0..params.refinement_rounds {
        if best_pos.is_some() && best_neg.is_some() {
            break;
        }
        if best_pos.is_none() {
            let Some(c) = center_max else { break };
            let fine = scan_angles(
                metric,
                map,
                x,
                k,
                (0..=64).map(move |j| c - width + 2.0 * width * j as f64 / 64.0),
            )?;
            best_pos = fine.best_pos;
            center_max = fine.argmax.map(|(t, _)| t);
        }
        if best_neg.is_none() {
            let Some(c) = center_min else { break };
            let fine = scan_angles(
                metric,
                map,
                x,
                k,
                (0..=64).map(move |j| c - width + 2.0 * width * j as f64 / 64.0),
            )?;
            best_neg = fine.best_neg;
            center_min = fine.argmin.map(|(t, _)| t);
        }
        width /= 16.0;
    }

    match (best_pos, best_neg) {
        (Some((y_plus, v_plus)), Some((z_minus, v_minus))) => Ok(SignProbeResult {
            x,
            k,
            y_plus,
            v_plus,
            z_minus,
            v_minus,
        }),
        _ => Err(Error::ProbeFailed),
    }
}

/// Default iteration budget for the expansiveness certificate.
pub const CERTIFICATE_BUDGET: i64 = 10_000;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ExpansivenessCertificate {
    /// Signed iterate count with `U(f^n(x), f^n(y)) > k`; negative means the
    /// separation happens under backward iteration.
    pub n: i64,
    pub u_escape: f64,
}

/// Iterate a distinct pair until its metric distance exceeds `k`.
///
/// Forward when the first difference is non-negative (applying the map once
/// first if it is exactly zero), backward when negative. Along the way the
/// telescoping growth bound `U(f^n(x), f^n(y)) >= U(x,y) + n V(x,y)` is
/// verified (with the mirrored bound on the backward branch).
pub fn expansiveness_certificate(
    metric: &LyapunovMetric,
    map: &PlaneMap,
    x: Point,
    y: Point,
    k: f64,
) -> Result<ExpansivenessCertificate> {
    if x == y {
        return Err(Error::IdenticalPoints);
    }
    if !(k > 0.0) {
        return Err(Error::InvalidInput("escape threshold must be positive"));
    }
    let v0 = first_difference(metric, map, x, y)?;
    let forward = v0 >= 0.0;
    let slack = |bound: f64| 1e-6 * bound.abs().max(1.0);

    let (mut cx, mut cy) = (x, y);
    let mut u = metric.u(x, y)?;
    if u > k {
        return Ok(ExpansivenessCertificate { n: 0, u_escape: u });
    }

    // Anchor of the growth bound: the first index with a strictly positive
    // (forward) or strictly negative (backward) first difference.
    let mut anchor: Option<(i64, f64, f64)> = if v0 != 0.0 { Some((0, u, v0)) } else { None };

    for step in 1..=CERTIFICATE_BUDGET {
        (cx, cy) = if forward {
            (map.forward(cx)?, map.forward(cy)?)
        } else {
            (map.inverse(cx)?, map.inverse(cy)?)
        };
        u = metric.u(cx, cy)?;
        let n = if forward { step } else { -step };

        if let Some((n0, u0, v_anchor)) = anchor {
            let grown = (step - n0) as f64 * v_anchor.abs();
            let bound = u0 + grown;
            if u < bound - slack(bound) {
                return Err(Error::GrowthBoundViolated {
                    n,
                    actual: u,
                    expected: bound,
                });
            }
        } else {
            let v = first_difference(metric, map, cx, cy)?;
            if (forward && v > 0.0) || (!forward && v < 0.0) {
                anchor = Some((step, u, v));
            }
        }

        if u > k {
            return Ok(ExpansivenessCertificate { n, u_escape: u });
        }
    }
    Err(Error::BudgetExceeded("pair never separated past the threshold"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const LN2: f64 = std::f64::consts::LN_2;

    fn setup() -> (LyapunovMetric, PlaneMap) {
        (
            LyapunovMetric::exact_form(2.0).unwrap(),
            PlaneMap::unit_translation(),
        )
    }

    /// Closed-form identity for the exact-form metric under the unit
    /// translation: one application contracts the stable component by 1/2 and
    /// doubles the unstable one.
    fn v_identity(metric: &LyapunovMetric, x: Point, y: Point) -> f64 {
        let c = metric.components(x, y).unwrap();
        (2.0 - 1.0) * c.du - (1.0 - 0.5) * c.ds
    }

    fn w_identity(metric: &LyapunovMetric, x: Point, y: Point) -> f64 {
        let c = metric.components(x, y).unwrap();
        (2.0 - 1.0) * (2.0 - 1.0) * c.du + (1.0 - 0.5) * (1.0 - 0.5) * c.ds
    }

    #[test]
    fn first_difference_matches_closed_forms() {
        let (metric, map) = setup();
        let x = Point::new(0.0, 0.0);

        let y = Point::new(0.0, 1.0);
        let v = first_difference(&metric, &map, x, y).unwrap();
        assert_abs_diff_eq!(v, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(v, v_identity(&metric, x, y), epsilon = 1e-12);

        let y = Point::new(1.0, 0.0);
        let v = first_difference(&metric, &map, x, y).unwrap();
        assert_abs_diff_eq!(v, -0.5 * 0.5 / LN2, epsilon = 1e-12);
        assert_abs_diff_eq!(v, -0.36067376022224085, epsilon = 1e-12);
        assert_abs_diff_eq!(v, v_identity(&metric, x, y), epsilon = 1e-12);

        assert_eq!(first_difference(&metric, &map, x, x).unwrap(), 0.0);
    }

    #[test]
    fn second_difference_matches_quadratic_form() {
        let (metric, map) = setup();
        let x = Point::new(0.0, 0.0);

        let y = Point::new(0.0, 1.0);
        let w = second_difference(&metric, &map, x, y).unwrap();
        assert_abs_diff_eq!(w, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(w, w_identity(&metric, x, y), epsilon = 1e-12);

        let y = Point::new(1.0, 0.0);
        let w = second_difference(&metric, &map, x, y).unwrap();
        assert_abs_diff_eq!(w, 0.25 * 0.5 / LN2, epsilon = 1e-12);
        assert_abs_diff_eq!(w, 0.18033688011112042, epsilon = 1e-12);

        assert_eq!(second_difference(&metric, &map, x, x).unwrap(), 0.0);
    }

    #[test]
    fn non_positive_w_flagged_for_invalid_pairing() {
        let metric = LyapunovMetric::exact_form(2.0).unwrap();
        let identity = PlaneMap::identity();
        assert!(matches!(
            second_difference(&metric, &identity, Point::new(0.0, 0.0), Point::new(1.0, 1.0)),
            Err(Error::NonPositiveW { .. })
        ));
    }

    #[test]
    fn positive_w_on_sampled_distinct_pairs() {
        let (metric, map) = setup();
        let metric_d = LyapunovMetric::euclidean_split(2.0).unwrap();
        let map_lh = PlaneMap::linear_hyperbolic(2.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..300 {
            let x = Point::new(rng.gen_range(-6.0..6.0), rng.gen_range(-6.0..6.0));
            let y = Point::new(rng.gen_range(-6.0..6.0), rng.gen_range(-6.0..6.0));
            if x == y {
                continue;
            }
            assert!(second_difference(&metric, &map, x, y).unwrap() > 0.0);
            assert!(second_difference(&metric_d, &map_lh, x, y).unwrap() > 0.0);
        }
    }

    #[test]
    fn monotone_v_along_orbits() {
        let (metric, map) = setup();
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        for _ in 0..50 {
            let mut x = Point::new(rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0));
            let mut y = Point::new(rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0));
            let mut last = first_difference(&metric, &map, x, y).unwrap();
            for _ in 0..20 {
                x = map.forward(x).unwrap();
                y = map.forward(y).unwrap();
                let v = first_difference(&metric, &map, x, y).unwrap();
                assert!(v >= last - 1e-9);
                last = v;
            }
        }
    }

    #[test]
    fn sphere_probe_translation_witnesses() {
        let (metric, map) = setup();
        let x = Point::new(0.0, 0.0);
        let probe = sphere_sign_probe(&metric, &map, x, 1.0, ProbeParams::default()).unwrap();

        assert!(probe.v_plus > 0.0);
        assert!(probe.v_minus < 0.0);
        assert!((metric.u(x, probe.y_plus).unwrap() - 1.0).abs() <= 1e-6);
        assert!((metric.u(x, probe.z_minus).unwrap() - 1.0).abs() <= 1e-6);

        // At the origin the strongest positive witness is vertical (pure
        // unstable move) and the strongest negative one horizontal.
        let dy = probe.y_plus - x;
        assert!(dy.x2.abs() > 100.0 * dy.x1.abs(), "y_plus not vertical: {dy:?}");
        let dz = probe.z_minus - x;
        assert!(dz.x1.abs() > 100.0 * dz.x2.abs(), "z_minus not horizontal: {dz:?}");
    }

    #[test]
    fn sphere_probe_euclidean_split_witnesses() {
        let metric = LyapunovMetric::euclidean_split(2.0).unwrap();
        let map = PlaneMap::linear_hyperbolic(2.0).unwrap();
        let x = Point::new(3.0, 3.0);
        let probe = sphere_sign_probe(&metric, &map, x, 0.5, ProbeParams::default()).unwrap();
        assert!(probe.v_plus > 0.0 && probe.v_minus < 0.0);
        let dy = probe.y_plus - x;
        assert!(dy.x1.abs() > 100.0 * dy.x2.abs(), "y_plus not horizontal: {dy:?}");
        let dz = probe.z_minus - x;
        assert!(dz.x2.abs() > 100.0 * dz.x1.abs(), "z_minus not vertical: {dz:?}");
    }

    #[test]
    fn sphere_probe_fails_for_identity_map() {
        let metric = LyapunovMetric::exact_form(2.0).unwrap();
        let map = PlaneMap::identity();
        assert!(matches!(
            sphere_sign_probe(&metric, &map, Point::new(0.0, 0.0), 1.0, ProbeParams::default()),
            Err(Error::ProbeFailed)
        ));
    }

    #[test]
    fn certificate_forward_escape() {
        let (metric, map) = setup();
        // Unstable pair doubles each step: 1, 2, 4 > 3 at n = 2.
        let cert = expansiveness_certificate(
            &metric,
            &map,
            Point::new(0.0, 0.0),
            Point::new(0.0, 1.0),
            3.0,
        )
        .unwrap();
        assert_eq!(cert.n, 2);
        assert_abs_diff_eq!(cert.u_escape, 4.0, epsilon = 1e-12);
    }

    #[test]
    fn certificate_backward_escape() {
        let (metric, map) = setup();
        // Stable pair grows backward: 2^n * (1 - 1/2)/ln 2 exceeds 3 at n = 3.
        let cert = expansiveness_certificate(
            &metric,
            &map,
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            3.0,
        )
        .unwrap();
        assert_eq!(cert.n, -3);
        assert_abs_diff_eq!(cert.u_escape, 4.0 / LN2, epsilon = 1e-9);
        assert_abs_diff_eq!(cert.u_escape, 5.770780163555854, epsilon = 1e-9);
    }

    #[test]
    fn certificate_rejects_identical_points() {
        let (metric, map) = setup();
        let p = Point::new(0.3, 0.4);
        assert!(matches!(
            expansiveness_certificate(&metric, &map, p, p, 1.0),
            Err(Error::IdenticalPoints)
        ));
    }

    #[test]
    fn certificate_budget_exceeded_for_identity_map() {
        let metric = LyapunovMetric::exact_form(2.0).unwrap();
        let map = PlaneMap::identity();
        assert!(matches!(
            expansiveness_certificate(&metric, &map, Point::new(0.0, 0.0), Point::new(0.1, 0.0), 5.0),
            Err(Error::BudgetExceeded(_))
        ));
    }

    #[test]
    fn growth_bound_holds_for_positive_v_pairs() {
        let (metric, map) = setup();
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let mut checked = 0;
        while checked < 100 {
            let x = Point::new(rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0));
            let y = Point::new(rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0));
            let v = first_difference(&metric, &map, x, y).unwrap();
            if v <= 0.0 {
                continue;
            }
            let u0 = metric.u(x, y).unwrap();
            for n in 1..=50i64 {
                let un = metric
                    .u(map.evaluate(x, n).unwrap(), map.evaluate(y, n).unwrap())
                    .unwrap();
                let bound = u0 + n as f64 * v;
                assert!(un >= bound - 1e-6 * bound.abs().max(1.0));
            }
            checked += 1;
        }
    }
}
