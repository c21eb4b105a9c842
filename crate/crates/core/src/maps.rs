//! Invertible self-maps of the plane: translations, linear hyperbolic
//! automorphisms, shear conjugators, explicit pairs, and their compositions
//! and conjugations. All built-ins are orientation-preserving and carry
//! closed-form inverses, so conjugacy experiments are free of inversion error.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point, Window};

/// Coordinate magnitude guard: iterates beyond this are reported as overflow
/// rather than silently saturating downstream ratios.
pub const OVERFLOW_LIMIT: f64 = 1e300;

/// Default cap on requested iterate counts.
pub const ITERATION_BUDGET: i64 = 10_000;

type PointFn = Arc<dyn Fn(Point) -> Point + Send + Sync>;

#[derive(Clone)]
pub enum MapKind {
    Translation { v: [f64; 2] },
    LinearHyperbolic { lambda: f64 },
    /// Shear `(x, y) -> (x, y + a sin x)`; used as a conjugator.
    SineShear { amplitude: f64 },
    /// `conjugator^-1 . base . conjugator`
    Conjugated { conjugator: Box<PlaneMap>, base: Box<PlaneMap> },
    /// Applied left to right.
    Composition { maps: Vec<PlaneMap> },
    ExplicitPair { forward: PointFn, inverse: PointFn },
}

impl std::fmt::Debug for MapKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MapKind::Translation { v } => write!(f, "Translation({}, {})", v[0], v[1]),
            MapKind::LinearHyperbolic { lambda } => write!(f, "LinearHyperbolic({lambda})"),
            MapKind::SineShear { amplitude } => write!(f, "SineShear({amplitude})"),
            MapKind::Conjugated { conjugator, base } => {
                write!(f, "Conjugated({conjugator:?}, {base:?})")
            }
            MapKind::Composition { maps } => write!(f, "Composition({maps:?})"),
            MapKind::ExplicitPair { .. } => write!(f, "ExplicitPair"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct PlaneMap {
    kind: MapKind,
}

impl PlaneMap {
    pub fn translation(v1: f64, v2: f64) -> Self {
        PlaneMap {
            kind: MapKind::Translation { v: [v1, v2] },
        }
    }

    /// The unit horizontal translation `(x, y) -> (x + 1, y)`.
    pub fn unit_translation() -> Self {
        Self::translation(1.0, 0.0)
    }

    pub fn identity() -> Self {
        Self::translation(0.0, 0.0)
    }

    /// `diag(lambda, 1/lambda)` with `lambda > 1`.
    pub fn linear_hyperbolic(lambda: f64) -> Result<Self> {
        if !(lambda > 1.0) || !lambda.is_finite() {
            return Err(Error::InvalidInput("expansion constant must exceed 1"));
        }
        Ok(PlaneMap {
            kind: MapKind::LinearHyperbolic { lambda },
        })
    }

    pub fn sine_shear(amplitude: f64) -> Self {
        PlaneMap {
            kind: MapKind::SineShear { amplitude },
        }
    }

    pub fn conjugated(conjugator: PlaneMap, base: PlaneMap) -> Self {
        PlaneMap {
            kind: MapKind::Conjugated {
                conjugator: Box::new(conjugator),
                base: Box::new(base),
            },
        }
    }

    pub fn composition(maps: Vec<PlaneMap>) -> Result<Self> {
        if maps.is_empty() {
            return Err(Error::InvalidInput("composition needs at least one map"));
        }
        Ok(PlaneMap {
            kind: MapKind::Composition { maps },
        })
    }

    pub fn explicit_pair(
        forward: impl Fn(Point) -> Point + Send + Sync + 'static,
        inverse: impl Fn(Point) -> Point + Send + Sync + 'static,
    ) -> Self {
        PlaneMap {
            kind: MapKind::ExplicitPair {
                forward: Arc::new(forward),
                inverse: Arc::new(inverse),
            },
        }
    }

    pub fn kind(&self) -> &MapKind {
        &self.kind
    }

    fn forward_raw(&self, p: Point) -> Point {
        match &self.kind {
            MapKind::Translation { v } => Point::new(p.x1 + v[0], p.x2 + v[1]),
            MapKind::LinearHyperbolic { lambda } => Point::new(p.x1 * lambda, p.x2 / lambda),
            MapKind::SineShear { amplitude } => Point::new(p.x1, p.x2 + amplitude * p.x1.sin()),
            MapKind::Conjugated { conjugator, base } => {
                conjugator.inverse_raw(base.forward_raw(conjugator.forward_raw(p)))
            }
            MapKind::Composition { maps } => maps.iter().fold(p, |q, m| m.forward_raw(q)),
            MapKind::ExplicitPair { forward, .. } => forward(p),
        }
    }

    fn inverse_raw(&self, p: Point) -> Point {
        match &self.kind {
            MapKind::Translation { v } => Point::new(p.x1 - v[0], p.x2 - v[1]),
            MapKind::LinearHyperbolic { lambda } => Point::new(p.x1 / lambda, p.x2 * lambda),
            MapKind::SineShear { amplitude } => Point::new(p.x1, p.x2 - amplitude * p.x1.sin()),
            MapKind::Conjugated { conjugator, base } => {
                conjugator.inverse_raw(base.inverse_raw(conjugator.forward_raw(p)))
            }
            MapKind::Composition { maps } => maps.iter().rev().fold(p, |q, m| m.inverse_raw(q)),
            MapKind::ExplicitPair { inverse, .. } => inverse(p),
        }
    }

    pub fn forward(&self, p: Point) -> Result<Point> {
        guard(self.forward_raw(p))
    }

    pub fn inverse(&self, p: Point) -> Result<Point> {
        guard(self.inverse_raw(p))
    }

    /// `f^n(p)`: composes the forward map for `n > 0`, the inverse for
    /// `n < 0`; `f^0` is the identity.
    pub fn evaluate(&self, p: Point, n: i64) -> Result<Point> {
        if n.abs() > ITERATION_BUDGET {
            return Err(Error::IterationBudget {
                requested: n,
                budget: ITERATION_BUDGET,
            });
        }
        if !p.is_finite() {
            return Err(Error::NonFinite);
        }
        let mut q = p;
        for _ in 0..n.abs() {
            q = if n > 0 {
                self.forward(q)?
            } else {
                self.inverse(q)?
            };
        }
        Ok(q)
    }

    /// Orientation is a declared attribute of the built-ins, not something
    /// verified numerically.
    pub fn orientation_preserving(&self) -> bool {
        match &self.kind {
            MapKind::Translation { .. }
            | MapKind::LinearHyperbolic { .. }
            | MapKind::SineShear { .. }
            | MapKind::ExplicitPair { .. } => true,
            MapKind::Conjugated { conjugator, base } => {
                // H^-1 f H preserves orientation iff f does.
                let _ = conjugator;
                base.orientation_preserving()
            }
            MapKind::Composition { maps } => {
                maps.iter().filter(|m| !m.orientation_preserving()).count() % 2 == 0
            }
        }
    }
}

fn guard(p: Point) -> Result<Point> {
    if !p.is_finite() || p.x1.abs() > OVERFLOW_LIMIT || p.x2.abs() > OVERFLOW_LIMIT {
        Err(Error::Overflow)
    } else {
        Ok(p)
    }
}

/// Sampled orbit of a base point: pairs `(n, f^n(base))` with consecutive
/// entries related by one application of the map.
#[derive(Debug, Clone, Serialize)]
pub struct OrbitSegment {
    pub base: Point,
    pub samples: Vec<(i64, Point)>,
}

pub fn orbit_segment(map: &PlaneMap, base: Point, n_min: i64, n_max: i64) -> Result<OrbitSegment> {
    if n_min > n_max {
        return Err(Error::InvalidInput("orbit range is empty"));
    }
    let mut samples = Vec::with_capacity((n_max - n_min + 1) as usize);
    for n in n_min..=n_max {
        samples.push((n, map.evaluate(base, n)?));
    }
    Ok(OrbitSegment { base, samples })
}

/// Max over the sample of `|f^-1(f(p)) - p|`: the roundtrip contract.
pub fn roundtrip_check(map: &PlaneMap, sample: &[Point]) -> Result<f64> {
    if sample.is_empty() {
        return Err(Error::InvalidInput("empty sample"));
    }
    let mut worst = 0.0f64;
    for &p in sample {
        let back = map.inverse(map.forward(p)?)?;
        worst = worst.max(back.dist(p));
    }
    Ok(worst)
}

/// Minimum grid displacement `|f(p) - p|` over the window. A positive value
/// is a sampling certificate only, not a proof of fixed-point freeness.
pub fn fixed_point_free_scan(map: &PlaneMap, window: Window, resolution: f64) -> Result<f64> {
    if !(resolution > 0.0) {
        return Err(Error::InvalidInput("resolution must be positive"));
    }
    let nx = ((window.max.x1 - window.min.x1) / resolution).round() as usize;
    let ny = ((window.max.x2 - window.min.x2) / resolution).round() as usize;
    let mut min_disp = f64::INFINITY;
    for i in 0..=nx {
        for j in 0..=ny {
            let p = Point::new(
                window.min.x1 + i as f64 * resolution,
                window.min.x2 + j as f64 * resolution,
            );
            min_disp = min_disp.min(map.forward(p)?.dist(p));
        }
    }
    Ok(min_disp)
}

/// JSON map specification:
/// `{"kind": "...", "params": {...}, "conjugator": <nested>, "base": <nested>}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MapSpec {
    Translation { params: TranslationParams },
    LinearHyperbolic { params: ExpansionParams },
    SineShear { params: ShearParams },
    Conjugated { conjugator: Box<MapSpec>, base: Box<MapSpec> },
    Composition { maps: Vec<MapSpec> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TranslationParams {
    pub v: [f64; 2],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExpansionParams {
    pub lambda: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ShearParams {
    pub amplitude: f64,
}

impl MapSpec {
    pub fn build(&self) -> Result<PlaneMap> {
        Ok(match self {
            MapSpec::Translation { params } => PlaneMap::translation(params.v[0], params.v[1]),
            MapSpec::LinearHyperbolic { params } => PlaneMap::linear_hyperbolic(params.lambda)?,
            MapSpec::SineShear { params } => PlaneMap::sine_shear(params.amplitude),
            MapSpec::Conjugated { conjugator, base } => {
                PlaneMap::conjugated(conjugator.build()?, base.build()?)
            }
            MapSpec::Composition { maps } => {
                let mut built = Vec::with_capacity(maps.len());
                for m in maps {
                    built.push(m.build()?);
                }
                PlaneMap::composition(built)?
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn grid(lo: f64, hi: f64, n: usize) -> Vec<Point> {
        let mut pts = Vec::new();
        for i in 0..=n {
            for j in 0..=n {
                pts.push(Point::new(
                    lo + (hi - lo) * i as f64 / n as f64,
                    lo + (hi - lo) * j as f64 / n as f64,
                ));
            }
        }
        pts
    }

    fn conjugated_translation() -> PlaneMap {
        PlaneMap::conjugated(PlaneMap::sine_shear(0.5), PlaneMap::unit_translation())
    }

    #[test]
    fn translation_iterates() {
        let t = PlaneMap::unit_translation();
        let p = t.evaluate(Point::new(0.0, 0.0), 5).unwrap();
        assert_eq!(p, Point::new(5.0, 0.0));
    }

    #[test]
    fn linear_hyperbolic_single_step() {
        let f = PlaneMap::linear_hyperbolic(2.0).unwrap();
        let p = f.evaluate(Point::new(1.0, 1.0), 1).unwrap();
        assert_eq!(p, Point::new(2.0, 0.5));
    }

    #[test]
    fn conjugated_map_composes_through_the_shear() {
        // H(x,y) = (x, y + 0.5 sin x): H(0,0) = (0,0), T -> (1,0),
        // H^-1 -> (1, -0.5 sin 1).
        let g = conjugated_translation();
        let p = g.evaluate(Point::new(0.0, 0.0), 1).unwrap();
        assert_abs_diff_eq!(p.x1, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p.x2, -0.5 * 1.0f64.sin(), epsilon = 1e-15);
        assert_abs_diff_eq!(p.x2, -0.42073549240394824, epsilon = 1e-12);
    }

    #[test]
    fn roundtrip_deviation_bounds() {
        let pts = grid(-10.0, 10.0, 9);
        assert_eq!(
            roundtrip_check(&PlaneMap::unit_translation(), &pts).unwrap(),
            0.0
        );
        assert!(
            roundtrip_check(&PlaneMap::linear_hyperbolic(2.0).unwrap(), &pts).unwrap() <= 1e-12
        );
        assert!(roundtrip_check(&conjugated_translation(), &pts).unwrap() <= 1e-9);
    }

    #[test]
    fn fixed_point_scan_examples() {
        let w = Window::new(Point::new(-32.0, -32.0), Point::new(32.0, 32.0));
        let t = fixed_point_free_scan(&PlaneMap::unit_translation(), w, 0.5).unwrap();
        assert_abs_diff_eq!(t, 1.0, epsilon = 1e-15);

        let lh = fixed_point_free_scan(&PlaneMap::linear_hyperbolic(2.0).unwrap(), w, 0.5).unwrap();
        assert!(lh <= 1e-12, "origin is fixed, scan reported {lh}");

        let g = fixed_point_free_scan(&conjugated_translation(), w, 0.5).unwrap();
        assert!(g >= 0.5, "conjugated translation displaced only {g}");
    }

    #[test]
    fn iterate_composition_law() {
        let maps = [
            PlaneMap::unit_translation(),
            PlaneMap::linear_hyperbolic(2.0).unwrap(),
            conjugated_translation(),
        ];
        let p = Point::new(0.3, -0.7);
        for map in &maps {
            for (n, m) in [(3i64, 4i64), (-5, 2), (7, -9), (-4, -6), (50, -50)] {
                let direct = map.evaluate(p, n + m).unwrap();
                let staged = map.evaluate(map.evaluate(p, n).unwrap(), m).unwrap();
                assert!(direct.dist(staged) <= 1e-8, "law failed for {map:?}");
            }
        }
    }

    #[test]
    fn conjugation_matches_pointwise_composition() {
        let h = PlaneMap::sine_shear(0.5);
        let base = PlaneMap::unit_translation();
        let g = PlaneMap::conjugated(h.clone(), base.clone());
        for p in grid(-5.0, 5.0, 6) {
            let lhs = g.forward(p).unwrap();
            let rhs = h.inverse(base.forward(h.forward(p).unwrap()).unwrap()).unwrap();
            assert!(lhs.dist(rhs) <= 1e-9);
        }
    }

    #[test]
    fn overflow_and_budget_guards() {
        let f = PlaneMap::linear_hyperbolic(2.0).unwrap();
        assert!(matches!(
            f.evaluate(Point::new(1.0, 0.0), 1100),
            Err(Error::Overflow)
        ));
        assert!(matches!(
            f.evaluate(Point::new(1.0, 0.0), 20_000),
            Err(Error::IterationBudget { .. })
        ));
    }

    #[test]
    fn spec_round_trip_builds_equivalent_map() {
        let text = r#"{
            "kind": "conjugated",
            "conjugator": {"kind": "sine_shear", "params": {"amplitude": 0.5}},
            "base": {"kind": "translation", "params": {"v": [1.0, 0.0]}}
        }"#;
        let spec: MapSpec = serde_json::from_str(text).unwrap();
        let built = spec.build().unwrap();
        let reference = conjugated_translation();
        for p in grid(-3.0, 3.0, 4) {
            assert!(built.forward(p).unwrap().dist(reference.forward(p).unwrap()) < 1e-15);
        }
    }
}
