//! Error type shared by every module of the crate.

use crate::geometry::Point;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A coordinate was NaN or infinite where a finite value is required.
    #[error("non-finite coordinate encountered")]
    NonFinite,

    /// Two segments are collinear and overlap in more than a point, or meet
    /// at an angle too shallow to classify the crossing.
    #[error("degenerate overlap between segments near ({0:?})")]
    DegenerateOverlap(Point),

    /// The two polylines share an endpoint, which the crossing contract forbids.
    #[error("polylines share an endpoint at {0:?}")]
    SharedEndpoint(Point),

    /// A parity-based separation query cannot be decided inside the sampled
    /// window (query point too close to the curve, or the curve terminates
    /// strictly inside the window spanned by curve and query points).
    #[error("separation query inconclusive: {0}")]
    Inconclusive(&'static str),

    /// An iterate or metric value exceeded the 1e300 magnitude guard.
    #[error("coordinate or metric value overflow beyond 1e300")]
    Overflow,

    /// Requested iterate count exceeds the configured iteration budget.
    #[error("iteration count {requested} exceeds budget {budget}")]
    IterationBudget { requested: i64, budget: i64 },

    /// An iterative search did not settle within its evaluation budget.
    #[error("evaluation budget exceeded: {0}")]
    BudgetExceeded(&'static str),

    /// Second difference was non-positive for a distinct pair: the metric/map
    /// pairing does not satisfy the convexity premise (not a numeric bug).
    #[error("second difference non-positive ({value}) for a distinct pair")]
    NonPositiveW { value: f64 },

    /// Sphere probe found no sign change of the first difference: the pairing
    /// violates the both-signs hypothesis.
    #[error("sphere probe found no sign change over the scanned directions")]
    ProbeFailed,

    /// Continuation tracing found no admissible point on the very first
    /// transversal; membership bound or iterate depth is too tight.
    #[error("leaf tracing lost the curve at the first transversal")]
    LeafLost,

    /// Even the grid node nearest the base point escapes; grid too coarse.
    #[error("stable-set component empty: base node escapes")]
    EmptyComponent,

    /// The leaf maps onto itself (within tolerance); operations requiring a
    /// non-invariant leaf cannot proceed.
    #[error("leaf is invariant under the map (deviation {deviation})")]
    InvariantLeaf { deviation: f64 },

    /// The leaf does not separate its image from its preimage.
    #[error("leaf does not separate its forward and backward images")]
    NotSeparating,

    /// Fundamental-domain boundaries intersect.
    #[error("domain boundary curves cross each other")]
    BoundariesCross,

    /// Limit-leaf search: crossing sequence is not monotone/bounded in budget.
    #[error("boundary crossing sequence does not converge within budget")]
    NotConverging,

    /// Chart normalization denominator below 1e-9.
    #[error("conjugacy chart degenerate: normalizing span {span} too small")]
    ChartDegenerate { span: f64 },

    /// Orbit growth fell below the telescoping lower bound.
    #[error("growth bound violated at step {n}: {actual} < {expected}")]
    GrowthBoundViolated { n: i64, actual: f64, expected: f64 },

    /// Identical points given where a distinct pair is required.
    #[error("identical points given where a distinct pair is required")]
    IdenticalPoints,

    #[error("invalid input: {0}")]
    InvalidInput(&'static str),
}
