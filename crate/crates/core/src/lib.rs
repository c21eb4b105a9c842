pub mod differences;
pub mod error;
pub mod maps;
pub mod metrics;
pub mod geometry;
pub mod invariant;

pub use error::{Error, Result};
pub use geometry::{Point, Polyline};
