//! Combings on finite truncations of metric spaces, Rips complexes,
//! cohomology with finite supports and ray-clustering coronas.
//!
//! All distances are non-negative integers under a per-space scale
//! (true distance = entry / scale). Nothing in the metric or cohomology
//! code touches floating point.

pub mod cohomology;
pub mod combing;
pub mod cones;
pub mod corona;
mod error;
pub mod metric_core;
pub mod rips;

pub use error::{Budget, CoarseError, Result};
pub use metric_core::{Dist, FiniteMetricSpace, PointId};

/// Version stamped into every serialized artifact.
pub const FORMAT_VERSION: u32 = 1;
