//! Exact recovery of hidden k-class partitions of finite point sets in R^m
//! under convex hull margin assumptions, using label and seed queries.
//!
//! The crate is organized bottom-up:
//! - [`geometry`]: ellipsoids, seminorm metrics, MVEE, hull distance and
//!   membership;
//! - [`sampling`]: hit-and-run sampling of halfspace-restricted balls with
//!   rounding frames;
//! - [`oracles`]: hidden-target label/seed oracles, query ledgers, and the
//!   adversarial staircase oracle;
//! - [`rounding`]: partition of a point set into well-rounded cells;
//! - [`cutting_plane`]: separator learning via centroid cuts in a lifted
//!   version space;
//! - [`learners`]: the binary, k-class, and one-sided end-to-end learners;
//! - [`instances`]: generators and margin certification for benchmark
//!   families.

// Numeric kernels walk several same-length arrays by index; iterator zips
// would obscure the matrix algebra they mirror.
#![allow(clippy::needless_range_loop)]

pub mod cutting_plane;
pub mod geometry;
pub mod instances;
pub mod learners;
pub mod oracles;
pub mod rounding;
pub mod sampling;

pub mod prelude {
    pub use crate::geometry::{
        diameter, distortion, hull_distance, hull_membership, mvee, AffineMap, Ellipsoid,
        GeomError, Halfspace, Point, SeminormMetric, Tol, TOL,
    };
}
