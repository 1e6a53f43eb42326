//! Non-uniform k-center solvers at desk scale.
//!
//! The crate covers the full chain needed to solve 4-NUkC with a constant
//! dilation guarantee:
//!
//! - [`model`]: metric spaces, the NUkC / Robust / Colorful instance variants,
//!   solutions and their verification, radius-class merging.
//! - [`greedy`]: the weighted greedy clustering used by every reduction.
//! - [`net`]: the (t+1)-NUkC to unweighted Robust t-NUkC equivalence via nets.
//! - [`colorful`]: Robust t-NUkC to O(n) instances of Colorful (t-1)-NUkC.
//! - [`selfcov`]: Colorful 2-NUkC to Colorful 2-NUkC with bottom radius 0.
//! - [`wsdp`]: exact dynamic program for well-separated colorful instances.
//! - [`lp`]: dense simplex returning vertex solutions, and ellipsoid geometry.
//! - [`roc`]: the round-or-cut loop separating over the coverage polytope.
//! - [`exact`]: brute-force exact solvers and planted-instance generators,
//!   used as ground truth by the test suites.
//! - [`pipeline`]: the end-to-end 4-NUkC driver with dilation accounting.

pub mod colorful;
pub mod error;
pub mod exact;
pub mod greedy;
pub mod lp;
pub mod model;
pub mod net;
pub mod pipeline;
pub mod roc;
pub mod selfcov;
pub mod wsdp;

pub use error::Error;
pub use model::{
    ball_members, merge_close_radii, validate_instance, verify_solution, CenterRestriction,
    ColorfulInstance, Instance, MetricSpace, NukcInstance, Point, RadiusMergeMap, RobustInstance,
    Solution, SolutionLevel, VerificationReport, Weights,
};

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
