//! Core numerics for scoring monocular depth and camera-pose predictions on
//! colonoscopy-style trajectory benchmarks.
//!
//! Everything here is pure computation over in-memory values: rigid-transform
//! arithmetic, the per-trajectory scale fits, depth and pose error metrics,
//! the three task scoring systems, and a procedural tube world with a
//! sphere-traced depth renderer for generating ground truth with known
//! answers. File formats, report emission and the CLI live in the `colobench`
//! crate.
//!
//! The crate is `no_std` and only needs `alloc`.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod depth;
pub mod error;
pub mod pose;
pub mod ranking;
pub mod se3;
pub mod stats;
pub mod synth;

pub use depth::{DepthMap, DepthMetricReport, DepthScale, FrameDepthErrors};
pub use error::{Error, Result};
pub use pose::{PoseMetricReport, PoseScale, RelativeSequence, ScaleMode, SequenceSource, Trajectory};
pub use ranking::{Leaderboard, MetricTable, Score};
pub use se3::{Pose, Quaternion, RotationMatrix, Vec3};
pub use stats::Aggregator;
pub use synth::{Intrinsics, TrajectoryPlan, TubeParams, TubeWorld};

/// Far plane of the depth encoding, in centimeters.
pub const DEPTH_FAR_PLANE_CM: f64 = 20.0;
