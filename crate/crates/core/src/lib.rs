//! Pose correction for relative (non-key) frames after a keyframe-based SLAM
//! back-end refines its keyframes.
//!
//! The crate provides the measurement-constraint correction ([`correction`]),
//! five element-wise interpolation baselines ([`baseline`]), a synthetic scene
//! oracle ([`synth`]), evaluation utilities ([`eval`]) and trajectory file
//! formats ([`io`]).

pub mod baseline;
pub mod cli;
pub mod config;
pub mod correction;
pub mod error;
pub mod eval;
pub mod fixtures;
pub mod io;
pub mod liegeom;
pub mod pipeline;
pub mod synth;
pub mod trajectory;

pub use error::{Error, Result};
pub use liegeom::{Pose, Rotation, Vec3};
pub use pipeline::{correct_trajectory, Method, MethodConfig};
pub use trajectory::{FrameId, KeyframeUpdate, Trajectory};
