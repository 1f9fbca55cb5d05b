//! Pose-based fall detection from single images.
//!
//! The pipeline consumes 2d keypoints produced by an external pose estimator,
//! normalizes them into a fixed reference frame, lifts them to hip-relative 3d
//! joints with a residual MLP and classifies fall / no-fall with a two-branch
//! network that fuses the 2d and 3d modalities. Both networks can be trained
//! with random joint occlusion (OJR) so they tolerate missing joints.
//!
//! Everything below the network level is implemented here: a small dense
//! tensor engine with reverse-mode gradients, a synthetic pose generator, and
//! an evaluation harness for occlusion-robustness sweeps.

pub mod data;
pub mod error;
pub mod eval;
pub mod fallnet;
pub mod features;
pub mod nn;
pub mod ojr;
pub mod pose;
pub mod posenet;
pub mod rng;
pub mod synth;
pub mod training;

#[cfg(feature = "cli")]
pub mod cli;

pub use error::{Error, Result};
pub use pose::{BBox, JointLayout, Pose2D, Pose3D, ReferenceFrame, NUM_JOINTS};
