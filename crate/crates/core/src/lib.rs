//! Event-camera video frame interpolation.
//!
//! The pipeline turns two boundary frames and the events recorded between
//! them into frames at arbitrary intermediate times: events are voxelised,
//! the first frame is split into motion-active superpixel regions, one point
//! per region is tracked through the voxel bins (forwards and on the reversed
//! stream), the tracks are densified into any-time flow, and the boundary
//! frames are warped and fused with forward/backward consistency weights.

// `!(x >= 0.0)` style checks are meant to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod event;
pub mod flo;
pub mod flow;
pub mod image;
pub mod interpolate;
pub mod metrics;
pub mod pipeline;
pub mod pnm;
pub mod scene;
pub mod segmentation;
pub mod simulator;
pub mod tracker;
pub mod voxel;

pub use error::{Error, Result};
