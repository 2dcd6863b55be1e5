//! Per-region trajectory tracking over voxel bins.

mod correlation;
mod endpoint;
mod pyramid;
mod query;
mod track;

pub use correlation::{local_correlation, patch_zncc, sample_patch, Template};
pub use endpoint::{anchor_endpoints, EndpointConfig};
pub use pyramid::{
    average_pool, build_feature_pyramid, FeatureMap, FeaturePyramid, DEFAULT_SCALES,
};
pub use query::{corner_response, select_query_points, QueryPoint, QuerySource};
pub use track::{track_region, TrackerConfig, Trajectory, TrajectorySet};

use rayon::prelude::*;

/// Tracks every query point; regions run in parallel, output sorted by label.
pub fn track_all(p: &FeaturePyramid, queries: &[QueryPoint], cfg: &TrackerConfig) -> TrajectorySet {
    let mut trajectories: Vec<Trajectory> = queries
        .par_iter()
        .map(|q| track_region(p, q, cfg))
        .collect();
    trajectories.sort_by_key(|t| t.label);
    TrajectorySet { trajectories }
}
