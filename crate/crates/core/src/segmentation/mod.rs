//! Superpixel clustering, motion masking and region filtering.

mod morphology;
mod regions;
mod slic;

pub use morphology::{
    close, dilate, disc, erode, motion_mask, remove_small_components, MotionMask,
};
pub use regions::{filter_regions, regions_from_labels, Region, RegionSet};
pub use slic::{slic_segment, Center, SlicConfig, SuperpixelMap};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentationConfig {
    pub slic: SlicConfig,
    pub structuring_radius: usize,
    pub min_component_px: usize,
    pub min_overlap: f64,
}

impl Default for SegmentationConfig {
    fn default() -> Self {
        SegmentationConfig {
            slic: SlicConfig::default(),
            structuring_radius: 2,
            min_component_px: 8,
            min_overlap: 0.1,
        }
    }
}

impl SegmentationConfig {
    pub fn validate(&self) -> Result<()> {
        self.slic.validate()?;
        if self.structuring_radius == 0 {
            return Err(Error::Config(
                "segment.structuring_radius must be at least 1".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.min_overlap) {
            return Err(Error::Config(
                "segment.min_overlap must lie in [0, 1]".into(),
            ));
        }
        Ok(())
    }
}
