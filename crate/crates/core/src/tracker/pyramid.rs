//! Multi-scale event features built from a voxel grid.
//!
//! Per bin: absolute value, 3x3 box smoothing, max-normalisation, then an
//! average-pooling chain down to every requested scale. The smoothed
//! full-resolution map is kept as the base level for sub-pixel work.

use crate::error::{Error, Result};
use crate::image::bilinear_axis;
use crate::voxel::VoxelGrid;

pub const DEFAULT_SCALES: [usize; 4] = [4, 8, 16, 32];

/// One feature map; cell `(i, j)` covers pixels `[s*i, s*i + s) x [s*j, s*j + s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    scale: usize,
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl FeatureMap {
    pub fn scale(&self) -> usize {
        self.scale
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f32 {
        self.data[j * self.width + i]
    }

    /// Cell coordinate of a full-resolution pixel position.
    #[inline]
    pub fn to_cell(&self, p: f64) -> f64 {
        let s = self.scale as f64;
        (p + 0.5) / s - 0.5
    }

    /// Bilinear sample in cell coordinates, clamp-to-edge.
    #[inline]
    pub fn sample(&self, cx: f64, cy: f64) -> f64 {
        let (x0, x1, fx) = bilinear_axis(cx, self.width);
        let (y0, y1, fy) = bilinear_axis(cy, self.height);
        let w = self.width;
        let a = self.data[y0 * w + x0] as f64;
        let b = self.data[y0 * w + x1] as f64;
        let c = self.data[y1 * w + x0] as f64;
        let d = self.data[y1 * w + x1] as f64;
        let top = a + fx * (b - a);
        let bottom = c + fx * (d - c);
        top + fy * (bottom - top)
    }
}

/// Average pooling by `factor`; edge cells average over the pixels they hold.
pub fn average_pool(src: &FeatureMap, factor: usize) -> FeatureMap {
    let width = src.width.div_ceil(factor);
    let height = src.height.div_ceil(factor);
    let mut data = Vec::with_capacity(width * height);
    for j in 0..height {
        for i in 0..width {
            let mut sum = 0.0f64;
            let mut n = 0usize;
            for y in j * factor..((j + 1) * factor).min(src.height) {
                for x in i * factor..((i + 1) * factor).min(src.width) {
                    sum += src.get(x, y) as f64;
                    n += 1;
                }
            }
            data.push((sum / n as f64) as f32);
        }
    }
    FeatureMap {
        scale: src.scale * factor,
        width,
        height,
        data,
    }
}

/// Per-bin feature maps at every scale.
#[derive(Debug, Clone, PartialEq)]
pub struct FeaturePyramid {
    width: usize,
    height: usize,
    scales: Vec<usize>,
    /// `levels[k][0]` is the full-resolution base, `levels[k][1 + i]` is scale `scales[i]`.
    levels: Vec<Vec<FeatureMap>>,
    bin_times: Vec<f64>,
}

impl FeaturePyramid {
    pub fn bins(&self) -> usize {
        self.levels.len()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn scales(&self) -> &[usize] {
        &self.scales
    }

    pub fn bin_times(&self) -> &[f64] {
        &self.bin_times
    }

    /// Full-resolution smoothed, normalised map of bin `k`.
    pub fn base(&self, k: usize) -> &FeatureMap {
        &self.levels[k][0]
    }

    /// Pooled maps of bin `k`, finest first.
    pub fn scaled(&self, k: usize) -> &[FeatureMap] {
        &self.levels[k][1..]
    }

    pub fn level(&self, k: usize, scale_index: usize) -> &FeatureMap {
        &self.levels[k][1 + scale_index]
    }

    /// Pyramid with bins in reverse order.
    pub fn bin_reversed(&self) -> FeaturePyramid {
        let mut levels = self.levels.clone();
        levels.reverse();
        FeaturePyramid {
            width: self.width,
            height: self.height,
            scales: self.scales.clone(),
            levels,
            bin_times: self.bin_times.clone(),
        }
    }
}

/// Builds the per-bin feature pyramid at the given (increasing, chained)
/// scales.
pub fn build_feature_pyramid(v: &VoxelGrid, scales: &[usize]) -> Result<FeaturePyramid> {
    if v.bins() < 2 {
        return Err(Error::invalid(format!(
            "feature pyramid needs at least two bins, got {}",
            v.bins()
        )));
    }
    validate_scales(scales)?;
    let (w, h) = v.dims();
    let mut levels = Vec::with_capacity(v.bins());
    for k in 0..v.bins() {
        let base = base_level(v, k);
        let mut maps = Vec::with_capacity(scales.len() + 1);
        let mut prev_scale = 1;
        let mut prev = &base;
        for &s in scales {
            let next = average_pool(prev, s / prev_scale);
            maps.push(next);
            prev = maps.last().unwrap();
            prev_scale = s;
        }
        maps.insert(0, base);
        levels.push(maps);
    }
    Ok(FeaturePyramid {
        width: w,
        height: h,
        scales: scales.to_vec(),
        levels,
        bin_times: (0..v.bins()).map(|k| v.bin_time(k)).collect(),
    })
}

fn validate_scales(scales: &[usize]) -> Result<()> {
    if scales.is_empty() {
        return Err(Error::invalid("at least one pyramid scale is required"));
    }
    let mut prev = 1;
    for &s in scales {
        if s <= prev || s % prev != 0 {
            return Err(Error::invalid(format!(
                "scales must increase and divide each other, got {scales:?}"
            )));
        }
        prev = s;
    }
    Ok(())
}

fn base_level(v: &VoxelGrid, k: usize) -> FeatureMap {
    let (w, h) = v.dims();
    let mut smoothed = vec![0.0f64; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut sum = 0.0;
            for dy in -1isize..=1 {
                for dx in -1isize..=1 {
                    let sx = (x as isize + dx).clamp(0, w as isize - 1) as usize;
                    let sy = (y as isize + dy).clamp(0, h as isize - 1) as usize;
                    sum += v.get(k, sx, sy).abs();
                }
            }
            smoothed[y * w + x] = sum / 9.0;
        }
    }
    let max = smoothed.iter().cloned().fold(0.0, f64::max);
    let data = if max > 0.0 {
        smoothed.iter().map(|&s| (s / max) as f32).collect()
    } else {
        vec![0.0; w * h]
    };
    FeatureMap {
        scale: 1,
        width: w,
        height: h,
        data,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event::{Event, EventStream};
    use crate::voxel::build_voxel_grid;

    #[test]
    fn zero_grid_gives_zero_pyramid() {
        let v = build_voxel_grid(&EventStream::empty(37, 29), 3, 0.0, 1.0).unwrap();
        let p = build_feature_pyramid(&v, &DEFAULT_SCALES).unwrap();
        for k in 0..3 {
            assert!(p.base(k).data().iter().all(|&x| x == 0.0));
            for (m, s) in p.scaled(k).iter().zip(DEFAULT_SCALES) {
                assert_eq!(m.width(), 37usize.div_ceil(s));
                assert_eq!(m.height(), 29usize.div_ceil(s));
                assert!(m.data().iter().all(|&x| x == 0.0));
            }
        }
    }

    #[test]
    fn unit_pixel_pools_to_one_sixteenth() {
        let mut data = vec![0.0f32; 16 * 16];
        data[5 * 16 + 6] = 1.0;
        let base = FeatureMap {
            scale: 1,
            width: 16,
            height: 16,
            data,
        };
        let pooled = average_pool(&base, 4);
        assert_eq!(pooled.scale(), 4);
        assert_eq!(pooled.get(1, 1), 1.0 / 16.0);
        let total: f32 = pooled.data().iter().sum();
        assert_eq!(total, 1.0 / 16.0);
    }

    #[test]
    fn partial_edge_cells_average_existing_pixels() {
        let base = FeatureMap {
            scale: 1,
            width: 5,
            height: 1,
            data: vec![0.0, 0.0, 0.0, 0.0, 1.0],
        };
        let pooled = average_pool(&base, 4);
        assert_eq!(pooled.width(), 2);
        assert_eq!(pooled.get(1, 0), 1.0);
    }

    #[test]
    fn normalisation_and_errors() {
        let s = EventStream::new(
            8,
            8,
            vec![Event::new(0.0, 3, 3, -1), Event::new(0.0, 3, 3, -1)],
        )
        .unwrap();
        let v = build_voxel_grid(&s, 2, 0.0, 1.0).unwrap();
        let p = build_feature_pyramid(&v, &DEFAULT_SCALES).unwrap();
        let max = p.base(0).data().iter().cloned().fold(0.0, f32::max);
        assert_eq!(max, 1.0);
        assert!(p.base(1).data().iter().all(|&x| x == 0.0));

        let one = build_voxel_grid(&s, 1, 0.0, 1.0).unwrap();
        assert!(build_feature_pyramid(&one, &DEFAULT_SCALES).is_err());
        assert!(build_feature_pyramid(&v, &[4, 6]).is_err());
        assert!(build_feature_pyramid(&v, &[]).is_err());
    }
}
