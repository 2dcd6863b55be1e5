//! Motion-active superpixel regions.

use crate::error::{Error, Result};
use crate::image::{check_dims, BinaryImage, Plane};

use super::morphology::MotionMask;
use super::slic::SuperpixelMap;

#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    pub label: u32,
    /// Raster indices `y * width + x`, ascending.
    pub pixels: Vec<usize>,
    /// Inclusive `(x0, y0, x1, y1)`.
    pub bbox: (usize, usize, usize, usize),
    pub seed: (f64, f64),
    /// Fraction of the region's pixels inside the motion mask.
    pub overlap: f64,
}

impl Region {
    pub fn contains_bbox(&self, x: f64, y: f64) -> bool {
        let (x0, y0, x1, y1) = self.bbox;
        x >= x0 as f64 && x <= x1 as f64 && y >= y0 as f64 && y <= y1 as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionSet {
    pub width: usize,
    pub height: usize,
    /// Sorted by label.
    pub regions: Vec<Region>,
}

impl RegionSet {
    pub fn len(&self) -> usize {
        self.regions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.regions.is_empty()
    }

    pub fn get(&self, label: u32) -> Option<&Region> {
        self.regions
            .binary_search_by_key(&label, |r| r.label)
            .ok()
            .map(|i| &self.regions[i])
    }

    /// Per-pixel index into `regions`, `None` outside every region.
    pub fn index_map(&self) -> Plane<Option<u32>> {
        let mut map = Plane::filled(self.width, self.height, None);
        for (i, r) in self.regions.iter().enumerate() {
            for &p in &r.pixels {
                map.as_mut_slice()[p] = Some(i as u32);
            }
        }
        map
    }
}

/// Keeps the clusters that meet the mask with at least `min_overlap` of
/// their pixels (and at least one pixel). Seeds start at the pixel closest to
/// the cluster centroid; query selection may move them.
pub fn filter_regions(sp: &SuperpixelMap, m: &MotionMask, min_overlap: f64) -> Result<RegionSet> {
    regions_from_labels(&sp.labels, &m.mask, min_overlap)
}

/// [`filter_regions`] on a bare label map, e.g. one read back from disk.
pub fn regions_from_labels(
    labels: &Plane<u32>,
    mask: &BinaryImage,
    min_overlap: f64,
) -> Result<RegionSet> {
    let (w, h) = labels.dims();
    check_dims((w, h), mask.dims())?;
    if !(0.0..=1.0).contains(&min_overlap) {
        return Err(Error::invalid(format!(
            "min_overlap {min_overlap} outside [0, 1]"
        )));
    }
    let k = labels
        .as_slice()
        .iter()
        .max()
        .map_or(0, |&l| l as usize + 1);
    let mut pixels: Vec<Vec<usize>> = vec![Vec::new(); k];
    let mut hits = vec![0usize; k];
    for (i, &l) in labels.as_slice().iter().enumerate() {
        pixels[l as usize].push(i);
        if mask.as_slice()[i] {
            hits[l as usize] += 1;
        }
    }
    let mut regions = Vec::new();
    for (label, px) in pixels.into_iter().enumerate() {
        if px.is_empty() || hits[label] == 0 {
            continue;
        }
        let overlap = hits[label] as f64 / px.len() as f64;
        if overlap < min_overlap {
            continue;
        }
        let (mut x0, mut y0, mut x1, mut y1) = (usize::MAX, usize::MAX, 0, 0);
        let (mut sx, mut sy) = (0.0, 0.0);
        for &p in &px {
            let (x, y) = (p % w, p / w);
            x0 = x0.min(x);
            y0 = y0.min(y);
            x1 = x1.max(x);
            y1 = y1.max(y);
            sx += x as f64;
            sy += y as f64;
        }
        let (cx, cy) = (sx / px.len() as f64, sy / px.len() as f64);
        let seed = px
            .iter()
            .map(|&p| ((p % w) as f64, (p / w) as f64))
            .min_by(|a, b| {
                let da = (a.0 - cx).powi(2) + (a.1 - cy).powi(2);
                let db = (b.0 - cx).powi(2) + (b.1 - cy).powi(2);
                da.total_cmp(&db)
            })
            .unwrap();
        regions.push(Region {
            label: label as u32,
            pixels: px,
            bbox: (x0, y0, x1, y1),
            seed,
            overlap,
        });
    }
    Ok(RegionSet {
        width: w,
        height: h,
        regions,
    })
}
