//! Query point selection: one trackable point per region.

use crate::error::{Error, Result};
use crate::event::{accumulate_event_frame, EventStream};
use crate::image::{check_dims, Frame, ScalarImage};
use crate::segmentation::RegionSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuerySource {
    Corner,
    NearestEvent,
}

impl QuerySource {
    pub fn name(self) -> &'static str {
        match self {
            QuerySource::Corner => "corner",
            QuerySource::NearestEvent => "nearest_event",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QueryPoint {
    pub label: u32,
    pub x: f64,
    pub y: f64,
    pub source: QuerySource,
}

const HARRIS_K: f64 = 0.04;
const HARRIS_RADIUS: isize = 2;
const CORE_DEPTH: u32 = 3;

/// Harris corner response from Sobel gradients summed over a 5x5 window,
/// divided by its maximum positive value (so the strongest corner reads 1).
pub fn corner_response(img: &Frame) -> ScalarImage {
    let gray = img.to_gray();
    let (w, h) = gray.dims();
    let at = |x: isize, y: isize| {
        *gray.get(
            x.clamp(0, w as isize - 1) as usize,
            y.clamp(0, h as isize - 1) as usize,
        ) as f64
    };
    let mut ixx = vec![0.0; w * h];
    let mut iyy = vec![0.0; w * h];
    let mut ixy = vec![0.0; w * h];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let gx = (at(x + 1, y - 1) + 2.0 * at(x + 1, y) + at(x + 1, y + 1)
                - at(x - 1, y - 1)
                - 2.0 * at(x - 1, y)
                - at(x - 1, y + 1))
                / 8.0;
            let gy = (at(x - 1, y + 1) + 2.0 * at(x, y + 1) + at(x + 1, y + 1)
                - at(x - 1, y - 1)
                - 2.0 * at(x, y - 1)
                - at(x + 1, y - 1))
                / 8.0;
            let i = y as usize * w + x as usize;
            ixx[i] = gx * gx;
            iyy[i] = gy * gy;
            ixy[i] = gx * gy;
        }
    }
    let mut r = vec![0.0; w * h];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
            for dy in -HARRIS_RADIUS..=HARRIS_RADIUS {
                for dx in -HARRIS_RADIUS..=HARRIS_RADIUS {
                    let sx = (x + dx).clamp(0, w as isize - 1) as usize;
                    let sy = (y + dy).clamp(0, h as isize - 1) as usize;
                    let j = sy * w + sx;
                    a += ixx[j];
                    b += iyy[j];
                    c += ixy[j];
                }
            }
            let tr = a + b;
            r[y as usize * w + x as usize] = a * b - c * c - HARRIS_K * tr * tr;
        }
    }
    let max = r.iter().cloned().fold(0.0, f64::max);
    if max > 0.0 {
        for v in &mut r {
            *v /= max;
        }
    }
    ScalarImage::from_vec(w, h, r).expect("sized")
}

/// 4-connected distance of each pixel to the outside of its region, in the
/// order of `pixels`. `scratch` is a `w*h` buffer holding `u32::MAX` on entry
/// and on return.
fn inset_depth(pixels: &[usize], w: usize, h: usize, scratch: &mut [u32]) -> Vec<u32> {
    const UNSET: u32 = u32::MAX - 1;
    for &p in pixels {
        scratch[p] = UNSET;
    }
    let mut queue = std::collections::VecDeque::new();
    for &p in pixels {
        let (x, y) = (p % w, p / w);
        let edge = x == 0
            || y == 0
            || x + 1 == w
            || y + 1 == h
            || [p - 1, p + 1, p - w, p + w]
                .iter()
                .any(|&q| scratch[q] == u32::MAX);
        if edge {
            scratch[p] = 1;
            queue.push_back(p);
        }
    }
    while let Some(p) = queue.pop_front() {
        let (x, y) = (p % w, p / w);
        let d = scratch[p] + 1;
        let mut visit = |q: usize| {
            if scratch[q] == UNSET {
                scratch[q] = d;
                queue.push_back(q);
            }
        };
        if x > 0 {
            visit(p - 1);
        }
        if x + 1 < w {
            visit(p + 1);
        }
        if y > 0 {
            visit(p - w);
        }
        if y + 1 < h {
            visit(p + w);
        }
    }
    let depth = pixels.iter().map(|&p| scratch[p]).collect();
    for &p in pixels {
        scratch[p] = u32::MAX;
    }
    depth
}

/// Picks the strongest corner in the core of each region (pixels at least
/// half the region's maximum inset from its border), which keeps queries off
/// outlines shared with differently moving surroundings. When the corner is
/// weak or has no event, the core's event pixel nearest to it is used
/// instead, then any event pixel of the region; a region without any event
/// keeps its corner.
pub fn select_query_points(
    img: &Frame,
    regions: &RegionSet,
    events: &EventStream,
    corner_threshold: f64,
) -> Result<Vec<QueryPoint>> {
    check_dims((regions.width, regions.height), img.dims())?;
    check_dims((regions.width, regions.height), events.dims())?;
    let response = corner_response(img);
    let fired = accumulate_event_frame(events);
    let w = regions.width;
    let mut scratch = vec![u32::MAX; w * regions.height];
    let mut out = Vec::with_capacity(regions.len());
    for region in &regions.regions {
        if region.pixels.is_empty() {
            return Err(Error::invalid(format!(
                "region {} has no pixels",
                region.label
            )));
        }
        let depth = inset_depth(&region.pixels, w, regions.height, &mut scratch);
        let deepest = depth.iter().copied().max().unwrap_or(1);
        let floor = deepest.min(CORE_DEPTH);
        let core: Vec<usize> = region
            .pixels
            .iter()
            .zip(&depth)
            .filter(|&(_, &d)| d >= floor)
            .map(|(&p, _)| p)
            .collect();
        let mut best = core[0];
        for &p in &core {
            if response.as_slice()[p] > response.as_slice()[best] {
                best = p;
            }
        }
        let strong = response.as_slice()[best] > corner_threshold;
        let (bx, by) = ((best % w) as f64, (best / w) as f64);
        let nearest_event = |cands: &[usize]| {
            cands
                .iter()
                .copied()
                .filter(|&p| fired.as_slice()[p])
                .min_by(|&a, &b| {
                    let da = ((a % w) as f64 - bx).powi(2) + ((a / w) as f64 - by).powi(2);
                    let db = ((b % w) as f64 - bx).powi(2) + ((b / w) as f64 - by).powi(2);
                    da.total_cmp(&db)
                })
        };
        let (p, source) = if strong && fired.as_slice()[best] {
            (best, QuerySource::Corner)
        } else {
            match nearest_event(&core).or_else(|| nearest_event(&region.pixels)) {
                Some(p) => (p, QuerySource::NearestEvent),
                None => (best, QuerySource::Corner),
            }
        };
        out.push(QueryPoint {
            label: region.label,
            x: (p % w) as f64,
            y: (p / w) as f64,
            source,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event::Event;
    use crate::segmentation::Region;

    fn whole_image_region(w: usize, h: usize) -> RegionSet {
        RegionSet {
            width: w,
            height: h,
            regions: vec![Region {
                label: 0,
                pixels: (0..w * h).collect(),
                bbox: (0, 0, w - 1, h - 1),
                seed: (0.0, 0.0),
                overlap: 1.0,
            }],
        }
    }

    #[test]
    fn corner_of_bright_quadrant() {
        let img = Frame::gray_from_fn(24, 24, |x, y| if x >= 12 && y >= 12 { 250.0 } else { 0.0 });
        let mut events = Vec::new();
        for y in 9..16u16 {
            for x in 9..16u16 {
                events.push(Event::new(0.0, x, y, 1));
            }
        }
        let s = EventStream::new(24, 24, events).unwrap();
        let q = select_query_points(&img, &whole_image_region(24, 24), &s, 0.01).unwrap();
        assert_eq!(q[0].source, QuerySource::Corner);
        assert!((q[0].x - 12.0).abs() <= 1.0 && (q[0].y - 12.0).abs() <= 1.0);
    }

    #[test]
    fn flat_region_uses_the_event_pixel() {
        let img = Frame::filled(10, 10, 1, 40.0);
        let s = EventStream::new(10, 10, vec![Event::new(0.5, 7, 2, -1)]).unwrap();
        let q = select_query_points(&img, &whole_image_region(10, 10), &s, 0.01).unwrap();
        assert_eq!(q[0].source, QuerySource::NearestEvent);
        assert_eq!((q[0].x, q[0].y), (7.0, 2.0));
    }
}
