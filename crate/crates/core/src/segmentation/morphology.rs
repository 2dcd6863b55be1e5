//! Binary morphology for the motion mask.

use crate::error::{Error, Result};
use crate::image::BinaryImage;

/// Offsets of a disc structuring element of radius `r`: the lattice points
/// within `r + 1/2` of the centre, so a radius-2 disc bridges one-pixel gaps
/// in a one-pixel line.
pub fn disc(radius: usize) -> Vec<(isize, isize)> {
    let r = radius as isize;
    let mut out = Vec::new();
    for dy in -r..=r {
        for dx in -r..=r {
            if dx * dx + dy * dy <= r * r + r {
                out.push((dx, dy));
            }
        }
    }
    out
}

/// Dilation; pixels outside the image count as background.
pub fn dilate(img: &BinaryImage, se: &[(isize, isize)]) -> BinaryImage {
    let (w, h) = img.dims();
    BinaryImage::from_fn(w, h, |x, y| {
        se.iter().any(|&(dx, dy)| {
            let sx = x as isize + dx;
            let sy = y as isize + dy;
            sx >= 0
                && sy >= 0
                && sx < w as isize
                && sy < h as isize
                && *img.get(sx as usize, sy as usize)
        })
    })
}

/// Erosion; pixels outside the image count as foreground, so closing never
/// eats into shapes touching the border.
pub fn erode(img: &BinaryImage, se: &[(isize, isize)]) -> BinaryImage {
    let (w, h) = img.dims();
    BinaryImage::from_fn(w, h, |x, y| {
        se.iter().all(|&(dx, dy)| {
            let sx = x as isize + dx;
            let sy = y as isize + dy;
            sx < 0
                || sy < 0
                || sx >= w as isize
                || sy >= h as isize
                || *img.get(sx as usize, sy as usize)
        })
    })
}

pub fn close(img: &BinaryImage, radius: usize) -> BinaryImage {
    let se = disc(radius);
    erode(&dilate(img, &se), &se)
}

/// Removes 8-connected foreground components smaller than `min_px`.
pub fn remove_small_components(img: &BinaryImage, min_px: usize) -> BinaryImage {
    let (w, h) = img.dims();
    let src = img.as_slice();
    let mut out = img.clone();
    let mut seen = vec![false; w * h];
    let mut stack = Vec::new();
    let mut comp = Vec::new();
    for start in 0..w * h {
        if !src[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        comp.clear();
        while let Some(i) = stack.pop() {
            comp.push(i);
            let (x, y) = ((i % w) as isize, (i / w) as isize);
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let (nx, ny) = (x + dx, y + dy);
                    if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                        continue;
                    }
                    let j = ny as usize * w + nx as usize;
                    if src[j] && !seen[j] {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
        }
        if comp.len() < min_px {
            for &i in &comp {
                out.as_mut_slice()[i] = false;
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct MotionMask {
    pub mask: BinaryImage,
    pub structuring_radius: usize,
}

/// Closing with a disc of `radius`, then removal of components below
/// `min_component_px`.
pub fn motion_mask(
    event_frame: &BinaryImage,
    radius: usize,
    min_component_px: usize,
) -> Result<MotionMask> {
    if radius == 0 {
        return Err(Error::invalid("structuring radius must be at least 1"));
    }
    let closed = close(event_frame, radius);
    Ok(MotionMask {
        mask: remove_small_components(&closed, min_component_px),
        structuring_radius: radius,
    })
}
