//! Temporal voxel grids with tent (bilinear-in-time) weighting.
//!
//! An event at normalised bin position `u = (t - t_start) / (t_end - t_start) * (B - 1)`
//! deposits `p * max(0, 1 - |k - u|)` into every bin `k` of its pixel, so at
//! most the two bins `floor(u)` and `ceil(u)` receive mass. The window is the
//! caller's `[t_start, t_end]`, not the first and last event time.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::event::EventStream;
use crate::image::ScalarImage;

#[derive(Debug, Clone, PartialEq)]
pub struct VoxelGrid {
    bins: usize,
    width: usize,
    height: usize,
    t_start: f64,
    t_end: f64,
    /// `(k, y, x)` order.
    values: Vec<f64>,
}

impl VoxelGrid {
    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn t_start(&self) -> f64 {
        self.t_start
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, k: usize, x: usize, y: usize) -> f64 {
        self.values[(k * self.height + y) * self.width + x]
    }

    fn plane(&self, k: usize) -> &[f64] {
        let n = self.width * self.height;
        &self.values[k * n..(k + 1) * n]
    }

    /// Timestamp of bin `k`'s tent centre.
    pub fn bin_time(&self, k: usize) -> f64 {
        if self.bins == 1 {
            self.t_start
        } else {
            self.t_start + (self.t_end - self.t_start) * k as f64 / (self.bins - 1) as f64
        }
    }

    /// Sum over every bin and pixel.
    pub fn total_mass(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Per-pixel sum over bins.
    pub fn pixel_mass(&self) -> ScalarImage {
        let n = self.width * self.height;
        let mut out = vec![0.0; n];
        for k in 0..self.bins {
            for (o, v) in out.iter_mut().zip(self.plane(k)) {
                *o += v;
            }
        }
        ScalarImage::from_vec(self.width, self.height, out).expect("sized")
    }

    /// Raw dump: `VOX1`, u32 B, u32 width, u32 height, f64 t_start, f64 t_end,
    /// then `B*H*W` little-endian f32 in `(k, y, x)` order.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(b"VOX1")?;
        w.write_all(&(self.bins as u32).to_le_bytes())?;
        w.write_all(&(self.width as u32).to_le_bytes())?;
        w.write_all(&(self.height as u32).to_le_bytes())?;
        w.write_all(&self.t_start.to_le_bytes())?;
        w.write_all(&self.t_end.to_le_bytes())?;
        let mut buf = Vec::with_capacity(self.values.len() * 4);
        for &v in &self.values {
            buf.extend_from_slice(&(v as f32).to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    /// Reads a raw dump; values come back at f32 precision.
    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut header = [0u8; 32];
        r.read_exact(&mut header)
            .map_err(|_| Error::format("VOX1", "truncated header"))?;
        if &header[0..4] != b"VOX1" {
            return Err(Error::format("VOX1", "bad magic"));
        }
        let bins = u32::from_le_bytes(header[4..8].try_into().unwrap()) as usize;
        let width = u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize;
        let height = u32::from_le_bytes(header[12..16].try_into().unwrap()) as usize;
        let t_start = f64::from_le_bytes(header[16..24].try_into().unwrap());
        let t_end = f64::from_le_bytes(header[24..32].try_into().unwrap());
        if bins == 0 || !(t_start < t_end) {
            return Err(Error::format("VOX1", "invalid bin count or window"));
        }
        let mut body = Vec::new();
        r.read_to_end(&mut body)?;
        if body.len() != bins * width * height * 4 {
            return Err(Error::format("VOX1", "payload size mismatch"));
        }
        let values = body
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect();
        Ok(VoxelGrid {
            bins,
            width,
            height,
            t_start,
            t_end,
            values,
        })
    }
}

/// Accumulates `s` into `bins` tent-weighted temporal bins over
/// `[t_start, t_end]`. Accumulation follows stream order.
pub fn build_voxel_grid(
    s: &EventStream,
    bins: usize,
    t_start: f64,
    t_end: f64,
) -> Result<VoxelGrid> {
    if bins == 0 {
        return Err(Error::invalid("voxel grid needs at least one bin"));
    }
    if !(t_start < t_end) || !t_start.is_finite() || !t_end.is_finite() {
        return Err(Error::invalid(format!(
            "voxel window [{t_start}, {t_end}] is empty"
        )));
    }
    s.check_window(t_start, t_end)?;
    let (width, height) = s.dims();
    let n = width * height;
    let mut values = vec![0.0; bins * n];
    let span = t_end - t_start;
    let last = (bins - 1) as f64;
    for e in s.iter() {
        let pix = e.y as usize * width + e.x as usize;
        let p = e.p as f64;
        if bins == 1 {
            values[pix] += p;
            continue;
        }
        let u = ((e.t - t_start) / span * last).clamp(0.0, last);
        let k0 = u.floor();
        let frac = u - k0;
        let k0 = k0 as usize;
        values[k0 * n + pix] += p * (1.0 - frac);
        if frac > 0.0 {
            values[(k0 + 1) * n + pix] += p * frac;
        }
    }
    Ok(VoxelGrid {
        bins,
        width,
        height,
        t_start,
        t_end,
        values,
    })
}

/// Bin `k` as an image together with its centre timestamp.
pub fn bin_slice(v: &VoxelGrid, k: usize) -> Result<(ScalarImage, f64)> {
    if k >= v.bins {
        return Err(Error::invalid(format!(
            "bin {k} out of range for {} bins",
            v.bins
        )));
    }
    let img = ScalarImage::from_vec(v.width, v.height, v.plane(k).to_vec())?;
    Ok((img, v.bin_time(k)))
}
