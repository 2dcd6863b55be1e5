//! Warping, confidence-weighted fusion and occlusion in-fill.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::flow::{confidence_map, occlusion_mask, ConfidenceParams, IntermediateFlows};
use crate::image::{check_dims, BinaryImage, FlowField, Frame, ScalarImage};

/// `out(x) = img(x + flow(x))`, bilinear with clamp-to-edge borders.
pub fn backward_warp(img: &Frame, flow: &FlowField) -> Result<Frame> {
    check_dims(img.dims(), flow.dims())?;
    let (w, h) = img.dims();
    let ch = img.channels();
    let mut out = Frame::filled(w, h, ch, 0.0);
    out.as_mut_slice()
        .par_chunks_mut(w * ch)
        .enumerate()
        .for_each(|(y, row)| {
            for x in 0..w {
                let [u, v] = flow.get(x, y);
                let sx = x as f64 + u as f64;
                let sy = y as f64 + v as f64;
                for c in 0..ch {
                    row[x * ch + c] = img.sample(sx, sy, c);
                }
            }
        });
    Ok(out)
}

/// Everything fusion and in-fill need for one requested time.
#[derive(Debug, Clone)]
pub struct FusionInputs {
    pub t: f64,
    pub i0: Frame,
    pub i1: Frame,
    pub f_t0: FlowField,
    pub f_t1: FlowField,
    pub c_t0: ScalarImage,
    pub c_t1: ScalarImage,
    pub occlusion: BinaryImage,
    /// Confidence below which a side is considered unreliable.
    pub threshold: f64,
}

impl FusionInputs {
    /// Builds fusion inputs from the sampled flows. Confidences live on the
    /// grid at `t`; at exactly `t = 0` (`t = 1`) the far side is given zero
    /// confidence so the near boundary frame is reproduced.
    pub fn assemble(
        i0: &Frame,
        i1: &Frame,
        flows: &IntermediateFlows,
        params: ConfidenceParams,
        threshold: f64,
    ) -> Result<Self> {
        i0.check_same_shape(i1)?;
        check_dims(i0.dims(), flows.t_to_0.dims())?;
        let mut c_t0 = confidence_map(&flows.t_to_0, &flows.from_0, params)?;
        let mut c_t1 = confidence_map(&flows.t_to_1, &flows.from_1, params)?;
        if flows.t == 0.0 {
            c_t1.as_mut_slice().fill(0.0);
        } else if flows.t == 1.0 {
            c_t0.as_mut_slice().fill(0.0);
        }
        let occlusion = occlusion_mask(&c_t0, &c_t1, threshold)?;
        Ok(FusionInputs {
            t: flows.t,
            i0: i0.clone(),
            i1: i1.clone(),
            f_t0: flows.t_to_0.clone(),
            f_t1: flows.t_to_1.clone(),
            c_t0,
            c_t1,
            occlusion,
            threshold,
        })
    }

    fn validate(&self) -> Result<()> {
        self.i0.check_same_shape(&self.i1)?;
        let dims = self.i0.dims();
        self.f_t0.check_dims(dims)?;
        self.f_t1.check_dims(dims)?;
        check_dims(dims, self.c_t0.dims())?;
        check_dims(dims, self.c_t1.dims())?;
        check_dims(dims, self.occlusion.dims())?;
        if !(0.0..=1.0).contains(&self.t) {
            return Err(Error::invalid(format!("time {} outside [0, 1]", self.t)));
        }
        Ok(())
    }

    /// Both boundary frames warped to `t`.
    pub fn warps(&self) -> Result<(Frame, Frame)> {
        self.validate()?;
        Ok((
            backward_warp(&self.i0, &self.f_t0)?,
            backward_warp(&self.i1, &self.f_t1)?,
        ))
    }
}

const MIN_WEIGHT_SUM: f64 = 1e-8;

/// Per-pixel confidence-weighted blend of the two warps.
pub fn fuse_frames(inputs: &FusionInputs) -> Result<Frame> {
    let (w0, w1) = inputs.warps()?;
    Ok(blend(&w0, &w1, &inputs.c_t0, &inputs.c_t1))
}

fn blend(w0: &Frame, w1: &Frame, c0: &ScalarImage, c1: &ScalarImage) -> Frame {
    let ch = w0.channels();
    let mut out = w0.clone();
    let a = w1.as_slice();
    out.as_mut_slice()
        .par_chunks_mut(ch)
        .zip(a.par_chunks(ch))
        .enumerate()
        .for_each(|(i, (px, q))| {
            let (k0, k1) = (c0.as_slice()[i], c1.as_slice()[i]);
            let sum = k0 + k1;
            let (a0, a1) = if sum < MIN_WEIGHT_SUM {
                (0.5, 0.5)
            } else {
                (k0 / sum, k1 / sum)
            };
            for (p, &v1) in px.iter_mut().zip(q) {
                let v = (a0 * *p as f64 + a1 * v1 as f64) as f32;
                // rounding can overshoot by an ulp; keep the blend convex
                *p = v.clamp(p.min(v1), p.max(v1));
            }
        });
    out
}

/// Replaces occluded pixels by one warp: the more confident side, or the
/// temporally nearer one when neither reaches the threshold.
pub fn infill_occlusions(fused: &Frame, inputs: &FusionInputs) -> Result<Frame> {
    inputs.validate()?;
    fused.check_same_shape(&inputs.i0)?;
    if inputs.occlusion.count_ones() == 0 {
        return Ok(fused.clone());
    }
    let (w0, w1) = inputs.warps()?;
    let ch = fused.channels();
    let mut out = fused.clone();
    let mask = inputs.occlusion.as_slice();
    let near0 = inputs.t < 0.5;
    for (i, px) in out.as_mut_slice().chunks_mut(ch).enumerate() {
        if !mask[i] {
            continue;
        }
        let (k0, k1) = (inputs.c_t0.as_slice()[i], inputs.c_t1.as_slice()[i]);
        let use0 = if k0.max(k1) >= inputs.threshold {
            k0 >= k1
        } else {
            near0
        };
        let src = if use0 { &w0 } else { &w1 };
        px.copy_from_slice(&src.as_slice()[i * ch..(i + 1) * ch]);
    }
    Ok(out)
}

/// Fusion followed by in-fill.
pub fn synthesize(inputs: &FusionInputs) -> Result<Frame> {
    let fused = fuse_frames(inputs)?;
    infill_occlusions(&fused, inputs)
}
