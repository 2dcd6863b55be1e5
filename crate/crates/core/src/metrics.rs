//! Frame, flow and trajectory evaluation functionals.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::image::{check_dims, BinaryImage, FlowField, Frame};
use crate::tracker::TrajectorySet;

/// Clamp applied to predicted probabilities before the log.
pub const BCE_EPS: f64 = 1e-7;

fn check_frames(a: &Frame, b: &Frame) -> Result<()> {
    check_dims(a.dims(), b.dims())?;
    if a.channels() != b.channels() {
        return Err(Error::invalid(format!(
            "channel mismatch: {} vs {}",
            a.channels(),
            b.channels()
        )));
    }
    Ok(())
}

pub fn mse(a: &Frame, b: &Frame) -> Result<f64> {
    check_frames(a, b)?;
    let n = a.as_slice().len();
    if n == 0 {
        return Ok(0.0);
    }
    let sum: f64 = a
        .as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(&p, &q)| {
            let d = p as f64 - q as f64;
            d * d
        })
        .sum();
    Ok(sum / n as f64)
}

/// Peak signal-to-noise ratio on the 0..=255 scale; `+inf` for identical frames.
pub fn psnr(a: &Frame, b: &Frame) -> Result<f64> {
    let m = mse(a, b)?;
    if m == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(20.0 * (255.0 / m.sqrt()).log10())
}

pub const SSIM_WINDOW: usize = 8;

/// Mean SSIM over all 8x8 windows (stride 1), averaged over channels.
/// Images smaller than a window use a single window covering them.
pub fn ssim(a: &Frame, b: &Frame) -> Result<f64> {
    check_frames(a, b)?;
    let (w, h) = a.dims();
    let ch = a.channels();
    if w == 0 || h == 0 {
        return Err(Error::invalid("SSIM of an empty frame"));
    }
    let c1 = (0.01f64 * 255.0).powi(2);
    let c2 = (0.03f64 * 255.0).powi(2);
    let (ww, wh) = (SSIM_WINDOW.min(w), SSIM_WINDOW.min(h));
    let n = (ww * wh) as f64;
    let mut total = 0.0;
    let mut count = 0usize;
    for c in 0..ch {
        for y0 in 0..=h - wh {
            for x0 in 0..=w - ww {
                let (mut sa, mut sb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
                for y in y0..y0 + wh {
                    for x in x0..x0 + ww {
                        let p = a.get(x, y, c) as f64;
                        let q = b.get(x, y, c) as f64;
                        sa += p;
                        sb += q;
                        saa += p * p;
                        sbb += q * q;
                        sab += p * q;
                    }
                }
                let (ma, mb) = (sa / n, sb / n);
                let va = (saa / n - ma * ma).max(0.0);
                let vb = (sbb / n - mb * mb).max(0.0);
                let cov = sab / n - ma * mb;
                total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2))
                    / ((ma * ma + mb * mb + c1) * (va + vb + c2));
                count += 1;
            }
        }
    }
    Ok(total / count as f64)
}

/// Mean Euclidean norm of the per-pixel flow difference.
pub fn endpoint_error(pred: &FlowField, gt: &FlowField) -> Result<f64> {
    let errs = endpoint_errors(pred, gt)?;
    if errs.is_empty() {
        return Ok(0.0);
    }
    Ok(errs.iter().sum::<f64>() / errs.len() as f64)
}

/// Per-pixel endpoint errors in raster order.
pub fn endpoint_errors(pred: &FlowField, gt: &FlowField) -> Result<Vec<f64>> {
    check_dims(pred.dims(), gt.dims())?;
    Ok(pred
        .as_slice()
        .iter()
        .zip(gt.as_slice())
        .map(|(p, q)| (p[0] as f64 - q[0] as f64).hypot(p[1] as f64 - q[1] as f64))
        .collect())
}

/// Mean over all samples of `|dx| + |dy|` between matched trajectories.
pub fn tracking_loss(pred: &TrajectorySet, gt: &TrajectorySet) -> Result<f64> {
    if pred.trajectories.len() != gt.trajectories.len() {
        return Err(Error::LabelMismatch(format!(
            "{} predicted vs {} reference trajectories",
            pred.trajectories.len(),
            gt.trajectories.len()
        )));
    }
    let mut sum = 0.0;
    let mut n = 0usize;
    for (p, g) in pred.trajectories.iter().zip(&gt.trajectories) {
        if p.label != g.label || p.len() != g.len() {
            return Err(Error::LabelMismatch(format!(
                "trajectory {} ({} samples) vs {} ({} samples)",
                p.label,
                p.len(),
                g.label,
                g.len()
            )));
        }
        for (a, b) in p.positions.iter().zip(&g.positions) {
            sum += (a.0 - b.0).abs() + (a.1 - b.1).abs();
        }
        n += p.len();
    }
    Ok(if n == 0 { 0.0 } else { sum / n as f64 })
}

/// Mean binary cross-entropy with predictions clamped to `[eps, 1 - eps]`.
pub fn occlusion_loss(pred_vis: &[f64], gt_vis: &[bool]) -> Result<f64> {
    if pred_vis.len() != gt_vis.len() {
        return Err(Error::invalid(format!(
            "{} predictions vs {} labels",
            pred_vis.len(),
            gt_vis.len()
        )));
    }
    if pred_vis.is_empty() {
        return Ok(0.0);
    }
    let sum: f64 = pred_vis
        .iter()
        .zip(gt_vis)
        .map(|(&p, &g)| {
            let p = p.clamp(BCE_EPS, 1.0 - BCE_EPS);
            if g {
                -p.ln()
            } else {
                -(1.0 - p).ln()
            }
        })
        .sum();
    Ok(sum / pred_vis.len() as f64)
}

/// Denominator of the masked flow consistency mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MaskNormalization {
    /// Divide by the total pixel count.
    #[default]
    AllPixels,
    /// Divide by the number of admitted pixels.
    MaskedPixels,
}

/// Mean `|du| + |dv|` between two flows, counting only pixels where `mask`
/// is set.
pub fn flow_consistency_loss(
    coarse: &FlowField,
    reference: &FlowField,
    mask: &BinaryImage,
    norm: MaskNormalization,
) -> Result<f64> {
    check_dims(coarse.dims(), reference.dims())?;
    check_dims(coarse.dims(), mask.dims())?;
    let mut sum = 0.0;
    let mut admitted = 0usize;
    for ((p, q), &m) in coarse
        .as_slice()
        .iter()
        .zip(reference.as_slice())
        .zip(mask.as_slice())
    {
        if m {
            sum += (p[0] as f64 - q[0] as f64).abs() + (p[1] as f64 - q[1] as f64).abs();
            admitted += 1;
        }
    }
    let denom = match norm {
        MaskNormalization::AllPixels => mask.len(),
        MaskNormalization::MaskedPixels => admitted,
    };
    Ok(if denom == 0 { 0.0 } else { sum / denom as f64 })
}

/// Mean absolute per-sample frame difference.
pub fn reconstruction_loss(pred: &Frame, gt: &Frame) -> Result<f64> {
    check_frames(pred, gt)?;
    let n = pred.as_slice().len();
    if n == 0 {
        return Ok(0.0);
    }
    let sum: f64 = pred
        .as_slice()
        .iter()
        .zip(gt.as_slice())
        .map(|(&p, &q)| (p as f64 - q as f64).abs())
        .sum();
    Ok(sum / n as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    /// Weight of the occlusion loss in the tracking total.
    pub lambda1: f64,
    /// Weight of the reconstruction loss in the synthesis total.
    pub lambda2: f64,
    /// Weight of the flow consistency loss in the synthesis total.
    pub lambda3: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            lambda1: 1.0,
            lambda2: 1.0,
            lambda3: 0.8,
        }
    }
}

impl LossWeights {
    pub fn total_track(&self, l_track: f64, l_occ: f64) -> f64 {
        l_track + self.lambda1 * l_occ
    }

    pub fn total_rec(&self, l_rec: f64, l_flow: f64) -> f64 {
        self.lambda2 * l_rec + self.lambda3 * l_flow
    }
}

/// Collected metrics; absent entries were not computable (e.g. no ground truth).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricReport {
    pub psnr: Option<f64>,
    pub ssim: Option<f64>,
    pub epe: Option<f64>,
    pub l_track: Option<f64>,
    pub l_occ: Option<f64>,
    pub l_rec: Option<f64>,
    pub l_flow: Option<f64>,
    pub weights: LossWeights,
}

impl MetricReport {
    pub fn total_track(&self) -> Option<f64> {
        Some(self.weights.total_track(self.l_track?, self.l_occ?))
    }

    pub fn total_rec(&self) -> Option<f64> {
        Some(self.weights.total_rec(self.l_rec?, self.l_flow?))
    }

    fn entries(&self) -> Vec<(&'static str, Option<f64>)> {
        vec![
            ("psnr", self.psnr),
            ("ssim", self.ssim),
            ("epe", self.epe),
            ("l_track", self.l_track),
            ("l_occ", self.l_occ),
            ("l_rec", self.l_rec),
            ("l_flow", self.l_flow),
            ("total_track", self.total_track()),
            ("total_rec", self.total_rec()),
            ("lambda1", Some(self.weights.lambda1)),
            ("lambda2", Some(self.weights.lambda2)),
            ("lambda3", Some(self.weights.lambda3)),
        ]
    }

    /// One `key=value` line per available metric; infinity prints as `inf`.
    pub fn to_key_value(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.entries() {
            if let Some(v) = v {
                let _ = writeln!(out, "{k}={}", fmt_value(v));
            }
        }
        out
    }

    /// Flat JSON object; missing metrics are `null`, infinity is the string `"inf"`.
    pub fn to_json(&self) -> String {
        let map: serde_json::Map<String, serde_json::Value> = self
            .entries()
            .into_iter()
            .map(|(k, v)| {
                let value = match v {
                    None => serde_json::Value::Null,
                    Some(x) if x.is_finite() => serde_json::json!(x),
                    Some(x) => serde_json::Value::String(fmt_value(x)),
                };
                (k.to_string(), value)
            })
            .collect();
        serde_json::to_string_pretty(&map).expect("metric map serialises")
    }
}

fn fmt_value(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v}")
    }
}
