//! Local patch correlation between feature maps of adjacent bins.

use crate::error::{Error, Result};

use super::pyramid::{FeatureMap, FeaturePyramid};

const MIN_ENERGY: f64 = 1e-12;

/// A zero-mean patch with its L2 norm, ready for normalised correlation.
#[derive(Debug, Clone)]
pub struct Template {
    values: Vec<f64>,
    norm: f64,
}

impl Template {
    /// `None` when the patch has (numerically) zero variance.
    pub fn new(mut values: Vec<f64>) -> Option<Self> {
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        let mut energy = 0.0;
        for v in values.iter_mut() {
            *v -= mean;
            energy += *v * *v;
        }
        (energy > MIN_ENERGY).then(|| Template {
            values,
            norm: energy.sqrt(),
        })
    }

    /// Zero-normalised cross-correlation against raw patch values; `None`
    /// for a flat patch.
    pub fn zncc(&self, other: &[f64]) -> Option<f64> {
        debug_assert_eq!(other.len(), self.values.len());
        let mean = other.iter().sum::<f64>() / other.len() as f64;
        let mut dot = 0.0;
        let mut energy = 0.0;
        for (a, &b) in self.values.iter().zip(other) {
            let b = b - mean;
            dot += a * b;
            energy += b * b;
        }
        (energy > MIN_ENERGY).then(|| (dot / (self.norm * energy.sqrt())).clamp(-1.0, 1.0))
    }
}

/// Samples a `(2r+1)^2` patch centred on full-resolution position `(x, y)`.
pub fn sample_patch(map: &FeatureMap, x: f64, y: f64, radius: usize, out: &mut Vec<f64>) {
    out.clear();
    let cx = map.to_cell(x);
    let cy = map.to_cell(y);
    let r = radius as isize;
    for j in -r..=r {
        for i in -r..=r {
            out.push(map.sample(cx + i as f64, cy + j as f64));
        }
    }
}

/// ZNCC between a patch at `a` in `map_a` and at `b` in `map_b`; flat
/// patches score 0.
pub fn patch_zncc(
    map_a: &FeatureMap,
    a: (f64, f64),
    map_b: &FeatureMap,
    b: (f64, f64),
    radius: usize,
) -> f64 {
    let mut buf = Vec::new();
    sample_patch(map_a, a.0, a.1, radius, &mut buf);
    let Some(t) = Template::new(buf.clone()) else {
        return 0.0;
    };
    sample_patch(map_b, b.0, b.1, radius, &mut buf);
    t.zncc(&buf).unwrap_or(0.0)
}

/// Matching cost between the neighbourhood of `pos` in bin `k` and that of
/// `pos + d` in bin `k + 1`: one minus the mean ZNCC over the pyramid scales.
/// Scales where either patch is flat contribute a cost of one.
pub fn local_correlation(
    p: &FeaturePyramid,
    pos: (f64, f64),
    k: usize,
    d: (f64, f64),
    patch_radius: usize,
) -> Result<f64> {
    if k + 1 >= p.bins() {
        return Err(Error::invalid(format!(
            "bin {k} has no successor in a {}-bin pyramid",
            p.bins()
        )));
    }
    let n = p.scales().len();
    let mut total = 0.0;
    for s in 0..n {
        total += patch_zncc(
            p.level(k, s),
            pos,
            p.level(k + 1, s),
            (pos.0 + d.0, pos.1 + d.1),
            patch_radius,
        );
    }
    Ok(1.0 - total / n as f64)
}
