//! Dense any-time flow from region trajectories, consistency confidence and
//! occlusion masks.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::image::{check_dims, BinaryImage, FlowField, Frame, ScalarImage};
use crate::segmentation::RegionSet;
use crate::tracker::TrajectorySet;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// From frame 0 towards later times.
    Forward,
    /// From frame 1 towards earlier times (tracked on the reversed stream).
    Backward,
}

/// Displacement fields from one boundary frame to every bin time.
///
/// `fields[k]` lives on the grid of the anchor frame and points to where each
/// pixel is at normalised time `k / (bins - 1)` measured from that frame
/// (reversed time for the backward direction).
#[derive(Debug, Clone, PartialEq)]
pub struct AnyTimeFlow {
    pub direction: Direction,
    pub fields: Vec<FlowField>,
    pub valid: Vec<BinaryImage>,
}

impl AnyTimeFlow {
    pub fn bins(&self) -> usize {
        self.fields.len()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.fields[0].dims()
    }

    /// Field at normalised time `s` in `[0, 1]`, linear between bins.
    pub fn at(&self, s: f64) -> Result<FlowField> {
        if !(0.0..=1.0).contains(&s) {
            return Err(Error::invalid(format!("time {s} outside [0, 1]")));
        }
        let n = self.bins();
        if n == 1 {
            return Ok(self.fields[0].clone());
        }
        let u = s * (n - 1) as f64;
        let k0 = (u.floor() as usize).min(n - 2);
        let frac = u - k0 as f64;
        if frac == 0.0 {
            return Ok(self.fields[k0].clone());
        }
        if frac == 1.0 {
            return Ok(self.fields[k0 + 1].clone());
        }
        let a = self.fields[k0].as_slice();
        let b = self.fields[k0 + 1].as_slice();
        let data = a
            .iter()
            .zip(b)
            .map(|(p, q)| {
                let u = p[0] as f64 + frac * (q[0] as f64 - p[0] as f64);
                let v = p[1] as f64 + frac * (q[1] as f64 - p[1] as f64);
                [u as f32, v as f32]
            })
            .collect();
        let (w, h) = self.dims();
        FlowField::from_vec(w, h, data)
    }
}

/// Region-constant flow over `bins` bin times: every region pixel takes its
/// trajectory's displacement at each bin; pixels outside all regions are
/// static.
pub fn densify_flow(
    trajs: &TrajectorySet,
    regions: &RegionSet,
    dims: (usize, usize),
    bins: usize,
    direction: Direction,
) -> Result<AnyTimeFlow> {
    check_dims(dims, (regions.width, regions.height))?;
    let (w, h) = dims;
    if bins == 0 {
        return Err(Error::invalid("any-time flow needs at least one bin"));
    }
    if trajs.trajectories.len() != regions.len() {
        return Err(Error::LabelMismatch(format!(
            "{} trajectories for {} regions",
            trajs.trajectories.len(),
            regions.len()
        )));
    }
    let mut fields = vec![FlowField::zeros(w, h); bins];
    let mut valid = vec![BinaryImage::filled(w, h, true); bins];
    for region in &regions.regions {
        let t = trajs.get(region.label).ok_or_else(|| {
            Error::LabelMismatch(format!("no trajectory for region {}", region.label))
        })?;
        if t.len() != bins {
            return Err(Error::LabelMismatch(format!(
                "trajectory {} has {} samples, expected {bins}",
                t.label,
                t.len()
            )));
        }
        for k in 0..bins {
            let (dx, dy) = t.displacement(k);
            let d = [dx as f32, dy as f32];
            let field = fields[k].as_mut_slice();
            let vis = valid[k].as_mut_slice();
            for &p in &region.pixels {
                field[p] = d;
                vis[p] = t.visible[k];
            }
        }
    }
    Ok(AnyTimeFlow {
        direction,
        fields,
        valid,
    })
}

/// Replaces by a static track every region whose pixels agree better with
/// zero motion than with the tracked final displacement.
///
/// Agreement counts region pixels whose anchor-frame gray value matches the
/// other boundary frame (at the same pixel, or at the displaced position)
/// within `tolerance`. Flat regions next to a moving edge pick up the edge's
/// events and would otherwise inherit its motion. Tracks whose final
/// displacement is below one pixel are left alone, as is everything when
/// `tolerance` is 0.
pub fn suppress_static_regions(
    trajs: &TrajectorySet,
    regions: &RegionSet,
    anchor: &Frame,
    other: &Frame,
    tolerance: f64,
) -> Result<TrajectorySet> {
    check_dims(anchor.dims(), other.dims())?;
    check_dims(anchor.dims(), (regions.width, regions.height))?;
    let mut out = trajs.clone();
    if tolerance <= 0.0 {
        return Ok(out);
    }
    let a = anchor.to_gray();
    let b = other.to_gray();
    let w = regions.width;
    for t in &mut out.trajectories {
        let Some(region) = regions.get(t.label) else {
            continue;
        };
        let Some(k) = t.len().checked_sub(1) else {
            continue;
        };
        let (dx, dy) = t.displacement(k);
        if dx.hypot(dy) < 1.0 {
            continue;
        }
        let (mut still, mut moved) = (0usize, 0usize);
        for &p in &region.pixels {
            let (x, y) = (p % w, p / w);
            let v = *a.get(x, y) as f64;
            if (*b.get(x, y) as f64 - v).abs() <= tolerance {
                still += 1;
            }
            let (sx, sy) = (x as f64 + dx, y as f64 + dy);
            let inside =
                sx >= 0.0 && sy >= 0.0 && sx <= (w - 1) as f64 && sy <= (regions.height - 1) as f64;
            if inside && (sample_gray(&b, sx, sy) - v).abs() <= tolerance {
                moved += 1;
            }
        }
        if still >= moved {
            let p0 = t.positions[0];
            t.positions.iter_mut().for_each(|p| *p = p0);
            t.visible.iter_mut().for_each(|v| *v = true);
        }
    }
    Ok(out)
}

/// Per-pixel correction of region-constant flow at superpixel boundaries.
///
/// Each pixel compares the flow histories found within `radius` of it, plus
/// the static history, by the mean absolute gray difference between a 3x3
/// anchor patch and the other boundary frame displaced by each history's
/// final displacement. A pixel adopts the best history only if it beats its
/// own by more than `margin` gray levels, so pixels without evidence (such
/// as those covered by the end of the interval) keep their region's flow.
/// `radius` 0 returns the input unchanged.
pub fn reassign_pixels(
    coarse: &AnyTimeFlow,
    anchor: &Frame,
    other: &Frame,
    radius: usize,
    margin: f64,
) -> Result<AnyTimeFlow> {
    check_dims(anchor.dims(), other.dims())?;
    check_dims(anchor.dims(), coarse.dims())?;
    if radius == 0 || coarse.bins() == 0 {
        return Ok(coarse.clone());
    }
    let (w, h) = coarse.dims();
    let a = anchor.to_gray();
    let b = other.to_gray();
    let last = coarse.fields[coarse.bins() - 1].as_slice();
    let r = radius as isize;
    let cost = |x: usize, y: usize, d: [f32; 2]| {
        let mut sum = 0.0;
        let mut n = 0usize;
        for oy in -1..=1isize {
            for ox in -1..=1isize {
                let (px, py) = (x as isize + ox, y as isize + oy);
                if px < 0 || py < 0 || px >= w as isize || py >= h as isize {
                    continue;
                }
                let v = *a.get(px as usize, py as usize) as f64;
                sum +=
                    (sample_gray(&b, px as f64 + d[0] as f64, py as f64 + d[1] as f64) - v).abs();
                n += 1;
            }
        }
        sum / n as f64
    };
    // source pixel of each pixel's new history; None means static
    let sources: Vec<Option<usize>> = (0..w * h)
        .into_par_iter()
        .map(|p| {
            let (x, y) = (p % w, p / w);
            let own = cost(x, y, last[p]);
            let mut best = (own, Some(p));
            let mut seen: Vec<[f32; 2]> = vec![last[p]];
            let mut consider =
                |d: [f32; 2], src: Option<usize>, best: &mut (f64, Option<usize>)| {
                    if seen.contains(&d) {
                        return;
                    }
                    seen.push(d);
                    let c = cost(x, y, d);
                    if c + margin < own && c < best.0 {
                        *best = (c, src);
                    }
                };
            consider([0.0, 0.0], None, &mut best);
            for qy in (y as isize - r).max(0)..=(y as isize + r).min(h as isize - 1) {
                for qx in (x as isize - r).max(0)..=(x as isize + r).min(w as isize - 1) {
                    let q = qy as usize * w + qx as usize;
                    consider(last[q], Some(q), &mut best);
                }
            }
            best.1
        })
        .collect();
    let mut out = coarse.clone();
    for (field, valid) in out.fields.iter_mut().zip(out.valid.iter_mut()) {
        let (f0, v0) = (field.clone(), valid.clone());
        let (fs, vs) = (field.as_mut_slice(), valid.as_mut_slice());
        for (p, src) in sources.iter().enumerate() {
            match *src {
                Some(q) => {
                    fs[p] = f0.as_slice()[q];
                    vs[p] = v0.as_slice()[q];
                }
                None => {
                    fs[p] = [0.0, 0.0];
                    vs[p] = true;
                }
            }
        }
    }
    Ok(out)
}

fn sample_gray(img: &crate::image::Plane<f32>, x: f64, y: f64) -> f64 {
    let (x0, x1, fx) = crate::image::bilinear_axis(x, img.width());
    let (y0, y1, fy) = crate::image::bilinear_axis(y, img.height());
    let g = |x, y| *img.get(x, y) as f64;
    let top = g(x0, y0) + fx * (g(x1, y0) - g(x0, y0));
    let bottom = g(x0, y1) + fx * (g(x1, y1) - g(x0, y1));
    top + fy * (bottom - top)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefineConfig {
    pub iters: usize,
    pub lambda_smooth: f64,
    /// Intensity difference scale of the edge-aware neighbour weights.
    pub guide_sigma: f64,
    /// Coarse-flow difference scale (px) of the neighbour weights between
    /// two valid pixels.
    pub flow_sigma: f64,
}

impl Default for RefineConfig {
    fn default() -> Self {
        RefineConfig {
            iters: 30,
            lambda_smooth: 0.1,
            guide_sigma: 10.0,
            flow_sigma: 1.0,
        }
    }
}

impl RefineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_smooth >= 0.0 && self.lambda_smooth.is_finite()) {
            return Err(Error::Config(
                "flow.lambda_smooth must be non-negative".into(),
            ));
        }
        if !(self.guide_sigma > 0.0) {
            return Err(Error::Config("flow.guide_sigma must be positive".into()));
        }
        if !(self.flow_sigma > 0.0) {
            return Err(Error::Config("flow.flow_sigma must be positive".into()));
        }
        Ok(())
    }
}

/// Edge-aware diffusion of every bin field.
///
/// Each Jacobi update solves, per pixel, for the value balancing the data
/// term (valid pixels only) against `lambda`-weighted 4-neighbours with
/// weights `exp(-dI^2 / (2 sigma^2))` from the guide image. Between two
/// valid pixels the weight is further scaled by `exp(-dF^2 / (2 tau^2))` on
/// their coarse flows, so diffusion does not cross motion boundaries that
/// the guide misses. Invalid pixels are thus filled from similar-looking
/// neighbours. After the last iteration every pixel is valid.
pub fn refine_flow(coarse: &AnyTimeFlow, guide: &Frame, cfg: &RefineConfig) -> Result<AnyTimeFlow> {
    let dims = coarse.dims();
    check_dims(dims, guide.dims())?;
    let weights = NeighbourWeights::new(guide, cfg.guide_sigma);
    let fields: Vec<FlowField> = coarse
        .fields
        .par_iter()
        .zip(&coarse.valid)
        .map(|(f, v)| diffuse(f, v, &weights, cfg))
        .collect();
    let (w, h) = dims;
    Ok(AnyTimeFlow {
        direction: coarse.direction,
        valid: vec![BinaryImage::filled(w, h, true); fields.len()],
        fields,
    })
}

/// Weights to the right and lower neighbour of every pixel.
struct NeighbourWeights {
    width: usize,
    height: usize,
    right: Vec<f64>,
    down: Vec<f64>,
}

impl NeighbourWeights {
    fn new(guide: &Frame, sigma: f64) -> Self {
        let gray = guide.to_gray();
        let (w, h) = gray.dims();
        let g = gray.as_slice();
        let k = 1.0 / (2.0 * sigma * sigma);
        let weight = |a: f32, b: f32| {
            let d = a as f64 - b as f64;
            (-d * d * k).exp()
        };
        let mut right = vec![0.0; w * h];
        let mut down = vec![0.0; w * h];
        for y in 0..h {
            for x in 0..w {
                let i = y * w + x;
                if x + 1 < w {
                    right[i] = weight(g[i], g[i + 1]);
                }
                if y + 1 < h {
                    down[i] = weight(g[i], g[i + w]);
                }
            }
        }
        NeighbourWeights {
            width: w,
            height: h,
            right,
            down,
        }
    }
}

fn diffuse(
    coarse: &FlowField,
    valid: &BinaryImage,
    nw: &NeighbourWeights,
    cfg: &RefineConfig,
) -> FlowField {
    let (w, h) = (nw.width, nw.height);
    let c = coarse.as_slice();
    let v = valid.as_slice();
    let lambda = cfg.lambda_smooth;
    let k = 1.0 / (2.0 * cfg.flow_sigma * cfg.flow_sigma);
    let range = |i: usize, j: usize| {
        if v[i] && v[j] {
            let dx = c[i][0] as f64 - c[j][0] as f64;
            let dy = c[i][1] as f64 - c[j][1] as f64;
            (-(dx * dx + dy * dy) * k).exp()
        } else {
            1.0
        }
    };
    let mut cur: Vec<[f64; 2]> = c.iter().map(|p| [p[0] as f64, p[1] as f64]).collect();
    let mut next = cur.clone();
    for _ in 0..cfg.iters {
        next.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
            for (x, out) in row.iter_mut().enumerate() {
                let i = y * w + x;
                let f = cur[i];
                let data = if v[i] { 1.0 } else { 0.0 };
                let mut num = [
                    data * (c[i][0] as f64 - f[0]),
                    data * (c[i][1] as f64 - f[1]),
                ];
                let mut den = data;
                let mut add = |j: usize, wt: f64| {
                    let wt = lambda * wt * range(i, j);
                    num[0] += wt * (cur[j][0] - f[0]);
                    num[1] += wt * (cur[j][1] - f[1]);
                    den += wt;
                };
                if x > 0 {
                    add(i - 1, nw.right[i - 1]);
                }
                if x + 1 < w {
                    add(i + 1, nw.right[i]);
                }
                if y > 0 {
                    add(i - w, nw.down[i - w]);
                }
                if y + 1 < h {
                    add(i + w, nw.down[i]);
                }
                *out = if den > 0.0 {
                    [f[0] + num[0] / den, f[1] + num[1] / den]
                } else {
                    f
                };
            }
        });
        std::mem::swap(&mut cur, &mut next);
    }
    let data = cur.iter().map(|p| [p[0] as f32, p[1] as f32]).collect();
    FlowField::from_vec(w, h, data).expect("sized")
}

/// Re-anchors a displacement field from the source grid to the grid of its
/// destinations. Every source pixel lands on the nearest pixel of
/// `x + f(x)`; when several land together the largest displacement wins
/// (moving objects are assumed in front). Pixels nobody lands on take the
/// smallest-magnitude value among already-filled 8-neighbours, repeated until
/// every pixel is filled. Returns the displacement carried to each target
/// pixel, i.e. the flow from the target grid back is its negation.
pub fn splat_forward(f: &FlowField) -> FlowField {
    let (w, h) = f.dims();
    let mut best: Vec<Option<[f32; 2]>> = vec![None; w * h];
    let mag = |d: [f32; 2]| (d[0] as f64).hypot(d[1] as f64);
    for y in 0..h {
        for x in 0..w {
            let d = f.get(x, y);
            let tx = (x as f64 + d[0] as f64).round();
            let ty = (y as f64 + d[1] as f64).round();
            if tx < 0.0 || ty < 0.0 || tx >= w as f64 || ty >= h as f64 {
                continue;
            }
            let j = ty as usize * w + tx as usize;
            best[j] = match best[j] {
                Some(e) if mag(e) >= mag(d) => Some(e),
                _ => Some(d),
            };
        }
    }
    fill_holes(&mut best, w, h);
    let data = best.into_iter().map(|d| d.unwrap_or([0.0, 0.0])).collect();
    FlowField::from_vec(w, h, data).expect("sized")
}

fn fill_holes(best: &mut [Option<[f32; 2]>], w: usize, h: usize) {
    let mag = |d: [f32; 2]| (d[0] as f64).hypot(d[1] as f64);
    loop {
        let holes: Vec<usize> = (0..w * h).filter(|&i| best[i].is_none()).collect();
        if holes.is_empty() || holes.len() == w * h {
            return;
        }
        let mut updates = Vec::new();
        for &i in &holes {
            let (x, y) = ((i % w) as isize, (i / w) as isize);
            let mut pick: Option<[f32; 2]> = None;
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let (nx, ny) = (x + dx, y + dy);
                    if (dx == 0 && dy == 0)
                        || nx < 0
                        || ny < 0
                        || nx >= w as isize
                        || ny >= h as isize
                    {
                        continue;
                    }
                    if let Some(d) = best[ny as usize * w + nx as usize] {
                        pick = match pick {
                            Some(p) if mag(p) <= mag(d) => Some(p),
                            _ => Some(d),
                        };
                    }
                }
            }
            if let Some(d) = pick {
                updates.push((i, d));
            }
        }
        for (i, d) in updates {
            best[i] = Some(d);
        }
    }
}

/// Flows between the grid at `t` and both boundary frames.
#[derive(Debug, Clone, PartialEq)]
pub struct IntermediateFlows {
    pub t: f64,
    /// On the grid at `t`, pointing into frame 0.
    pub t_to_0: FlowField,
    /// On the grid at `t`, pointing into frame 1.
    pub t_to_1: FlowField,
    /// On the grid of frame 0, pointing to time `t`.
    pub from_0: FlowField,
    /// On the grid of frame 1, pointing to time `t`.
    pub from_1: FlowField,
}

/// Samples the any-time flows at `t` and re-anchors them to the grid at `t`.
pub fn sample_intermediate_flows(
    fwd: &AnyTimeFlow,
    bwd: &AnyTimeFlow,
    t: f64,
) -> Result<IntermediateFlows> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::invalid(format!(
            "interpolation time {t} outside [0, 1]"
        )));
    }
    if fwd.direction != Direction::Forward || bwd.direction != Direction::Backward {
        return Err(Error::invalid(
            "expected a forward and a backward any-time flow",
        ));
    }
    check_dims(fwd.dims(), bwd.dims())?;
    let from_0 = fwd.at(t)?;
    let from_1 = bwd.at(1.0 - t)?;
    let t_to_0 = splat_forward(&from_0).negated();
    let t_to_1 = splat_forward(&from_1).negated();
    Ok(IntermediateFlows {
        t,
        t_to_0,
        t_to_1,
        from_0,
        from_1,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfidenceParams {
    pub gamma1: f64,
    pub gamma2: f64,
}

impl Default for ConfidenceParams {
    fn default() -> Self {
        ConfidenceParams {
            gamma1: 0.01,
            gamma2: 0.5,
        }
    }
}

/// Forward-backward consistency:
/// `exp(-|a + b(x + a)|^2 / (g1 (|a|^2 + |b(x + a)|^2) + g2))` with `a = f_fwd(x)`
/// and `b` sampled bilinearly (clamped) at the landing point.
pub fn confidence_map(
    f_fwd: &FlowField,
    f_bwd: &FlowField,
    params: ConfidenceParams,
) -> Result<ScalarImage> {
    check_dims(f_fwd.dims(), f_bwd.dims())?;
    let (w, h) = f_fwd.dims();
    Ok(ScalarImage::from_fn(w, h, |x, y| {
        let a = f_fwd.get(x, y);
        let (ax, ay) = (a[0] as f64, a[1] as f64);
        let b = f_bwd.sample(x as f64 + ax, y as f64 + ay);
        let rx = ax + b[0];
        let ry = ay + b[1];
        let num = rx * rx + ry * ry;
        let den = params.gamma1 * (ax * ax + ay * ay + b[0] * b[0] + b[1] * b[1]) + params.gamma2;
        (-num / den).exp()
    }))
}

/// Pixels unreliable in both directions: `(c_fwd < thr) AND (c_bwd < thr)`.
pub fn occlusion_mask(
    conf_fwd: &ScalarImage,
    conf_bwd: &ScalarImage,
    threshold: f64,
) -> Result<BinaryImage> {
    check_dims(conf_fwd.dims(), conf_bwd.dims())?;
    let (w, h) = conf_fwd.dims();
    Ok(BinaryImage::from_fn(w, h, |x, y| {
        *conf_fwd.get(x, y) < threshold && *conf_bwd.get(x, y) < threshold
    }))
}
