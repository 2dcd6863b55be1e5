//! Per-region trajectory tracking across voxel bins.
//!
//! Each step `k -> k+1` searches the displacement minimising a multi-scale
//! patch matching cost: an integer search followed by successive parabola
//! fits at 1, 1/2 and 1/4 px. Steps are grouped into sliding windows of
//! `window_length` bins advancing by half a window; inside a window every
//! step is refined `refine_iters` times against both its predecessor bin and
//! the window's anchor bin. Overlapping steps keep the later window's value.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};

use super::correlation::{sample_patch, Template};
use super::endpoint::EndpointConfig;
use super::pyramid::FeaturePyramid;
use super::query::QueryPoint;

#[derive(Debug, Clone, PartialEq)]
pub struct TrackerConfig {
    pub window_length: usize,
    pub refine_iters: usize,
    /// Patch radius in cells, applied at every pooled scale.
    pub patch_radius: usize,
    /// Patch radius in pixels on the full-resolution base map.
    pub base_patch_radius: usize,
    /// ZNCC floor for a sample to count as visible.
    pub visibility_threshold: f64,
    /// Largest displacement between adjacent bins, px.
    pub max_step: f64,
    pub scales: Vec<usize>,
    /// Minimum normalised corner response for a corner query.
    pub corner_threshold: f64,
    pub endpoint: EndpointConfig,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        TrackerConfig {
            window_length: 10,
            refine_iters: 5,
            patch_radius: 3,
            base_patch_radius: 8,
            visibility_threshold: 0.3,
            max_step: 8.0,
            scales: super::pyramid::DEFAULT_SCALES.to_vec(),
            corner_threshold: 0.01,
            endpoint: EndpointConfig::default(),
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window_length < 2 {
            return Err(Error::Config(
                "tracker.window_length must be at least 2".into(),
            ));
        }
        if self.refine_iters < 1 {
            return Err(Error::Config(
                "tracker.refine_iters must be at least 1".into(),
            ));
        }
        if self.patch_radius < 1 || self.base_patch_radius < 1 {
            return Err(Error::Config(
                "tracker patch radii must be at least 1".into(),
            ));
        }
        if !(self.max_step >= 1.0 && self.max_step.is_finite()) {
            return Err(Error::Config(
                "tracker.max_step must be at least 1 px".into(),
            ));
        }
        if !(-1.0..=1.0).contains(&self.visibility_threshold) {
            return Err(Error::Config(
                "tracker.visibility_threshold must lie in [-1, 1]".into(),
            ));
        }
        if !(-1.0..=1.0).contains(&self.endpoint.min_zncc) {
            return Err(Error::Config(
                "tracker.endpoint_min_zncc must lie in [-1, 1]".into(),
            ));
        }
        Ok(())
    }
}

/// Positions of one region's query point at every bin time.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub label: u32,
    pub positions: Vec<(f64, f64)>,
    pub visible: Vec<bool>,
    /// Matching cost of the step that produced each sample (0 for the first).
    pub residuals: Vec<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Displacement of sample `k` from the first sample.
    pub fn displacement(&self, k: usize) -> (f64, f64) {
        let (x0, y0) = self.positions[0];
        let (x, y) = self.positions[k];
        (x - x0, y - y0)
    }
}

/// Trajectories of all regions, sorted by label.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrajectorySet {
    pub trajectories: Vec<Trajectory>,
}

impl TrajectorySet {
    pub fn get(&self, label: u32) -> Option<&Trajectory> {
        self.trajectories
            .binary_search_by_key(&label, |t| t.label)
            .ok()
            .map(|i| &self.trajectories[i])
    }

    /// One line per sample: `label bin x y visible cost`.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        for t in &self.trajectories {
            for k in 0..t.len() {
                let (x, y) = t.positions[k];
                writeln!(
                    w,
                    "{} {} {} {} {} {}",
                    t.label,
                    k,
                    x,
                    y,
                    u8::from(t.visible[k]),
                    t.residuals[k]
                )?;
            }
        }
        Ok(())
    }

    pub fn read_from<R: BufRead>(r: R) -> Result<Self> {
        let mut trajectories: Vec<Trajectory> = Vec::new();
        for (lineno, line) in r.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad =
                |why: &str| Error::format("trajectory", format!("line {}: {why}", lineno + 1));
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 6 {
                return Err(bad("expected 6 fields"));
            }
            let label: u32 = f[0].parse().map_err(|_| bad("label"))?;
            let k: usize = f[1].parse().map_err(|_| bad("bin index"))?;
            let x: f64 = f[2].parse().map_err(|_| bad("x"))?;
            let y: f64 = f[3].parse().map_err(|_| bad("y"))?;
            let vis = match f[4] {
                "0" => false,
                "1" => true,
                _ => return Err(bad("visibility must be 0 or 1")),
            };
            let cost: f64 = f[5].parse().map_err(|_| bad("cost"))?;
            let start_new = trajectories.last().is_none_or(|t| t.label != label);
            if start_new {
                if trajectories.iter().any(|t| t.label == label) {
                    return Err(bad("label appears in two separate runs"));
                }
                trajectories.push(Trajectory {
                    label,
                    positions: Vec::new(),
                    visible: Vec::new(),
                    residuals: Vec::new(),
                });
            }
            let t = trajectories.last_mut().unwrap();
            if k != t.positions.len() {
                return Err(bad("bin indices must be consecutive from 0"));
            }
            t.positions.push((x, y));
            t.visible.push(vis);
            t.residuals.push(cost);
        }
        trajectories.sort_by_key(|t| t.label);
        Ok(TrajectorySet { trajectories })
    }
}

/// Templates of one bin around one position at every level (base first).
struct Anchor {
    templates: Vec<Option<Template>>,
}

impl Anchor {
    fn new(p: &FeaturePyramid, k: usize, pos: (f64, f64), cfg: &TrackerConfig) -> Self {
        let mut buf = Vec::new();
        let mut templates = Vec::with_capacity(1 + p.scales().len());
        sample_patch(p.base(k), pos.0, pos.1, cfg.base_patch_radius, &mut buf);
        templates.push(Template::new(buf.clone()));
        for map in p.scaled(k) {
            sample_patch(map, pos.0, pos.1, cfg.patch_radius, &mut buf);
            templates.push(Template::new(buf.clone()));
        }
        Anchor { templates }
    }
}

/// Similarity of `anchor` with bin `k` around `pos`: the mean of the
/// full-resolution ZNCC and the mean pooled-scale ZNCC. Flat patches score 0.
fn similarity(
    p: &FeaturePyramid,
    anchor: &Anchor,
    k: usize,
    pos: (f64, f64),
    cfg: &TrackerConfig,
    buf: &mut Vec<f64>,
) -> f64 {
    let base = match &anchor.templates[0] {
        Some(t) => {
            sample_patch(p.base(k), pos.0, pos.1, cfg.base_patch_radius, buf);
            t.zncc(buf).unwrap_or(0.0)
        }
        None => 0.0,
    };
    let mut pooled = 0.0;
    for (map, t) in p.scaled(k).iter().zip(&anchor.templates[1..]) {
        if let Some(t) = t {
            sample_patch(map, pos.0, pos.1, cfg.patch_radius, buf);
            pooled += t.zncc(buf).unwrap_or(0.0);
        }
    }
    0.5 * base + 0.5 * pooled / p.scales().len() as f64
}

/// Cost of placing bin `target` at a position, against weighted anchors.
struct Objective<'a> {
    pyramid: &'a FeaturePyramid,
    cfg: &'a TrackerConfig,
    target: usize,
    anchors: Vec<(&'a Anchor, f64)>,
    /// Positions the target must stay within `max_step` of.
    neighbours: Vec<(f64, f64)>,
}

impl Objective<'_> {
    fn cost(&self, pos: (f64, f64), buf: &mut Vec<f64>) -> f64 {
        let mut score = 0.0;
        let mut total = 0.0;
        for &(a, w) in &self.anchors {
            score += w * similarity(self.pyramid, a, self.target, pos, self.cfg, buf);
            total += w;
        }
        if total > 0.0 {
            1.0 - score / total
        } else {
            1.0
        }
    }

    fn admissible(&self, pos: (f64, f64)) -> bool {
        self.neighbours
            .iter()
            .all(|n| (pos.0 - n.0).hypot(pos.1 - n.1) <= self.cfg.max_step + 1e-9)
    }

    /// Integer search of `radius` around `center`, then parabola fits at
    /// 1, 1/2 and 1/4 px. Never returns a cost above the cost at `init`.
    fn minimise(
        &self,
        init: (f64, f64),
        center: (f64, f64),
        radius: i32,
        buf: &mut Vec<f64>,
    ) -> ((f64, f64), f64) {
        let init_cost = self.cost(init, buf);
        let cx = center.0.round();
        let cy = center.1.round();
        let mut best: Option<((f64, f64), f64, f64)> = None;
        for dy in -radius..=radius {
            for dx in -radius..=radius {
                let cand = (cx + dx as f64, cy + dy as f64);
                if !self.admissible(cand) {
                    continue;
                }
                let c = self.cost(cand, buf);
                let off = (cand.0 - center.0, cand.1 - center.1);
                let norm = off.0.hypot(off.1);
                let better = match best {
                    None => true,
                    Some((b, bc, bn)) => {
                        c < bc || (c == bc && (norm < bn || (norm == bn && cand < b)))
                    }
                };
                if better {
                    best = Some((cand, c, norm));
                }
            }
        }
        let (mut pos, mut c) = match best {
            Some((b, bc, _)) if bc < init_cost => (b, bc),
            _ => (init, init_cost),
        };
        for h in [1.0, 0.5, 0.25] {
            let mut cand = pos;
            let cl = self.cost((pos.0 - h, pos.1), buf);
            let cr = self.cost((pos.0 + h, pos.1), buf);
            let denom = cl - 2.0 * c + cr;
            if denom > 1e-12 {
                cand.0 += (0.5 * (cl - cr) / denom).clamp(-1.0, 1.0) * h;
            }
            let cu = self.cost((pos.0, pos.1 - h), buf);
            let cd = self.cost((pos.0, pos.1 + h), buf);
            let denom = cu - 2.0 * c + cd;
            if denom > 1e-12 {
                cand.1 += (0.5 * (cu - cd) / denom).clamp(-1.0, 1.0) * h;
            }
            if cand != pos && self.admissible(cand) {
                let cc = self.cost(cand, buf);
                if cc < c {
                    pos = cand;
                    c = cc;
                }
            }
        }
        (pos, c)
    }
}

/// Visible bins each step of the initial pass is matched against; a single
/// predecessor lets one slip along an edge carry into every later bin.
const INITIAL_ANCHORS: usize = 3;

/// With at least this many bins the boundary steps are extrapolated from
/// their interior neighbours instead of measured on the one-sided bins.
const EXTRAPOLATE_MIN_BINS: usize = 6;

/// Tracks one query point through every bin of the pyramid.
///
/// Positions are first estimated step by step, each bin against the last
/// few visible ones. Each window then refines every visible interior sample
/// `refine_iters` times against all other visible interior samples of the
/// window, weighted by bin distance (distant bins are less affected by the
/// per-pixel firing pattern shared between neighbouring bins). Invisible
/// samples continue with the last visible displacement.
pub fn track_region(p: &FeaturePyramid, q: &QueryPoint, cfg: &TrackerConfig) -> Trajectory {
    let bins = p.bins();
    let mut buf = Vec::new();
    let mut pos = vec![(q.x, q.y); bins];
    let mut visible = vec![false; bins];
    let mut residuals = vec![0.0; bins];
    visible[0] = true;

    let mut last_d = (0.0, 0.0);
    let mut recent: Vec<(usize, Anchor)> = vec![(0, Anchor::new(p, 0, pos[0], cfg))];
    for k in 1..bins {
        let predicted = (pos[k - 1].0 + last_d.0, pos[k - 1].1 + last_d.1);
        let obj = Objective {
            pyramid: p,
            cfg,
            target: k,
            anchors: recent.iter().map(|(j, a)| (a, (k - j) as f64)).collect(),
            neighbours: vec![pos[k - 1]],
        };
        let start = if obj.admissible(predicted) {
            predicted
        } else {
            pos[k - 1]
        };
        let (found, cost) = obj.minimise(start, pos[k - 1], cfg.max_step.ceil() as i32, &mut buf);
        residuals[k] = cost;
        if 1.0 - cost >= cfg.visibility_threshold {
            visible[k] = true;
            last_d = (found.0 - pos[k - 1].0, found.1 - pos[k - 1].1);
            pos[k] = found;
            if recent.len() == INITIAL_ANCHORS {
                recent.remove(0);
            }
            recent.push((k, Anchor::new(p, k, found, cfg)));
        } else {
            pos[k] = predicted;
        }
    }

    let interior = |j: usize| bins < 4 || (j > 0 && j + 1 < bins);
    let first = (0..bins).find(|&j| visible[j] && interior(j));
    let half = (cfg.window_length / 2).max(1);
    let mut start = 0;
    // The query's own content, settled by the first window, stays an anchor
    // for every later window so that steps do not drift window by window.
    let mut query: Option<(usize, Anchor)> = None;
    loop {
        let end = (start + cfg.window_length).min(bins);
        for _ in 0..cfg.refine_iters {
            let anchors: Vec<Option<Anchor>> = (start..end)
                .map(|j| (visible[j] && interior(j)).then(|| Anchor::new(p, j, pos[j], cfg)))
                .collect();
            for k in start.max(1)..end {
                if !visible[k] || !interior(k) {
                    continue;
                }
                let mut weighted: Vec<(&Anchor, f64)> = (start..end)
                    .filter(|&j| j != k)
                    .filter_map(|j| {
                        anchors[j - start]
                            .as_ref()
                            .map(|a| (a, j.abs_diff(k) as f64))
                    })
                    .collect();
                if let Some((j, a)) = &query {
                    weighted.push((a, j.abs_diff(k) as f64));
                }
                let mut neighbours = vec![pos[k - 1]];
                if k + 1 < bins && visible[k + 1] {
                    neighbours.push(pos[k + 1]);
                }
                let obj = Objective {
                    pyramid: p,
                    cfg,
                    target: k,
                    anchors: weighted,
                    neighbours,
                };
                let (found, cost) = obj.minimise(pos[k], pos[k], 1, &mut buf);
                pos[k] = found;
                residuals[k] = cost;
            }
        }
        if end >= bins {
            break;
        }
        if query.is_none() {
            query = first
                .filter(|&j| j < start + half)
                .map(|j| (j, Anchor::new(p, j, pos[j], cfg)));
        }
        start += half;
    }

    let mut positions = boundary_corrected(&pos, &visible, cfg.max_step);
    let mut last_d = (0.0, 0.0);
    for k in 1..bins {
        if visible[k] {
            if visible[k - 1] {
                last_d = (
                    positions[k].0 - positions[k - 1].0,
                    positions[k].1 - positions[k - 1].1,
                );
            }
        } else {
            positions[k] = (positions[k - 1].0 + last_d.0, positions[k - 1].1 + last_d.1);
        }
    }
    Trajectory {
        label: q.label,
        positions,
        visible,
        residuals,
    }
}

fn clamp_step(d: (f64, f64), max_step: f64) -> (f64, f64) {
    let n = d.0.hypot(d.1);
    if n > max_step {
        (d.0 * max_step / n, d.1 * max_step / n)
    } else {
        d
    }
}

/// Converts per-bin pattern positions into point positions. The first and
/// last bins only collect events from one side of their centre: their
/// patterns sit about a third of a step inwards and are also shaped by the
/// per-pixel firing pattern right after the window opens. With enough bins
/// the boundary steps copy the adjacent interior steps; otherwise the
/// measured boundary steps are scaled by 3/2.
fn boundary_corrected(pos: &[(f64, f64)], visible: &[bool], max_step: f64) -> Vec<(f64, f64)> {
    let n = pos.len();
    let mut out = pos.to_vec();
    let step = |a: usize, b: usize| (pos[b].0 - pos[a].0, pos[b].1 - pos[a].1);
    if n >= EXTRAPOLATE_MIN_BINS && visible[1..n - 1].iter().all(|&v| v) {
        let head = step(1, 2);
        let shift = (pos[0].0 + head.0 - pos[1].0, pos[0].1 + head.1 - pos[1].1);
        for k in 1..n - 1 {
            out[k] = (pos[k].0 + shift.0, pos[k].1 + shift.1);
        }
        let tail = step(n - 3, n - 2);
        out[n - 1] = (out[n - 2].0 + tail.0, out[n - 2].1 + tail.1);
        return out;
    }
    if n < 2 || !visible[1] {
        return out;
    }
    if n == 2 {
        let d = step(0, 1);
        let d = clamp_step((3.0 * d.0, 3.0 * d.1), max_step);
        out[1] = (pos[0].0 + d.0, pos[0].1 + d.1);
        return out;
    }
    let head = step(0, 1);
    let scaled = clamp_step((1.5 * head.0, 1.5 * head.1), max_step);
    let shift = (scaled.0 - head.0, scaled.1 - head.1);
    for o in out.iter_mut().skip(1) {
        o.0 += shift.0;
        o.1 += shift.1;
    }
    if visible[n - 1] && visible[n - 2] {
        let tail = step(n - 2, n - 1);
        let scaled = clamp_step((1.5 * tail.0, 1.5 * tail.1), max_step);
        out[n - 1] = (out[n - 2].0 + scaled.0, out[n - 2].1 + scaled.1);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event::{Event, EventStream};
    use crate::tracker::{build_feature_pyramid, QuerySource};
    use crate::voxel::build_voxel_grid;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const SIZE: usize = 96;

    fn cfg() -> TrackerConfig {
        TrackerConfig {
            scales: vec![2, 4],
            ..TrackerConfig::default()
        }
    }

    /// A random dot cloud around `origin` moving at `v` px per unit time,
    /// sampled into events at 64 instants of `[0, 1)`.
    fn moving_dots(origin: (f64, f64), v: (f64, f64), seed: u64) -> EventStream {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dots: Vec<(f64, f64)> = (0..40)
            .map(|_| (rng.gen_range(-8.0..8.0), rng.gen_range(-8.0..8.0)))
            .collect();
        let mut events = Vec::new();
        for s in 0..64 {
            let t = s as f64 / 64.0;
            for d in &dots {
                let x = (origin.0 + d.0 + v.0 * t).round();
                let y = (origin.1 + d.1 + v.1 * t).round();
                events.push(Event::new(t, x as u16, y as u16, 1));
            }
        }
        EventStream::new(SIZE, SIZE, events).unwrap()
    }

    fn pyramid(events: &EventStream, bins: usize) -> FeaturePyramid {
        let grid = build_voxel_grid(events, bins, 0.0, 1.0).unwrap();
        build_feature_pyramid(&grid, &cfg().scales).unwrap()
    }

    fn query(x: f64, y: f64) -> QueryPoint {
        QueryPoint {
            label: 3,
            x,
            y,
            source: QuerySource::Corner,
        }
    }

    #[test]
    fn trajectory_file_round_trip() {
        let set = TrajectorySet {
            trajectories: vec![
                Trajectory {
                    label: 1,
                    positions: vec![(1.5, 2.25), (0.1 + 0.2, -3.0)],
                    visible: vec![true, false],
                    residuals: vec![0.0, 0.125],
                },
                Trajectory {
                    label: 7,
                    positions: vec![(9.0, 9.0)],
                    visible: vec![true],
                    residuals: vec![0.0],
                },
            ],
        };
        let mut buf = Vec::new();
        set.write_to(&mut buf).unwrap();
        assert_eq!(TrajectorySet::read_from(&buf[..]).unwrap(), set);
        assert_eq!(set.get(7).unwrap().positions[0], (9.0, 9.0));
        assert!(set.get(2).is_none());

        for bad in [
            "1 0 0 0 1",
            "1 1 0 0 1 0",
            "1 0 0 0 2 0",
            "1 0 0 0 1 0\n2 0 0 0 1 0\n1 0 0 0 1 0",
        ] {
            assert!(TrajectorySet::read_from(bad.as_bytes()).is_err(), "{bad}");
        }
    }

    #[test]
    fn static_scene_stays_put() {
        let p = pyramid(&EventStream::empty(SIZE, SIZE), 8);
        let t = track_region(&p, &query(20.0, 30.0), &cfg());
        assert_eq!(t.len(), 8);
        assert!(t.positions.iter().all(|&q| q == (20.0, 30.0)));
        assert!(t.visible[0] && t.visible[1..].iter().all(|&v| !v));
    }

    #[test]
    fn follows_moving_dots() {
        let v = (12.0, -6.0);
        let p = pyramid(&moving_dots((26.0, 34.0), v, 1), 16);
        let t = track_region(&p, &query(26.0, 34.0), &cfg());
        let d = t.displacement(15);
        assert!((d.0 - v.0).abs() < 1.0 && (d.1 - v.1).abs() < 1.0, "{d:?}");
    }

    #[test]
    fn minimise_never_raises_cost() {
        let p = pyramid(&moving_dots((32.0, 32.0), (10.0, 4.0), 2), 6);
        let cfg = cfg();
        let anchor = Anchor::new(&p, 0, (32.0, 32.0), &cfg);
        let mut buf = Vec::new();
        let obj = Objective {
            pyramid: &p,
            cfg: &cfg,
            target: 1,
            anchors: vec![(&anchor, 1.0)],
            neighbours: vec![(32.0, 32.0)],
        };
        for init in [(32.0, 32.0), (33.5, 31.25), (37.0, 35.0)] {
            let (pos, c) = obj.minimise(init, (32.0, 32.0), 8, &mut buf);
            assert!(c <= obj.cost(init, &mut buf) + 1e-12);
            assert!((c - obj.cost(pos, &mut buf)).abs() < 1e-12);
            assert!(obj.admissible(pos) || pos == init);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]

        #[test]
        fn deterministic_bounded_and_equivariant(
            vx in -14.0..14.0f64,
            vy in -14.0..14.0f64,
            seed in 0u64..1000,
            bins in 2usize..12,
        ) {
            let cfg = cfg();
            let a = pyramid(&moving_dots((40.0, 40.0), (vx, vy), seed), bins);
            let t = track_region(&a, &query(40.0, 40.0), &cfg);
            prop_assert_eq!(&t, &track_region(&a, &query(40.0, 40.0), &cfg));
            prop_assert_eq!(t.len(), bins);
            prop_assert_eq!(t.positions[0], (40.0, 40.0));
            for w in t.positions.windows(2) {
                prop_assert!((w[1].0 - w[0].0).hypot(w[1].1 - w[0].1) <= cfg.max_step + 1e-9);
            }

            // A shift by a multiple of the coarsest scale, clear of the
            // borders, moves the track rigidly.
            let b = pyramid(&moving_dots((48.0, 44.0), (vx, vy), seed), bins);
            let s = track_region(&b, &query(48.0, 44.0), &cfg);
            prop_assert_eq!(&s.visible, &t.visible);
            for (p, q) in s.positions.iter().zip(&t.positions) {
                prop_assert!((p.0 - q.0 - 8.0).abs() < 1e-9 && (p.1 - q.1 - 4.0).abs() < 1e-9, "{:?} {:?}", p, q);
            }
        }
    }

    #[test]
    fn validate_rejects_bad_settings() {
        assert!(TrackerConfig::default().validate().is_ok());
        let bad = [
            TrackerConfig {
                window_length: 1,
                ..cfg()
            },
            TrackerConfig {
                refine_iters: 0,
                ..cfg()
            },
            TrackerConfig {
                patch_radius: 0,
                ..cfg()
            },
            TrackerConfig {
                max_step: 0.5,
                ..cfg()
            },
            TrackerConfig {
                visibility_threshold: 1.5,
                ..cfg()
            },
        ];
        for c in bad {
            assert!(c.validate().is_err(), "{c:?}");
        }
    }
}
