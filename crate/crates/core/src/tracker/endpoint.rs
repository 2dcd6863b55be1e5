//! Endpoint anchoring: the last bin of a trajectory coincides with the other
//! boundary frame, where the query's image patch can be matched directly.

use crate::error::Result;
use crate::image::{check_dims, Frame};

use super::correlation::Template;
use super::track::{Trajectory, TrajectorySet};

#[derive(Debug, Clone, PartialEq)]
pub struct EndpointConfig {
    /// Image patch radius in pixels; 0 disables anchoring.
    pub radius: usize,
    /// Integer search radius around the event-tracked endpoint, px.
    pub search: usize,
    /// ZNCC a match needs before it moves the endpoint.
    pub min_zncc: f64,
}

impl Default for EndpointConfig {
    fn default() -> Self {
        EndpointConfig {
            radius: 7,
            search: 2,
            min_zncc: 0.9,
        }
    }
}

struct Matcher<'a> {
    template: Template,
    other: &'a Frame,
    radius: isize,
    buf: Vec<f64>,
}

impl Matcher<'_> {
    fn score(&mut self, c: (f64, f64)) -> f64 {
        self.buf.clear();
        for j in -self.radius..=self.radius {
            for i in -self.radius..=self.radius {
                self.buf
                    .push(self.other.sample(c.0 + i as f64, c.1 + j as f64, 0) as f64);
            }
        }
        self.template.zncc(&self.buf).unwrap_or(-1.0)
    }
}

/// Matches the anchor patch at the query into `other` near the trajectory's
/// last position: integer search, then parabola fits along x and y at 1, 1/2
/// and 1/4 px. Returns the best position and its ZNCC.
fn match_endpoint(
    anchor: &Frame,
    other: &Frame,
    t: &Trajectory,
    cfg: &EndpointConfig,
) -> Option<((f64, f64), f64)> {
    let r = cfg.radius as isize;
    let q = t.positions[0];
    let mut vals = Vec::with_capacity((2 * cfg.radius + 1).pow(2));
    for j in -r..=r {
        for i in -r..=r {
            vals.push(anchor.sample(q.0 + i as f64, q.1 + j as f64, 0) as f64);
        }
    }
    let mut m = Matcher {
        template: Template::new(vals)?,
        other,
        radius: r,
        buf: Vec::new(),
    };
    let end = *t.positions.last()?;
    let s = cfg.search as isize;
    let mut best = (end, f64::NEG_INFINITY);
    for dy in -s..=s {
        for dx in -s..=s {
            let c = (end.0.round() + dx as f64, end.1.round() + dy as f64);
            let v = m.score(c);
            if v > best.1 {
                best = (c, v);
            }
        }
    }
    for h in [1.0, 0.5, 0.25] {
        let (p, v) = best;
        let mut cand = p;
        let (l, r) = (m.score((p.0 - h, p.1)), m.score((p.0 + h, p.1)));
        let denom = l - 2.0 * v + r;
        if denom < -1e-12 {
            cand.0 += (0.5 * (l - r) / denom).clamp(-1.0, 1.0) * h;
        }
        let (u, d) = (m.score((p.0, p.1 - h)), m.score((p.0, p.1 + h)));
        let denom = u - 2.0 * v + d;
        if denom < -1e-12 {
            cand.1 += (0.5 * (u - d) / denom).clamp(-1.0, 1.0) * h;
        }
        if cand != p {
            let cv = m.score(cand);
            if cv > v {
                best = (cand, cv);
            }
        }
    }
    Some(best)
}

/// Moves each visible trajectory end onto the confident image match of its
/// query patch in `other` and spreads the correction linearly over the
/// bins, so the first sample stays on the query. Trajectories without a
/// confident match are returned unchanged.
pub fn anchor_endpoints(
    trajs: &TrajectorySet,
    anchor: &Frame,
    other: &Frame,
    cfg: &EndpointConfig,
) -> Result<TrajectorySet> {
    check_dims(anchor.dims(), other.dims())?;
    let mut out = trajs.clone();
    if cfg.radius == 0 {
        return Ok(out);
    }
    let a = Frame::from_plane(&anchor.to_gray());
    let b = Frame::from_plane(&other.to_gray());
    for t in &mut out.trajectories {
        let n = t.len();
        if n < 2 || !t.visible[n - 1] {
            continue;
        }
        let Some((pos, score)) = match_endpoint(&a, &b, t, cfg) else {
            continue;
        };
        if score < cfg.min_zncc {
            continue;
        }
        let end = t.positions[n - 1];
        let delta = (pos.0 - end.0, pos.1 - end.1);
        for (k, p) in t.positions.iter_mut().enumerate() {
            let u = k as f64 / (n - 1) as f64;
            p.0 += u * delta.0;
            p.1 += u * delta.1;
        }
    }
    Ok(out)
}
