//! Frame-to-event simulation under the log-intensity contrast-threshold model.
//!
//! Each pixel keeps a reference log intensity. Between consecutive frames the
//! log intensity is interpolated linearly in time; every time it moves a full
//! contrast threshold away from the reference, one event is emitted at the
//! interpolated crossing instant and the reference steps by `p * C`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::event::{snap_to_tick, Event, EventStream};
use crate::image::Frame;

#[derive(Debug, Clone, PartialEq)]
pub struct SimulatorConfig {
    /// Log-intensity change that triggers one event.
    pub contrast_threshold: f64,
    /// Offset added before the log, on the 0..=255 scale.
    pub log_eps: f64,
    /// Event budget per pixel per frame interval.
    pub max_events_per_pixel_per_interval: usize,
}

impl Default for SimulatorConfig {
    fn default() -> Self {
        SimulatorConfig {
            contrast_threshold: 0.1,
            log_eps: 1.0,
            max_events_per_pixel_per_interval: 64,
        }
    }
}

impl SimulatorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.contrast_threshold > 0.0 && self.contrast_threshold.is_finite()) {
            return Err(Error::Config(format!(
                "contrast_threshold must be positive, got {}",
                self.contrast_threshold
            )));
        }
        if !(self.log_eps > 0.0 && self.log_eps.is_finite()) {
            return Err(Error::Config(format!(
                "log_eps must be positive, got {}",
                self.log_eps
            )));
        }
        if self.max_events_per_pixel_per_interval == 0 {
            return Err(Error::Config(
                "max_events_per_pixel_per_interval must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// A pixel that hit the per-interval event budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CappedPixel {
    pub x: u16,
    pub y: u16,
    /// Index of the frame interval (between frame `i` and `i + 1`).
    pub interval: usize,
    /// Events that were due but not emitted.
    pub dropped: usize,
}

#[derive(Debug, Clone)]
pub struct Simulation {
    pub stream: EventStream,
    pub capped: Vec<CappedPixel>,
}

/// Simulates the event stream produced while the scene passes through
/// `frames` at the given `timestamps`.
pub fn simulate_events(
    frames: &[Frame],
    timestamps: &[f64],
    cfg: &SimulatorConfig,
) -> Result<Simulation> {
    cfg.validate()?;
    if frames.len() < 2 {
        return Err(Error::invalid("simulation needs at least two frames"));
    }
    if timestamps.len() != frames.len() {
        return Err(Error::invalid(format!(
            "{} frames but {} timestamps",
            frames.len(),
            timestamps.len()
        )));
    }
    if timestamps.windows(2).any(|w| !(w[1] > w[0])) || timestamps.iter().any(|t| !t.is_finite()) {
        return Err(Error::invalid(
            "timestamps must be finite and strictly increasing",
        ));
    }
    if timestamps[0] < 0.0 {
        return Err(Error::invalid("timestamps must be non-negative"));
    }
    let (width, height) = frames[0].dims();
    if width > u16::MAX as usize + 1 || height > u16::MAX as usize + 1 {
        return Err(Error::invalid("sensor too large for 16-bit coordinates"));
    }
    let mut logs = Vec::with_capacity(frames.len());
    for f in frames {
        if f.dims() != (width, height) {
            return Err(Error::DimensionMismatch {
                expected: (width, height),
                actual: f.dims(),
            });
        }
        let gray = f.to_gray();
        if gray.as_slice().iter().any(|&v| !(0.0..=255.0).contains(&v)) {
            return Err(Error::invalid("pixel values must lie in [0, 255]"));
        }
        logs.push(
            gray.as_slice()
                .iter()
                .map(|&v| (v as f64 + cfg.log_eps).ln())
                .collect::<Vec<f64>>(),
        );
    }

    let rows: Vec<(Vec<Event>, Vec<CappedPixel>)> = (0..height)
        .into_par_iter()
        .map(|y| {
            let mut events = Vec::new();
            let mut capped = Vec::new();
            for x in 0..width {
                let idx = y * width + x;
                simulate_pixel(
                    &logs,
                    timestamps,
                    idx,
                    x as u16,
                    y as u16,
                    cfg,
                    &mut events,
                    &mut capped,
                );
            }
            (events, capped)
        })
        .collect();

    let mut events = Vec::new();
    let mut capped = Vec::new();
    for (e, c) in rows {
        events.extend(e);
        capped.extend(c);
    }
    events.sort_by(Event::order);
    capped.sort_by_key(|c| (c.interval, c.y, c.x));
    Ok(Simulation {
        stream: EventStream::from_sorted_unchecked(width, height, events),
        capped,
    })
}

#[allow(clippy::too_many_arguments)]
fn simulate_pixel(
    logs: &[Vec<f64>],
    timestamps: &[f64],
    idx: usize,
    x: u16,
    y: u16,
    cfg: &SimulatorConfig,
    events: &mut Vec<Event>,
    capped: &mut Vec<CappedPixel>,
) {
    let c = cfg.contrast_threshold;
    let base = logs[0][idx];
    // Reference is kept as base + net * C so it never accumulates rounding.
    let mut net: i64 = 0;
    for i in 0..logs.len() - 1 {
        let la = logs[i][idx];
        let lb = logs[i + 1][idx];
        let ta = timestamps[i];
        let tb = timestamps[i + 1];
        let mut emitted = 0usize;
        let mut dropped = 0usize;
        loop {
            let reference = base + net as f64 * c;
            let p: i8 = if lb - reference >= c {
                1
            } else if reference - lb >= c {
                -1
            } else {
                break;
            };
            let level = reference + p as f64 * c;
            net += p as i64;
            if emitted == cfg.max_events_per_pixel_per_interval {
                dropped += 1;
                continue;
            }
            let frac = if lb != la {
                ((level - la) / (lb - la)).clamp(0.0, 1.0)
            } else {
                1.0
            };
            let t = snap_to_tick(ta + frac * (tb - ta)).clamp(ta, tb);
            events.push(Event { t, x, y, p });
            emitted += 1;
        }
        if dropped > 0 {
            capped.push(CappedPixel {
                x,
                y,
                interval: i,
                dropped,
            });
        }
    }
}
