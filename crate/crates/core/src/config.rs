//! Line-oriented `section.key=value` pipeline configuration.
//!
//! Blank lines and `#` comments are ignored. A `[section]` line prefixes
//! the keys that follow it, so `[tracker]` then `max_step=8` is the same as
//! `tracker.max_step=8`. Unknown keys are errors. Serialisation writes every
//! key with its full prefix, and reals in their shortest round-trip form.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::flow::{ConfidenceParams, RefineConfig};
use crate::metrics::LossWeights;
use crate::scene::{SceneKind, SceneSpec};
use crate::segmentation::SegmentationConfig;
use crate::simulator::SimulatorConfig;
use crate::tracker::TrackerConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct FlowConfig {
    pub refine: RefineConfig,
    pub confidence: ConfidenceParams,
    pub occlusion_threshold: f64,
    /// Gray-level tolerance of the static-region check; 0 disables it.
    pub static_tolerance: f64,
    /// Neighbourhood radius of the per-pixel flow reassignment; 0 disables it.
    pub reassign_radius: usize,
    /// Gray levels a neighbouring flow must win by to be adopted.
    pub reassign_margin: f64,
}

impl Default for FlowConfig {
    fn default() -> Self {
        FlowConfig {
            refine: RefineConfig::default(),
            confidence: ConfidenceParams::default(),
            occlusion_threshold: 0.5,
            static_tolerance: 8.0,
            reassign_radius: 4,
            reassign_margin: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub scene: SceneSpec,
    pub simulator: SimulatorConfig,
    pub bins: usize,
    pub segmentation: SegmentationConfig,
    pub tracker: TrackerConfig,
    pub flow: FlowConfig,
    pub weights: LossWeights,
    /// Requested interpolation times within the interval.
    pub timestamps: Vec<f64>,
    /// Boundary interval processed by `run`.
    pub interval: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            scene: SceneSpec::new(SceneKind::Translate, 256, 256),
            simulator: SimulatorConfig::default(),
            bins: 16,
            segmentation: SegmentationConfig::default(),
            tracker: TrackerConfig::default(),
            flow: FlowConfig::default(),
            weights: LossWeights::default(),
            timestamps: vec![0.25, 0.5, 0.75],
            interval: 0,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse '{value}'")))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    let value = value.trim();
    if value.is_empty() {
        return Ok(Vec::new());
    }
    value.split(',').map(|v| parse(key, v)).collect()
}

fn parse_pair(key: &str, value: &str) -> Result<(f64, f64)> {
    let v: Vec<f64> = parse_list(key, value)?;
    match v[..] {
        [a, b] => Ok((a, b)),
        _ => Err(Error::Config(format!(
            "{key}: expected two comma-separated numbers"
        ))),
    }
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

/// Parses a comma-separated list of times in `[0, 1]`.
pub fn parse_timestamps(value: &str) -> Result<Vec<f64>> {
    let ts: Vec<f64> = parse_list("interp.timestamps", value)?;
    check_timestamps(&ts)?;
    Ok(ts)
}

fn check_timestamps(ts: &[f64]) -> Result<()> {
    if let Some(t) = ts.iter().find(|t| !(0.0..=1.0).contains(*t)) {
        return Err(Error::Config(format!("timestamp {t} outside [0, 1]")));
    }
    Ok(())
}

impl PipelineConfig {
    /// `(key, value)` pairs in serialisation order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let s = &self.scene;
        let seg = &self.segmentation;
        let tr = &self.tracker;
        let fl = &self.flow;
        vec![
            ("scene.kind", s.kind.to_string()),
            ("scene.width", s.width.to_string()),
            ("scene.height", s.height.to_string()),
            ("scene.num_frames", s.num_frames.to_string()),
            ("scene.skip", s.skip.to_string()),
            (
                "scene.velocity",
                format!("{},{}", s.velocity.0, s.velocity.1),
            ),
            ("scene.amplitude", s.amplitude.to_string()),
            ("scene.period", s.period.to_string()),
            ("scene.angular_velocity", s.angular_velocity.to_string()),
            ("scene.object_size", s.object_size.to_string()),
            ("scene.seed", s.seed.to_string()),
            ("scene.event_substeps", s.event_substeps.to_string()),
            ("scene.warmup", s.warmup.to_string()),
            (
                "sim.contrast_threshold",
                self.simulator.contrast_threshold.to_string(),
            ),
            ("sim.log_eps", self.simulator.log_eps.to_string()),
            (
                "sim.max_events_per_pixel_per_interval",
                self.simulator.max_events_per_pixel_per_interval.to_string(),
            ),
            ("voxel.bins", self.bins.to_string()),
            ("segment.clusters", seg.slic.clusters.to_string()),
            ("segment.compactness", seg.slic.compactness.to_string()),
            ("segment.iters", seg.slic.iters.to_string()),
            (
                "segment.structuring_radius",
                seg.structuring_radius.to_string(),
            ),
            ("segment.min_component_px", seg.min_component_px.to_string()),
            ("segment.min_overlap", seg.min_overlap.to_string()),
            ("tracker.window_length", tr.window_length.to_string()),
            ("tracker.refine_iters", tr.refine_iters.to_string()),
            ("tracker.patch_radius", tr.patch_radius.to_string()),
            (
                "tracker.base_patch_radius",
                tr.base_patch_radius.to_string(),
            ),
            (
                "tracker.visibility_threshold",
                tr.visibility_threshold.to_string(),
            ),
            ("tracker.max_step", tr.max_step.to_string()),
            ("tracker.scales", join(&tr.scales)),
            ("tracker.corner_threshold", tr.corner_threshold.to_string()),
            ("tracker.endpoint_radius", tr.endpoint.radius.to_string()),
            ("tracker.endpoint_search", tr.endpoint.search.to_string()),
            (
                "tracker.endpoint_min_zncc",
                tr.endpoint.min_zncc.to_string(),
            ),
            ("flow.iters", fl.refine.iters.to_string()),
            ("flow.lambda_smooth", fl.refine.lambda_smooth.to_string()),
            ("flow.guide_sigma", fl.refine.guide_sigma.to_string()),
            ("flow.flow_sigma", fl.refine.flow_sigma.to_string()),
            ("flow.gamma1", fl.confidence.gamma1.to_string()),
            ("flow.gamma2", fl.confidence.gamma2.to_string()),
            (
                "flow.occlusion_threshold",
                fl.occlusion_threshold.to_string(),
            ),
            ("flow.static_tolerance", fl.static_tolerance.to_string()),
            ("flow.reassign_radius", fl.reassign_radius.to_string()),
            ("flow.reassign_margin", fl.reassign_margin.to_string()),
            ("metrics.lambda1", self.weights.lambda1.to_string()),
            ("metrics.lambda2", self.weights.lambda2.to_string()),
            ("metrics.lambda3", self.weights.lambda3.to_string()),
            ("interp.timestamps", join(&self.timestamps)),
            ("interp.interval", self.interval.to_string()),
        ]
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value;
        match key {
            "scene.kind" => {
                // switching kind resets the kind-specific defaults
                let kind: SceneKind = v.trim().parse()?;
                let fresh = SceneSpec::new(kind, self.scene.width, self.scene.height);
                self.scene.kind = kind;
                self.scene.velocity = fresh.velocity;
                self.scene.period = fresh.period;
                self.scene.object_size = fresh.object_size;
            }
            "scene.width" => self.scene.width = parse(key, v)?,
            "scene.height" => self.scene.height = parse(key, v)?,
            "scene.num_frames" => self.scene.num_frames = parse(key, v)?,
            "scene.skip" => self.scene.skip = parse(key, v)?,
            "scene.velocity" => self.scene.velocity = parse_pair(key, v)?,
            "scene.amplitude" => self.scene.amplitude = parse(key, v)?,
            "scene.period" => self.scene.period = parse(key, v)?,
            "scene.angular_velocity" => self.scene.angular_velocity = parse(key, v)?,
            "scene.object_size" => self.scene.object_size = parse(key, v)?,
            "scene.seed" => self.scene.seed = parse(key, v)?,
            "scene.event_substeps" => self.scene.event_substeps = parse(key, v)?,
            "scene.warmup" => self.scene.warmup = parse(key, v)?,
            "sim.contrast_threshold" => self.simulator.contrast_threshold = parse(key, v)?,
            "sim.log_eps" => self.simulator.log_eps = parse(key, v)?,
            "sim.max_events_per_pixel_per_interval" => {
                self.simulator.max_events_per_pixel_per_interval = parse(key, v)?
            }
            "voxel.bins" => self.bins = parse(key, v)?,
            "segment.clusters" => self.segmentation.slic.clusters = parse(key, v)?,
            "segment.compactness" => self.segmentation.slic.compactness = parse(key, v)?,
            "segment.iters" => self.segmentation.slic.iters = parse(key, v)?,
            "segment.structuring_radius" => self.segmentation.structuring_radius = parse(key, v)?,
            "segment.min_component_px" => self.segmentation.min_component_px = parse(key, v)?,
            "segment.min_overlap" => self.segmentation.min_overlap = parse(key, v)?,
            "tracker.window_length" => self.tracker.window_length = parse(key, v)?,
            "tracker.refine_iters" => self.tracker.refine_iters = parse(key, v)?,
            "tracker.patch_radius" => self.tracker.patch_radius = parse(key, v)?,
            "tracker.base_patch_radius" => self.tracker.base_patch_radius = parse(key, v)?,
            "tracker.visibility_threshold" => self.tracker.visibility_threshold = parse(key, v)?,
            "tracker.max_step" => self.tracker.max_step = parse(key, v)?,
            "tracker.scales" => self.tracker.scales = parse_list(key, v)?,
            "tracker.corner_threshold" => self.tracker.corner_threshold = parse(key, v)?,
            "tracker.endpoint_radius" => self.tracker.endpoint.radius = parse(key, v)?,
            "tracker.endpoint_search" => self.tracker.endpoint.search = parse(key, v)?,
            "tracker.endpoint_min_zncc" => self.tracker.endpoint.min_zncc = parse(key, v)?,
            "flow.iters" => self.flow.refine.iters = parse(key, v)?,
            "flow.lambda_smooth" => self.flow.refine.lambda_smooth = parse(key, v)?,
            "flow.guide_sigma" => self.flow.refine.guide_sigma = parse(key, v)?,
            "flow.flow_sigma" => self.flow.refine.flow_sigma = parse(key, v)?,
            "flow.gamma1" => self.flow.confidence.gamma1 = parse(key, v)?,
            "flow.gamma2" => self.flow.confidence.gamma2 = parse(key, v)?,
            "flow.occlusion_threshold" => self.flow.occlusion_threshold = parse(key, v)?,
            "flow.static_tolerance" => self.flow.static_tolerance = parse(key, v)?,
            "flow.reassign_radius" => self.flow.reassign_radius = parse(key, v)?,
            "flow.reassign_margin" => self.flow.reassign_margin = parse(key, v)?,
            "metrics.lambda1" => self.weights.lambda1 = parse(key, v)?,
            "metrics.lambda2" => self.weights.lambda2 = parse(key, v)?,
            "metrics.lambda3" => self.weights.lambda3 = parse(key, v)?,
            "interp.timestamps" => self.timestamps = parse_list(key, v)?,
            "interp.interval" => self.interval = parse(key, v)?,
            other => return Err(Error::Config(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    /// Applies `text` on top of the defaults and validates the result.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = PipelineConfig::default();
        cfg.apply(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies `text` on top of `self` without validating.
    pub fn apply(&mut self, text: &str) -> Result<()> {
        let mut section = String::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                section = name.trim().to_string();
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key=value", n + 1)))?;
            let key = key.trim();
            let full = if section.is_empty() || key.contains('.') {
                key.to_string()
            } else {
                format!("{section}.{key}")
            };
            self.set(&full, value)
                .map_err(|e| Error::Config(format!("line {}: {}", n + 1, strip_prefix(&e))))?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn serialize(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.entries() {
            let _ = writeln!(out, "{k}={v}");
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        self.scene.validate()?;
        self.simulator.validate()?;
        if self.bins < 2 {
            return Err(Error::Config(
                "voxel.bins must be at least 2 for tracking".into(),
            ));
        }
        self.segmentation.validate()?;
        self.tracker.validate()?;
        self.flow.refine.validate()?;
        let c = &self.flow.confidence;
        if !(c.gamma1 >= 0.0 && c.gamma2 > 0.0) {
            return Err(Error::Config(
                "flow.gamma1 must be >= 0 and flow.gamma2 > 0".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.flow.occlusion_threshold) {
            return Err(Error::Config(
                "flow.occlusion_threshold must lie in [0, 1]".into(),
            ));
        }
        if !(self.flow.static_tolerance >= 0.0) {
            return Err(Error::Config(
                "flow.static_tolerance must be non-negative".into(),
            ));
        }
        if !(self.flow.reassign_margin >= 0.0 && self.flow.reassign_margin.is_finite()) {
            return Err(Error::Config(
                "flow.reassign_margin must be non-negative".into(),
            ));
        }
        let w = &self.weights;
        if [w.lambda1, w.lambda2, w.lambda3]
            .iter()
            .any(|l| !(*l >= 0.0))
        {
            return Err(Error::Config("metric weights must be non-negative".into()));
        }
        check_timestamps(&self.timestamps)?;
        if self.timestamps.is_empty() {
            return Err(Error::Config("interp.timestamps must not be empty".into()));
        }
        let frames_needed = (self.interval + 1) * self.scene.interval_frames() + 1;
        if frames_needed > self.scene.num_frames {
            return Err(Error::Config(format!(
                "interval {} needs {frames_needed} frames, scene has {}",
                self.interval, self.scene.num_frames
            )));
        }
        Ok(())
    }
}

fn strip_prefix(e: &Error) -> String {
    match e {
        Error::Config(m) => m.clone(),
        other => other.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_round_trip() {
        let cfg = PipelineConfig::default();
        cfg.validate().unwrap();
        let text = cfg.serialize();
        let back = PipelineConfig::parse(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.serialize(), text);
    }

    #[test]
    fn sections_and_comments() {
        let text = "# demo\n[tracker]\nmax_step = 6.5\nscales=4,8\n\n[interp]\ntimestamps=0.5 # mid\nvoxel.bins=8\n";
        let cfg = PipelineConfig::parse(text).unwrap();
        assert_eq!(cfg.tracker.max_step, 6.5);
        assert_eq!(cfg.tracker.scales, vec![4, 8]);
        assert_eq!(cfg.timestamps, vec![0.5]);
        assert_eq!(cfg.bins, 8);
    }

    #[test]
    fn odd_values_round_trip() {
        let text = "scene.kind=two_objects\nscene.velocity=0.1,-2.5e-3\nflow.lambda_smooth=0.30000000000000004\ninterp.timestamps=0,0.125,1\n";
        let cfg = PipelineConfig::parse(text).unwrap();
        assert_eq!(cfg.scene.velocity, (0.1, -2.5e-3));
        let again = PipelineConfig::parse(&cfg.serialize()).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn errors() {
        assert!(PipelineConfig::parse("tracker.nope=1").is_err());
        assert!(PipelineConfig::parse("voxel.bins=x").is_err());
        assert!(PipelineConfig::parse("voxel.bins").is_err());
        assert!(PipelineConfig::parse("interp.timestamps=0.5,1.5").is_err());
        assert!(PipelineConfig::parse("flow.occlusion_threshold=2").is_err());
        assert!(PipelineConfig::parse("scene.kind=spiral").is_err());
        assert!(parse_timestamps("-0.1").is_err());
        assert_eq!(parse_timestamps("0.25, 0.75").unwrap(), vec![0.25, 0.75]);
    }
}
