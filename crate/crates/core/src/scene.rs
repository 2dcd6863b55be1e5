//! Synthetic benchmark scenes with closed-form motion.
//!
//! A scene is a stack of textured objects (squares or discs) over a flat or
//! textured static background. Every object follows an analytic motion law,
//! so positions, frames, flow fields and occlusion labels are available at
//! any continuous time. Time is measured in frames; boundary interval `i`
//! spans frames `i * (skip + 1) ..= (i + 1) * (skip + 1)` and maps to
//! seconds `i ..= i + 1`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::event::{snap_to_tick, Event, EventStream};
use crate::image::{FlowField, Frame, Plane};
use crate::simulator::{simulate_events, CappedPixel, Simulation, SimulatorConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SceneKind {
    Translate,
    Sinusoid,
    Rotate,
    TwoObjects,
    Disocclusion,
}

impl SceneKind {
    pub fn name(self) -> &'static str {
        match self {
            SceneKind::Translate => "translate",
            SceneKind::Sinusoid => "sinusoid",
            SceneKind::Rotate => "rotate",
            SceneKind::TwoObjects => "two_objects",
            SceneKind::Disocclusion => "disocclusion",
        }
    }
}

impl fmt::Display for SceneKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SceneKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "translate" => SceneKind::Translate,
            "sinusoid" => SceneKind::Sinusoid,
            "rotate" => SceneKind::Rotate,
            "two_objects" => SceneKind::TwoObjects,
            "disocclusion" => SceneKind::Disocclusion,
            other => return Err(Error::Config(format!("unknown scene kind '{other}'"))),
        })
    }
}

/// Parameters of a synthetic scene.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub kind: SceneKind,
    pub width: usize,
    pub height: usize,
    /// Full-rate frames to render.
    pub num_frames: usize,
    /// Withheld frames between consecutive boundary frames.
    pub skip: usize,
    /// Linear velocity in px/frame (translate, two_objects).
    pub velocity: (f64, f64),
    /// Oscillation amplitude in px (sinusoid, disocclusion).
    pub amplitude: f64,
    /// Oscillation period in frames (sinusoid, disocclusion).
    pub period: f64,
    /// Rotation rate in rad/frame (rotate).
    pub angular_velocity: f64,
    /// Object side length (or diameter) in px.
    pub object_size: f64,
    pub seed: u64,
    /// Renders per frame used when simulating events.
    pub event_substeps: usize,
    /// Frames the sensor runs before the first simulated instant.
    pub warmup: f64,
}

impl SceneSpec {
    /// Defaults for `kind` on a `width x height` sensor.
    pub fn new(kind: SceneKind, width: usize, height: usize) -> Self {
        let m = width.min(height) as f64;
        let mut spec = SceneSpec {
            kind,
            width,
            height,
            num_frames: 17,
            skip: 7,
            velocity: (4.0, 0.0),
            amplitude: 8.0,
            period: 16.0,
            angular_velocity: 0.02,
            object_size: (0.375 * m).round(),
            seed: 7,
            event_substeps: 0,
            warmup: 8.0,
        };
        match kind {
            SceneKind::TwoObjects => {
                spec.velocity = (3.0, 0.0);
                spec.object_size = (0.25 * m).round();
            }
            SceneKind::Disocclusion => {
                spec.period = (spec.skip + 1) as f64;
            }
            _ => {}
        }
        spec
    }

    pub fn validate(&self) -> Result<()> {
        if self.width < 8 || self.height < 8 {
            return Err(Error::Config("scene must be at least 8x8".into()));
        }
        if self.num_frames < 2 {
            return Err(Error::Config("scene needs at least two frames".into()));
        }
        if !(self.object_size >= 2.0) {
            return Err(Error::Config("object_size must be at least 2 px".into()));
        }
        if !(self.warmup >= 0.0 && self.warmup.is_finite()) {
            return Err(Error::Config(
                "warmup must be a non-negative number of frames".into(),
            ));
        }
        if !(self.period > 0.0) {
            return Err(Error::Config("period must be positive".into()));
        }
        let finite = [
            self.velocity.0,
            self.velocity.1,
            self.amplitude,
            self.angular_velocity,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("motion parameters must be finite".into()));
        }
        Ok(())
    }

    /// Frames between consecutive boundary frames.
    pub fn interval_frames(&self) -> usize {
        self.skip + 1
    }

    /// Seconds of frame index `k` (one boundary interval per second).
    pub fn frame_time(&self, k: usize) -> f64 {
        snap_to_tick(k as f64 / self.interval_frames() as f64)
    }

    /// Peak object speed in px/frame.
    pub fn max_speed(&self) -> f64 {
        match self.kind {
            SceneKind::Translate | SceneKind::TwoObjects => self.velocity.0.hypot(self.velocity.1),
            SceneKind::Sinusoid | SceneKind::Disocclusion => {
                self.amplitude.abs() * 2.0 * PI / self.period
            }
            SceneKind::Rotate => self.angular_velocity.abs() * self.object_size * 0.5 * 2f64.sqrt(),
        }
    }

    /// Substeps actually used for event simulation.
    pub fn substeps(&self) -> usize {
        if self.event_substeps > 0 {
            self.event_substeps
        } else {
            ((2.0 * self.max_speed()).ceil() as usize).max(4)
        }
    }
}

/// Smooth band-limited random texture.
#[derive(Debug, Clone)]
pub struct Texture {
    waves: Vec<([f64; 2], f64, f64)>,
    norm: f64,
}

impl Texture {
    pub fn random(rng: &mut impl Rng) -> Self {
        let mut waves = Vec::new();
        let mut energy = 0.0;
        for _ in 0..12 {
            let theta = rng.gen_range(0.0..PI);
            let wavelength = rng.gen_range(9.0..26.0);
            let k = 2.0 * PI / wavelength;
            let amp = rng.gen_range(0.5..1.0);
            let phase = rng.gen_range(0.0..2.0 * PI);
            energy += amp * amp * 0.5;
            waves.push(([k * theta.cos(), k * theta.sin()], amp, phase));
        }
        Texture {
            waves,
            norm: energy.sqrt(),
        }
    }

    /// Intensity at local coordinates, in roughly `[35, 221]`.
    pub fn value(&self, lx: f64, ly: f64) -> f64 {
        let g: f64 = self
            .waves
            .iter()
            .map(|(k, a, ph)| a * (k[0] * lx + k[1] * ly + ph).sin())
            .sum::<f64>()
            / self.norm;
        128.0 + 93.0 * (0.9 * g).tanh()
    }
}

#[derive(Debug, Clone, Copy)]
pub enum Shape {
    Square { half: f64 },
    Disc { radius: f64 },
}

#[derive(Debug, Clone, Copy)]
pub enum Motion {
    Linear { v: (f64, f64) },
    Sinusoid { amplitude: (f64, f64), period: f64 },
    Rotation { omega: f64 },
}

impl Motion {
    /// Translation offset and rotation angle at time `tau` (frames).
    fn pose(&self, tau: f64) -> ((f64, f64), f64) {
        match *self {
            Motion::Linear { v } => ((v.0 * tau, v.1 * tau), 0.0),
            Motion::Sinusoid { amplitude, period } => {
                let s = (2.0 * PI * tau / period).sin();
                ((amplitude.0 * s, amplitude.1 * s), 0.0)
            }
            Motion::Rotation { omega } => ((0.0, 0.0), omega * tau),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SceneObject {
    pub shape: Shape,
    pub center: (f64, f64),
    pub texture: Option<Texture>,
    /// Used when `texture` is `None`.
    pub flat_value: f64,
    pub motion: Motion,
}

impl SceneObject {
    fn to_local(&self, tau: f64, x: f64, y: f64) -> (f64, f64) {
        let ((ox, oy), a) = self.motion.pose(tau);
        let dx = x - self.center.0 - ox;
        let dy = y - self.center.1 - oy;
        let (s, c) = a.sin_cos();
        (c * dx + s * dy, -s * dx + c * dy)
    }

    fn to_world(&self, tau: f64, lx: f64, ly: f64) -> (f64, f64) {
        let ((ox, oy), a) = self.motion.pose(tau);
        let (s, c) = a.sin_cos();
        (
            self.center.0 + ox + c * lx - s * ly,
            self.center.1 + oy + s * lx + c * ly,
        )
    }

    /// World position at `tau` of the object-local point `(lx, ly)`.
    pub fn world_at(&self, tau: f64, lx: f64, ly: f64) -> (f64, f64) {
        self.to_world(tau, lx, ly)
    }

    /// Signed distance to the outline, positive inside.
    fn inside_distance(&self, lx: f64, ly: f64) -> f64 {
        match self.shape {
            Shape::Square { half } => half - lx.abs().max(ly.abs()),
            Shape::Disc { radius } => radius - lx.hypot(ly),
        }
    }

    fn value(&self, lx: f64, ly: f64) -> f64 {
        match &self.texture {
            Some(t) => t.value(lx, ly),
            None => self.flat_value,
        }
    }
}

#[derive(Debug, Clone)]
pub enum Background {
    Flat(f64),
    Textured(Texture),
}

/// A renderable scene.
#[derive(Debug, Clone)]
pub struct Scene {
    pub spec: SceneSpec,
    pub background: Background,
    /// Back to front.
    pub objects: Vec<SceneObject>,
}

impl Scene {
    pub fn new(spec: &SceneSpec) -> Result<Self> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let (w, h) = (spec.width as f64, spec.height as f64);
        let half = spec.object_size / 2.0;
        let mut background = Background::Flat(60.0);
        let objects = match spec.kind {
            SceneKind::Translate => vec![SceneObject {
                shape: Shape::Square { half },
                center: (0.3 * w, 0.5 * h),
                texture: Some(Texture::random(&mut rng)),
                flat_value: 0.0,
                motion: Motion::Linear { v: spec.velocity },
            }],
            SceneKind::Sinusoid => vec![SceneObject {
                shape: Shape::Square { half },
                center: (0.5 * w, 0.5 * h),
                texture: Some(Texture::random(&mut rng)),
                flat_value: 0.0,
                motion: Motion::Sinusoid {
                    amplitude: (spec.amplitude, 0.0),
                    period: spec.period,
                },
            }],
            SceneKind::Rotate => vec![SceneObject {
                shape: Shape::Disc { radius: half },
                center: (0.5 * w, 0.5 * h),
                texture: Some(Texture::random(&mut rng)),
                flat_value: 0.0,
                motion: Motion::Rotation {
                    omega: spec.angular_velocity,
                },
            }],
            SceneKind::TwoObjects => {
                let a = Texture::random(&mut rng);
                let b = Texture::random(&mut rng);
                background = Background::Textured(Texture::random(&mut rng));
                vec![
                    SceneObject {
                        shape: Shape::Square { half },
                        center: (0.3 * w, 0.28 * h),
                        texture: Some(a),
                        flat_value: 0.0,
                        motion: Motion::Linear { v: spec.velocity },
                    },
                    SceneObject {
                        shape: Shape::Square { half },
                        center: (0.7 * w, 0.72 * h),
                        texture: Some(b),
                        flat_value: 0.0,
                        motion: Motion::Linear {
                            v: (-spec.velocity.0, -spec.velocity.1),
                        },
                    },
                ]
            }
            SceneKind::Disocclusion => {
                background = Background::Textured(Texture::random(&mut rng));
                vec![SceneObject {
                    shape: Shape::Square { half },
                    center: (0.5 * w, 0.5 * h),
                    texture: Some(Texture::random(&mut rng)),
                    flat_value: 0.0,
                    motion: Motion::Sinusoid {
                        amplitude: (spec.amplitude, 0.0),
                        period: spec.period,
                    },
                }]
            }
        };
        Ok(Scene {
            spec: spec.clone(),
            background,
            objects,
        })
    }

    /// A custom scene from explicit objects.
    pub fn custom(spec: &SceneSpec, background: Background, objects: Vec<SceneObject>) -> Self {
        Scene {
            spec: spec.clone(),
            background,
            objects,
        }
    }

    fn background_value(&self, x: f64, y: f64) -> f64 {
        match &self.background {
            Background::Flat(v) => *v,
            Background::Textured(t) => {
                // darker, lower-contrast texture so objects stay distinct
                0.6 * t.value(x, y) + 10.0
            }
        }
    }

    /// Intensity at continuous position and time.
    pub fn intensity(&self, tau: f64, x: f64, y: f64) -> f64 {
        let mut v = self.background_value(x, y);
        for obj in &self.objects {
            let (lx, ly) = obj.to_local(tau, x, y);
            let alpha = (obj.inside_distance(lx, ly) + 0.5).clamp(0.0, 1.0);
            if alpha > 0.0 {
                v = alpha * obj.value(lx, ly) + (1.0 - alpha) * v;
            }
        }
        v
    }

    /// Renders the scene at `tau` frames.
    pub fn render(&self, tau: f64) -> Frame {
        Frame::gray_from_fn(self.spec.width, self.spec.height, |x, y| {
            self.intensity(tau, x as f64, y as f64) as f32
        })
    }

    /// Index of the topmost object covering the pixel centre, if any.
    pub fn object_at(&self, tau: f64, x: f64, y: f64) -> Option<usize> {
        self.objects.iter().enumerate().rev().find_map(|(i, o)| {
            let (lx, ly) = o.to_local(tau, x, y);
            (o.inside_distance(lx, ly) >= 0.0).then_some(i)
        })
    }

    /// Where the scene point at `(x, y)` at time `from` is at time `to`.
    pub fn point_at(&self, x: f64, y: f64, from: f64, to: f64) -> (f64, f64) {
        match self.object_at(from, x, y) {
            Some(i) => {
                let o = &self.objects[i];
                let (lx, ly) = o.to_local(from, x, y);
                o.to_world(to, lx, ly)
            }
            None => (x, y),
        }
    }

    /// Object label map at `tau`: 0 background, `i + 1` for object `i`.
    pub fn label_map(&self, tau: f64) -> Plane<u16> {
        Plane::from_fn(self.spec.width, self.spec.height, |x, y| {
            self.object_at(tau, x as f64, y as f64)
                .map_or(0, |i| i as u16 + 1)
        })
    }

    /// Ground-truth displacement field on the grid at `from` towards `to`.
    pub fn flow(&self, from: f64, to: f64) -> FlowField {
        FlowField::from_fn(self.spec.width, self.spec.height, |x, y| {
            let (px, py) = (x as f64, y as f64);
            let (qx, qy) = self.point_at(px, py, from, to);
            [(qx - px) as f32, (qy - py) as f32]
        })
    }

    /// Continuous frame time of boundary-interval-relative `t` in `[0, 1]`.
    pub fn tau(&self, interval: usize, t: f64) -> f64 {
        let n = self.spec.interval_frames() as f64;
        (interval as f64 + t) * n
    }

    /// Full-rate frames.
    pub fn frames(&self) -> Vec<Frame> {
        (0..self.spec.num_frames)
            .map(|k| self.render(k as f64))
            .collect()
    }

    /// Events over the whole sequence, simulated from sub-frame renders.
    pub fn simulate(&self, cfg: &SimulatorConfig) -> Result<Simulation> {
        self.simulate_range(0.0, (self.spec.num_frames - 1) as f64, cfg)
    }

    /// Events between frame times `from` and `to`. The sensor starts
    /// `spec.warmup` frames earlier so pixel references have settled by
    /// `from`; events before `from` are discarded.
    pub fn simulate_range(&self, from: f64, to: f64, cfg: &SimulatorConfig) -> Result<Simulation> {
        if !(from < to) {
            return Err(Error::invalid(format!(
                "inverted frame range [{from}, {to}]"
            )));
        }
        let sub = self.spec.substeps() as f64;
        let n = self.spec.interval_frames() as f64;
        let steps = (((to - from) * sub).round() as usize).max(1);
        let warm_steps = (self.spec.warmup * sub).round() as usize;
        // whole seconds added so warm-up timestamps stay non-negative;
        // exact to undo on the tick grid
        let shift = ((from - self.spec.warmup) / n).min(0.0).abs().ceil();
        let mut frames = Vec::with_capacity(warm_steps + steps + 1);
        let mut times = Vec::with_capacity(warm_steps + steps + 1);
        for j in 0..=warm_steps + steps {
            let rel = j as f64 - warm_steps as f64;
            let tau = from + (to - from) * rel / steps as f64;
            frames.push(self.render(tau));
            times.push(snap_to_tick(tau / n + shift));
        }
        let sim = simulate_events(&frames, &times, cfg)?;
        let t_from = snap_to_tick(from / n);
        let (w, h) = sim.stream.dims();
        let events = sim
            .stream
            .iter()
            .map(|e| Event {
                t: e.t - shift,
                ..*e
            })
            .filter(|e| e.t >= t_from)
            .collect();
        let capped = sim
            .capped
            .into_iter()
            .filter(|c| c.interval >= warm_steps)
            .map(|c| CappedPixel {
                interval: c.interval - warm_steps,
                ..c
            })
            .collect();
        Ok(Simulation {
            stream: EventStream::new(w, h, events)?,
            capped,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn translate_pattern_moves_with_velocity() {
        let spec = SceneSpec::new(SceneKind::Translate, 64, 48);
        let scene = Scene::new(&spec).unwrap();
        let f0 = scene.render(0.0);
        let f3 = scene.render(3.0);
        // interior of the square shifted by 12 px
        let (cx, cy) = (
            scene.objects[0].center.0 as usize,
            scene.objects[0].center.1 as usize,
        );
        for dy in 0..4 {
            for dx in 0..4 {
                let a = f0.get(cx + dx - 2, cy + dy - 2, 0);
                let b = f3.get(cx + dx - 2 + 12, cy + dy - 2, 0);
                assert!((a - b).abs() < 1e-3);
            }
        }
        let p = scene.point_at(cx as f64, cy as f64, 0.0, 3.0);
        assert!((p.0 - (cx as f64 + 12.0)).abs() < 1e-9);
    }

    #[test]
    fn sinusoid_follows_law() {
        let spec = SceneSpec::new(SceneKind::Sinusoid, 64, 64);
        let scene = Scene::new(&spec).unwrap();
        let c = scene.objects[0].center;
        for k in 0..17 {
            let p = scene.point_at(c.0, c.1, 0.0, k as f64);
            let expect = c.0 + 8.0 * (2.0 * PI * k as f64 / 16.0).sin();
            assert!((p.0 - expect).abs() < 1e-9);
        }
    }

    #[test]
    fn same_seed_same_frames() {
        let spec = SceneSpec::new(SceneKind::TwoObjects, 40, 40);
        let a = Scene::new(&spec).unwrap().render(1.5);
        let b = Scene::new(&spec).unwrap().render(1.5);
        assert_eq!(a, b);
    }
}
