//! Stage functions shared by the end-to-end run and the per-stage commands.
//!
//! Every stage output that crosses a file boundary is kept at the precision
//! of its file format (voxels at f32, frames at 8 bits), so running the
//! stages separately through files gives the same bits as one in-memory run.

use rayon::prelude::*;

use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::event::{accumulate_event_frame, reverse_stream, window_stream, EventStream};
use crate::flow::{
    densify_flow, reassign_pixels, refine_flow, sample_intermediate_flows, suppress_static_regions,
    AnyTimeFlow, Direction,
};
use crate::image::{BinaryImage, Frame, Plane};
use crate::interpolate::{synthesize, FusionInputs};
use crate::scene::Scene;
use crate::segmentation::{motion_mask, regions_from_labels, slic_segment, RegionSet};
use crate::tracker::{
    anchor_endpoints, build_feature_pyramid, select_query_points, track_all, QueryPoint,
    QuerySource, TrajectorySet,
};
use crate::voxel::{build_voxel_grid, VoxelGrid};

/// Two boundary frames and the events recorded between them.
#[derive(Debug, Clone)]
pub struct IntervalInput {
    pub i0: Frame,
    pub i1: Frame,
    pub events: EventStream,
    pub t0: f64,
    pub t1: f64,
}

impl IntervalInput {
    pub fn validate(&self) -> Result<()> {
        if !self.i0.same_shape(&self.i1) {
            return Err(Error::invalid("boundary frames differ in shape"));
        }
        crate::image::check_dims(self.i0.dims(), self.events.dims())?;
        if !(self.t0 < self.t1) {
            return Err(Error::invalid(format!(
                "inverted interval [{}, {}]",
                self.t0, self.t1
            )));
        }
        Ok(())
    }

    /// The boundary frame a direction is anchored at, and the opposite one.
    pub fn frames(&self, dir: Direction) -> (&Frame, &Frame) {
        match dir {
            Direction::Forward => (&self.i0, &self.i1),
            Direction::Backward => (&self.i1, &self.i0),
        }
    }
}

/// Quantises a frame the way an 8-bit file round trip does.
pub fn quantize_frame(f: &Frame) -> Frame {
    let data = f.quantized().into_iter().map(f32::from).collect();
    Frame::new(f.width(), f.height(), f.channels(), data).expect("same shape")
}

/// The interval's events, time-reversed over the window for the backward direction.
pub fn direction_events(input: &IntervalInput, dir: Direction) -> Result<EventStream> {
    let win = window_stream(&input.events, input.t0, input.t1)?;
    match dir {
        Direction::Forward => Ok(win),
        Direction::Backward => reverse_stream(&win, input.t0, input.t1),
    }
}

/// Voxel grid over the interval at file (f32) precision.
pub fn voxelize(events: &EventStream, bins: usize, t0: f64, t1: f64) -> Result<VoxelGrid> {
    let grid = build_voxel_grid(events, bins, t0, t1)?;
    let mut buf = Vec::new();
    grid.write_to(&mut buf)?;
    VoxelGrid::read_from(&buf[..])
}

/// Superpixel labels of the anchor frame and the cleaned motion mask.
#[derive(Debug, Clone, PartialEq)]
pub struct Segmentation {
    pub labels: Plane<u32>,
    pub mask: BinaryImage,
}

impl Segmentation {
    pub fn labels_u16(&self) -> Result<Plane<u16>> {
        if self.labels.as_slice().iter().any(|&l| l > u16::MAX as u32) {
            return Err(Error::invalid(
                "more than 65536 superpixels cannot be stored",
            ));
        }
        Ok(self.labels.map(|&l| l as u16))
    }

    pub fn from_u16(labels: &Plane<u16>, mask: BinaryImage) -> Result<Self> {
        crate::image::check_dims(labels.dims(), mask.dims())?;
        Ok(Segmentation {
            labels: labels.map(|&l| l as u32),
            mask,
        })
    }
}

pub fn segment(anchor: &Frame, events: &EventStream, cfg: &PipelineConfig) -> Result<Segmentation> {
    let seg = &cfg.segmentation;
    seg.validate()?;
    let (w, h) = anchor.dims();
    let k = seg.slic.resolve_clusters(w, h);
    let sp = slic_segment(anchor, k, seg.slic.compactness, seg.slic.iters)?;
    let mask = motion_mask(
        &accumulate_event_frame(events),
        seg.structuring_radius,
        seg.min_component_px,
    )?;
    let out = Segmentation {
        labels: sp.labels,
        mask: mask.mask,
    };
    out.labels_u16()?;
    Ok(out)
}

/// Regions, their query points and trajectories for one direction.
#[derive(Debug, Clone)]
pub struct Tracks {
    pub regions: RegionSet,
    pub queries: Vec<QueryPoint>,
    pub trajectories: TrajectorySet,
}

pub fn track(
    anchor: &Frame,
    other: &Frame,
    voxels: &VoxelGrid,
    seg: &Segmentation,
    events: &EventStream,
    cfg: &PipelineConfig,
) -> Result<Tracks> {
    cfg.tracker.validate()?;
    let regions = regions_from_labels(&seg.labels, &seg.mask, cfg.segmentation.min_overlap)?;
    let queries = select_query_points(anchor, &regions, events, cfg.tracker.corner_threshold)?;
    let pyramid = build_feature_pyramid(voxels, &cfg.tracker.scales)?;
    let trajectories = track_all(&pyramid, &queries, &cfg.tracker);
    let trajectories = anchor_endpoints(&trajectories, anchor, other, &cfg.tracker.endpoint)?;
    Ok(Tracks {
        regions,
        queries,
        trajectories,
    })
}

/// Static-region check, densification and refinement for one direction.
pub fn any_time_flow(
    input: &IntervalInput,
    seg: &Segmentation,
    trajs: &TrajectorySet,
    bins: usize,
    dir: Direction,
    cfg: &PipelineConfig,
) -> Result<(AnyTimeFlow, AnyTimeFlow)> {
    let (anchor, other) = input.frames(dir);
    let regions = regions_from_labels(&seg.labels, &seg.mask, cfg.segmentation.min_overlap)?;
    let trajs = suppress_static_regions(trajs, &regions, anchor, other, cfg.flow.static_tolerance)?;
    let coarse = densify_flow(&trajs, &regions, anchor.dims(), bins, dir)?;
    let coarse = reassign_pixels(
        &coarse,
        anchor,
        other,
        cfg.flow.reassign_radius,
        cfg.flow.reassign_margin,
    )?;
    let guide = Frame::from_plane(&anchor.to_gray());
    let refined = refine_flow(&coarse, &guide, &cfg.flow.refine)?;
    Ok((coarse, refined))
}

/// Fusion inputs and the synthesised frame at `t`.
pub fn interpolate_at(
    i0: &Frame,
    i1: &Frame,
    fwd: &AnyTimeFlow,
    bwd: &AnyTimeFlow,
    t: f64,
    cfg: &PipelineConfig,
) -> Result<(Frame, FusionInputs)> {
    let flows = sample_intermediate_flows(fwd, bwd, t)?;
    let inputs = FusionInputs::assemble(
        i0,
        i1,
        &flows,
        cfg.flow.confidence,
        cfg.flow.occlusion_threshold,
    )?;
    let frame = synthesize(&inputs)?;
    Ok((frame, inputs))
}

/// Everything one direction produces.
#[derive(Debug, Clone)]
pub struct DirectionOutput {
    pub voxels: VoxelGrid,
    pub segmentation: Segmentation,
    pub tracks: Tracks,
    pub coarse: AnyTimeFlow,
    pub flow: AnyTimeFlow,
}

pub fn run_direction(
    input: &IntervalInput,
    dir: Direction,
    cfg: &PipelineConfig,
) -> Result<DirectionOutput> {
    let events = direction_events(input, dir)?;
    let (anchor, other) = input.frames(dir);
    let voxels = voxelize(&events, cfg.bins, input.t0, input.t1)?;
    let segmentation = segment(anchor, &events, cfg)?;
    let tracks = track(anchor, other, &voxels, &segmentation, &events, cfg)?;
    let (coarse, flow) = any_time_flow(
        input,
        &segmentation,
        &tracks.trajectories,
        cfg.bins,
        dir,
        cfg,
    )?;
    Ok(DirectionOutput {
        voxels,
        segmentation,
        tracks,
        coarse,
        flow,
    })
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub forward: DirectionOutput,
    pub backward: DirectionOutput,
    /// One synthesised frame per requested time, in request order.
    pub frames: Vec<(f64, Frame)>,
}

/// The whole pipeline on one interval.
pub fn run_interval(input: &IntervalInput, cfg: &PipelineConfig) -> Result<RunOutput> {
    cfg.validate()?;
    input.validate()?;
    let (forward, backward) = rayon::join(
        || run_direction(input, Direction::Forward, cfg),
        || run_direction(input, Direction::Backward, cfg),
    );
    let (forward, backward) = (forward?, backward?);
    let frames = cfg
        .timestamps
        .par_iter()
        .map(|&t| {
            interpolate_at(&input.i0, &input.i1, &forward.flow, &backward.flow, t, cfg)
                .map(|(f, _)| (t, f))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RunOutput {
        forward,
        backward,
        frames,
    })
}

/// Boundary frames (8-bit) and events of interval `interval` of a synthetic scene.
pub fn scene_interval(
    scene: &Scene,
    interval: usize,
    cfg: &PipelineConfig,
) -> Result<IntervalInput> {
    let n = scene.spec.interval_frames();
    let (f0, f1) = (interval * n, (interval + 1) * n);
    if f1 >= scene.spec.num_frames {
        return Err(Error::Config(format!(
            "interval {interval} needs frame {f1}, scene has {}",
            scene.spec.num_frames
        )));
    }
    let sim = scene.simulate_range(f0 as f64, f1 as f64, &cfg.simulator)?;
    Ok(IntervalInput {
        i0: quantize_frame(&scene.render(f0 as f64)),
        i1: quantize_frame(&scene.render(f1 as f64)),
        events: sim.stream,
        t0: scene.spec.frame_time(f0),
        t1: scene.spec.frame_time(f1),
    })
}

/// Ground-truth tracks of `queries` through the bins of an interval,
/// labelled like the queries. A sample is visible while the point stays on
/// the surface it started on.
pub fn ground_truth_tracks(
    scene: &Scene,
    interval: usize,
    queries: &[QueryPoint],
    bins: usize,
) -> TrajectorySet {
    let trajectories = queries
        .iter()
        .map(|q| {
            let tau0 = scene.tau(interval, 0.0);
            let owner = scene.object_at(tau0, q.x, q.y);
            let mut positions = Vec::with_capacity(bins);
            let mut visible = Vec::with_capacity(bins);
            for k in 0..bins {
                let u = if bins == 1 {
                    0.0
                } else {
                    k as f64 / (bins - 1) as f64
                };
                let tau = scene.tau(interval, u);
                let p = scene.point_at(q.x, q.y, tau0, tau);
                visible.push(scene.object_at(tau, p.0, p.1) == owner);
                positions.push(p);
            }
            crate::tracker::Trajectory {
                label: q.label,
                positions,
                visible,
                residuals: vec![0.0; bins],
            }
        })
        .collect();
    TrajectorySet { trajectories }
}

/// Integer points well inside object `obj` at the start of `interval`
/// (a 3x3 grid, `margin` px in from the outline), as corner queries.
pub fn object_queries(scene: &Scene, interval: usize, obj: usize, margin: f64) -> Vec<QueryPoint> {
    let tau = scene.tau(interval, 0.0);
    let o = &scene.objects[obj];
    let half = scene.spec.object_size / 2.0 - margin;
    let mut out = Vec::new();
    for j in -1..=1 {
        for i in -1..=1 {
            let (lx, ly) = (i as f64 * half / 2f64.sqrt(), j as f64 * half / 2f64.sqrt());
            let (x, y) = o.world_at(tau, lx, ly);
            let (x, y) = (x.round(), y.round());
            if scene.object_at(tau, x, y) == Some(obj) {
                out.push(QueryPoint {
                    label: out.len() as u32,
                    x,
                    y,
                    source: QuerySource::Corner,
                });
            }
        }
    }
    out
}

/// Mean endpoint and mean per-sample tracking errors.
pub fn track_errors(pred: &TrajectorySet, gt: &TrajectorySet) -> (f64, f64) {
    let mut end = 0.0;
    let mut mean = 0.0;
    let n = pred.trajectories.len().max(1) as f64;
    for (p, g) in pred.trajectories.iter().zip(&gt.trajectories) {
        let k = p.len() - 1;
        end += dist(p.positions[k], g.positions[k]);
        mean += p
            .positions
            .iter()
            .zip(&g.positions)
            .map(|(a, b)| dist(*a, *b))
            .sum::<f64>()
            / p.len() as f64;
    }
    (end / n, mean / n)
}

fn dist(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - b.0).hypot(a.1 - b.1)
}

/// One row of the bin-size study.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinStudyRow {
    pub bins: usize,
    pub end_error: f64,
    /// Mean over the trajectory's own bin samples.
    pub mean_error: f64,
    /// Mean over a fixed time grid, trajectories read linearly between bins.
    pub any_time_error: f64,
}

/// Samples of the fixed time grid used by [`any_time_error`].
const ANY_TIME_SAMPLES: usize = 96;

/// Error of trajectories read as continuous paths, averaged over a fixed
/// grid of times in the interval. Unlike a mean over bin samples this does
/// not depend on how many samples fall on the anchored endpoints.
pub fn any_time_error(
    pred: &TrajectorySet,
    scene: &Scene,
    interval: usize,
    queries: &[QueryPoint],
) -> f64 {
    let tau0 = scene.tau(interval, 0.0);
    let mut sum = 0.0;
    for (t, q) in pred.trajectories.iter().zip(queries) {
        let last = t.len() - 1;
        for i in 0..ANY_TIME_SAMPLES {
            let u = (i as f64 + 0.5) / ANY_TIME_SAMPLES as f64;
            let x = u * last as f64;
            let k = (x.floor() as usize).min(last.saturating_sub(1));
            let f = x - k as f64;
            let (a, b) = (t.positions[k], t.positions[(k + 1).min(last)]);
            let p = (a.0 + f * (b.0 - a.0), a.1 + f * (b.1 - a.1));
            let g = scene.point_at(q.x, q.y, tau0, scene.tau(interval, u));
            sum += dist(p, g);
        }
    }
    sum / (ANY_TIME_SAMPLES * queries.len().max(1)) as f64
}

/// Tracks given queries through `bins` bins of the forward interval, with
/// endpoint anchoring.
pub fn track_queries(
    input: &IntervalInput,
    queries: &[QueryPoint],
    bins: usize,
    cfg: &PipelineConfig,
) -> Result<TrajectorySet> {
    let voxels = voxelize(&input.events, bins, input.t0, input.t1)?;
    let pyramid = build_feature_pyramid(&voxels, &cfg.tracker.scales)?;
    let trajs = track_all(&pyramid, queries, &cfg.tracker);
    anchor_endpoints(&trajs, &input.i0, &input.i1, &cfg.tracker.endpoint)
}

/// Tracks points inside the first object of `scene` on interval 0 with each
/// bin count and reports the errors against the analytic motion.
pub fn bin_size_study(
    scene: &Scene,
    bin_counts: &[usize],
    cfg: &PipelineConfig,
) -> Result<Vec<BinStudyRow>> {
    let input = scene_interval(scene, 0, cfg)?;
    let queries = object_queries(scene, 0, 0, 3.0);
    bin_counts
        .iter()
        .map(|&bins| {
            let pred = track_queries(&input, &queries, bins, cfg)?;
            let gt = ground_truth_tracks(scene, 0, &queries, bins);
            let (end_error, mean_error) = track_errors(&pred, &gt);
            Ok(BinStudyRow {
                bins,
                end_error,
                mean_error,
                any_time_error: any_time_error(&pred, scene, 0, &queries),
            })
        })
        .collect()
}

/// Fixed-width table of a bin-size study.
pub fn format_bin_study(rows: &[BinStudyRow]) -> String {
    let mut out = String::from("bins  end_error_px  mean_error_px  any_time_error_px\n");
    for r in rows {
        out.push_str(&format!(
            "{:>4}  {:>12.4}  {:>13.4}  {:>17.4}\n",
            r.bins, r.end_error, r.mean_error, r.any_time_error
        ));
    }
    out
}
