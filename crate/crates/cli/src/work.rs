//! Work-directory layout and the per-stage commands built on it.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use evinterp::config::PipelineConfig;
use evinterp::error::{Error, Result};
use evinterp::event::EventStream;
use evinterp::flo::{load_flo, save_flo};
use evinterp::flow::{AnyTimeFlow, Direction};
use evinterp::image::{BinaryImage, Frame, Plane};
use evinterp::interpolate::FusionInputs;
use evinterp::metrics::{
    endpoint_error, flow_consistency_loss, mse, occlusion_loss, reconstruction_loss, ssim,
    tracking_loss, MaskNormalization, MetricReport,
};
use evinterp::pipeline::{
    any_time_flow, bin_size_study, direction_events, format_bin_study, ground_truth_tracks,
    interpolate_at, object_queries, run_interval, scene_interval, segment, track, track_queries,
    voxelize, DirectionOutput, IntervalInput, Segmentation,
};
use evinterp::pnm::{read_frame, read_labels, read_mask, write_frame, write_labels, write_mask};
use evinterp::scene::Scene;
use evinterp::tracker::{QueryPoint, QuerySource, TrajectorySet};
use evinterp::voxel::VoxelGrid;

use crate::{AtStage, StageResult};

const DIRECTIONS: [Direction; 2] = [Direction::Forward, Direction::Backward];
const STUDY_BINS: [usize; 4] = [4, 8, 16, 32];

fn dir_tag(dir: Direction) -> &'static str {
    match dir {
        Direction::Forward => "fwd",
        Direction::Backward => "bwd",
    }
}

fn time_tag(t: f64) -> String {
    format!("{t:.4}")
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })
}

/// A directory holding one interval's inputs, intermediates and outputs.
pub struct Work<'a> {
    dir: PathBuf,
    cfg: &'a PipelineConfig,
}

impl<'a> Work<'a> {
    pub fn new(dir: &Path, cfg: &'a PipelineConfig) -> StageResult<Self> {
        fs::create_dir_all(dir).map_err(Error::from).at("setup")?;
        Ok(Work {
            dir: dir.to_path_buf(),
            cfg,
        })
    }

    fn path(&self, name: impl AsRef<Path>) -> PathBuf {
        self.dir.join(name)
    }

    fn scene(&self) -> Result<Scene> {
        Scene::new(&self.cfg.scene)
    }

    /// Start and end time of the configured interval, seconds.
    fn window(&self) -> (f64, f64) {
        let spec = &self.cfg.scene;
        let n = spec.interval_frames();
        let f0 = self.cfg.interval * n;
        (spec.frame_time(f0), spec.frame_time(f0 + n))
    }

    fn input(&self) -> Result<IntervalInput> {
        let (t0, t1) = self.window();
        let input = IntervalInput {
            i0: read_frame(&self.path("frame0.pgm"))?,
            i1: read_frame(&self.path("frame1.pgm"))?,
            events: EventStream::read_from(open(&self.path("events.evt"))?)?,
            t0,
            t1,
        };
        input.validate()?;
        Ok(input)
    }

    pub fn gen_scene(&self) -> StageResult<()> {
        self.write_scene().at("gen-scene")
    }

    fn write_scene(&self) -> Result<()> {
        let scene = self.scene()?;
        let spec = &scene.spec;
        let n = spec.interval_frames();
        let (f0, f1) = (self.cfg.interval * n, (self.cfg.interval + 1) * n);
        if f1 >= spec.num_frames {
            return Err(Error::Config(format!(
                "interval {} needs frame {f1}, scene has {}",
                self.cfg.interval, spec.num_frames
            )));
        }
        let frames = self.path("frames");
        fs::create_dir_all(&frames)?;
        (0..spec.num_frames).into_par_iter().try_for_each(|k| {
            write_frame(
                &frames.join(format!("frame_{k:04}.pgm")),
                &scene.render(k as f64),
            )
        })?;
        write_frame(&self.path("frame0.pgm"), &scene.render(f0 as f64))?;
        write_frame(&self.path("frame1.pgm"), &scene.render(f1 as f64))?;

        let tau0 = f0 as f64;
        self.cfg.timestamps.par_iter().try_for_each(|&t| {
            let tag = time_tag(t);
            let tau = scene.tau(self.cfg.interval, t);
            write_frame(&self.path(format!("gt_t{tag}.pgm")), &scene.render(tau))?;
            save_flo(
                &self.path(format!("gt_flow_t{tag}.flo")),
                &scene.flow(tau, tau0),
            )?;
            let fwd = scene.flow(tau0, tau);
            save_flo(&self.path(format!("gt_fwd_t{tag}.flo")), &fwd)?;
            // Pixels of the first frame whose surface point is still in view at t.
            let vis = BinaryImage::from_fn(spec.width, spec.height, |x, y| {
                let d = fwd.get(x, y);
                let owner = scene.object_at(tau0, x as f64, y as f64);
                scene.object_at(tau, x as f64 + d[0] as f64, y as f64 + d[1] as f64) == owner
            });
            write_mask(&self.path(format!("gt_vis_t{tag}.pgm")), &vis)
        })?;

        let mut queries: Vec<QueryPoint> = (0..scene.objects.len())
            .flat_map(|o| object_queries(&scene, self.cfg.interval, o, 3.0))
            .collect();
        for (i, q) in queries.iter_mut().enumerate() {
            q.label = i as u32;
        }
        let gt = ground_truth_tracks(&scene, self.cfg.interval, &queries, self.cfg.bins);
        let mut w = create(&self.path("gt_tracks.txt"))?;
        gt.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn simulate(&self) -> StageResult<()> {
        (|| {
            let scene = self.scene()?;
            let input = scene_interval(&scene, self.cfg.interval, self.cfg)?;
            let mut w = create(&self.path("events.evt"))?;
            input.events.write_to(&mut w)?;
            w.flush()?;
            Ok(())
        })()
        .at("simulate")
    }

    pub fn voxelize(&self) -> StageResult<()> {
        (|| {
            let input = self.input()?;
            for dir in DIRECTIONS {
                let events = direction_events(&input, dir)?;
                let grid = voxelize(&events, self.cfg.bins, input.t0, input.t1)?;
                self.write_voxels(dir, &grid)?;
            }
            Ok(())
        })()
        .at("voxelize")
    }

    pub fn segment(&self) -> StageResult<()> {
        (|| {
            let input = self.input()?;
            for dir in DIRECTIONS {
                let events = direction_events(&input, dir)?;
                let seg = segment(input.frames(dir).0, &events, self.cfg)?;
                self.write_segmentation(dir, &seg)?;
            }
            Ok(())
        })()
        .at("segment")
    }

    pub fn track(&self) -> StageResult<()> {
        (|| {
            let input = self.input()?;
            for dir in DIRECTIONS {
                let (anchor, other) = input.frames(dir);
                let events = direction_events(&input, dir)?;
                let voxels = VoxelGrid::read_from(open(
                    &self.path(format!("voxels_{}.vox", dir_tag(dir))),
                )?)?;
                let seg = self.read_segmentation(dir)?;
                let tracks = track(anchor, other, &voxels, &seg, &events, self.cfg)?;
                self.write_tracks(dir, &tracks.trajectories)?;
            }
            Ok(())
        })()
        .at("track")
    }

    pub fn flow(&self, dump: Option<&Path>) -> StageResult<()> {
        (|| {
            let input = self.input()?;
            let dump = dump
                .map(|d| Work::new(d, self.cfg))
                .transpose()
                .map_err(|f| f.error)?;
            for dir in DIRECTIONS {
                let seg = self.read_segmentation(dir)?;
                let trajs = self.read_tracks(dir)?;
                let (coarse, refined) =
                    any_time_flow(&input, &seg, &trajs, self.cfg.bins, dir, self.cfg)?;
                self.write_flow(dir, "flow", &refined)?;
                if let Some(d) = &dump {
                    d.write_flow(dir, "coarse", &coarse)?;
                }
            }
            Ok(())
        })()
        .at("flow")
    }

    pub fn interpolate(&self, dump: Option<&Path>) -> StageResult<()> {
        (|| {
            let input = self.input()?;
            let fwd = self.read_flow(Direction::Forward)?;
            let bwd = self.read_flow(Direction::Backward)?;
            let dump = dump
                .map(|d| Work::new(d, self.cfg))
                .transpose()
                .map_err(|f| f.error)?;
            self.cfg.timestamps.par_iter().try_for_each(|&t| {
                let (frame, inputs) =
                    interpolate_at(&input.i0, &input.i1, &fwd, &bwd, t, self.cfg)?;
                self.write_interp(t, &frame)?;
                if let Some(d) = &dump {
                    d.write_fusion(&inputs)?;
                }
                Ok(())
            })
        })()
        .at("interpolate")
    }

    /// The whole pipeline in memory. Writes the same files as the stage
    /// commands, the extra intermediates when `dump` is given, and metrics
    /// when ground truth is present.
    pub fn run(&self, dump: Option<&Path>) -> StageResult<()> {
        let input = self.input().at("load")?;
        let out = run_interval(&input, self.cfg).at("run")?;
        (|| {
            for (t, frame) in &out.frames {
                self.write_interp(*t, frame)?;
            }
            self.write_direction(Direction::Forward, &out.forward, false)?;
            self.write_direction(Direction::Backward, &out.backward, false)?;
            if let Some(d) = dump {
                let d = Work::new(d, self.cfg).map_err(|f| f.error)?;
                d.write_direction(Direction::Forward, &out.forward, true)?;
                d.write_direction(Direction::Backward, &out.backward, true)?;
                self.cfg.timestamps.par_iter().try_for_each(|&t| {
                    let (_, inputs) = interpolate_at(
                        &input.i0,
                        &input.i1,
                        &out.forward.flow,
                        &out.backward.flow,
                        t,
                        self.cfg,
                    )?;
                    d.write_fusion(&inputs)
                })?;
            }
            Ok(())
        })()
        .at("write")?;
        if self.has_ground_truth() {
            self.evaluate()?;
        }
        Ok(())
    }

    fn has_ground_truth(&self) -> bool {
        self.cfg
            .timestamps
            .iter()
            .any(|&t| self.path(format!("gt_t{}.pgm", time_tag(t))).exists())
    }

    /// Compares outputs against whatever ground truth exists and writes
    /// `metrics.txt` and `metrics.json`.
    pub fn evaluate(&self) -> StageResult<MetricReport> {
        let report = self.compute_metrics().at("evaluate")?;
        (|| {
            fs::write(self.path("metrics.txt"), report.to_key_value())?;
            fs::write(self.path("metrics.json"), report.to_json())?;
            Ok(())
        })()
        .at("evaluate")?;
        print!("{}", report.to_key_value());
        Ok(report)
    }

    fn compute_metrics(&self) -> Result<MetricReport> {
        let input = self.input()?;
        let mut report = MetricReport {
            weights: self.cfg.weights,
            ..MetricReport::default()
        };
        let fwd = self.read_flow(Direction::Forward)?;
        let bwd = self.read_flow(Direction::Backward)?;
        // Coarse forward flow rebuilt from the stored regions and tracks.
        let coarse = match (
            self.read_segmentation(Direction::Forward),
            self.read_tracks(Direction::Forward),
        ) {
            (Ok(seg), Ok(trajs)) => Some(
                any_time_flow(
                    &input,
                    &seg,
                    &trajs,
                    self.cfg.bins,
                    Direction::Forward,
                    self.cfg,
                )?
                .0,
            ),
            _ => None,
        };

        let (mut sq, mut ss, mut rec, mut n) = (0.0, 0.0, 0.0, 0usize);
        let (mut epe, mut n_epe) = (0.0, 0usize);
        let (mut lflow, mut n_flow) = (0.0, 0usize);
        for &t in &self.cfg.timestamps {
            let tag = time_tag(t);
            let gt_path = self.path(format!("gt_t{tag}.pgm"));
            if !gt_path.exists() {
                continue;
            }
            let gt = read_frame(&gt_path)?;
            let pred = read_frame(&self.path(format!("interp_t{tag}.pgm")))?;
            sq += mse(&pred, &gt)?;
            ss += ssim(&pred, &gt)?;
            rec += reconstruction_loss(&pred, &gt)?;
            n += 1;

            let gt_flow = self.path(format!("gt_flow_t{tag}.flo"));
            if gt_flow.exists() {
                let (_, inputs) = interpolate_at(&input.i0, &input.i1, &fwd, &bwd, t, self.cfg)?;
                epe += endpoint_error(&inputs.f_t0, &load_flo(&gt_flow)?)?;
                n_epe += 1;
            }
            let gt_fwd = self.path(format!("gt_fwd_t{tag}.flo"));
            let gt_vis = self.path(format!("gt_vis_t{tag}.pgm"));
            if let (Some(c), true, true) = (&coarse, gt_fwd.exists(), gt_vis.exists()) {
                let mask = read_mask(&gt_vis)?;
                lflow += flow_consistency_loss(
                    &c.at(t)?,
                    &load_flo(&gt_fwd)?,
                    &mask,
                    MaskNormalization::AllPixels,
                )?;
                n_flow += 1;
            }
        }
        if n > 0 {
            let m = sq / n as f64;
            report.psnr = Some(if m == 0.0 {
                f64::INFINITY
            } else {
                20.0 * (255.0 / m.sqrt()).log10()
            });
            report.ssim = Some(ss / n as f64);
            report.l_rec = Some(rec / n as f64);
        }
        if n_epe > 0 {
            report.epe = Some(epe / n_epe as f64);
        }
        if n_flow > 0 {
            report.l_flow = Some(lflow / n_flow as f64);
        }

        let gt_tracks = self.path("gt_tracks.txt");
        if gt_tracks.exists() {
            let gt = TrajectorySet::read_from(open(&gt_tracks)?)?;
            let queries: Vec<QueryPoint> = gt
                .trajectories
                .iter()
                .map(|g| QueryPoint {
                    label: g.label,
                    x: g.positions[0].0,
                    y: g.positions[0].1,
                    source: QuerySource::Corner,
                })
                .collect();
            let pred = track_queries(&input, &queries, self.cfg.bins, self.cfg)?;
            report.l_track = Some(tracking_loss(&pred, &gt)?);
            let pv: Vec<f64> = pred
                .trajectories
                .iter()
                .flat_map(|p| p.visible.iter().map(|&v| if v { 1.0 } else { 0.0 }))
                .collect();
            let gv: Vec<bool> = gt
                .trajectories
                .iter()
                .flat_map(|g| g.visible.iter().copied())
                .collect();
            report.l_occ = Some(occlusion_loss(&pv, &gv)?);
        }
        Ok(report)
    }

    /// Voxel bin-size study on the configured scene; also written to `bin_study.txt`.
    pub fn bin_study(&self) -> StageResult<String> {
        (|| {
            let scene = self.scene()?;
            let table = format_bin_study(&bin_size_study(&scene, &STUDY_BINS, self.cfg)?);
            fs::write(self.path("bin_study.txt"), &table)?;
            Ok(table)
        })()
        .at("bin-study")
    }

    fn write_direction(&self, dir: Direction, out: &DirectionOutput, coarse: bool) -> Result<()> {
        self.write_voxels(dir, &out.voxels)?;
        self.write_segmentation(dir, &out.segmentation)?;
        self.write_tracks(dir, &out.tracks.trajectories)?;
        if coarse {
            self.write_flow(dir, "coarse", &out.coarse)?;
        }
        self.write_flow(dir, "flow", &out.flow)
    }

    fn write_voxels(&self, dir: Direction, grid: &VoxelGrid) -> Result<()> {
        let mut w = create(&self.path(format!("voxels_{}.vox", dir_tag(dir))))?;
        grid.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    fn write_segmentation(&self, dir: Direction, seg: &Segmentation) -> Result<()> {
        let d = dir_tag(dir);
        write_labels(&self.path(format!("labels_{d}.pgm")), &seg.labels_u16()?)?;
        write_mask(&self.path(format!("mask_{d}.pgm")), &seg.mask)
    }

    fn read_segmentation(&self, dir: Direction) -> Result<Segmentation> {
        let d = dir_tag(dir);
        let labels: Plane<u16> = read_labels(&self.path(format!("labels_{d}.pgm")))?;
        Segmentation::from_u16(&labels, read_mask(&self.path(format!("mask_{d}.pgm")))?)
    }

    fn write_tracks(&self, dir: Direction, trajs: &TrajectorySet) -> Result<()> {
        let mut w = create(&self.path(format!("tracks_{}.txt", dir_tag(dir))))?;
        trajs.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    fn read_tracks(&self, dir: Direction) -> Result<TrajectorySet> {
        TrajectorySet::read_from(open(&self.path(format!("tracks_{}.txt", dir_tag(dir))))?)
    }

    fn write_flow(&self, dir: Direction, prefix: &str, flow: &AnyTimeFlow) -> Result<()> {
        for (k, f) in flow.fields.iter().enumerate() {
            save_flo(
                &self.path(format!("{prefix}_{}_{k:02}.flo", dir_tag(dir))),
                f,
            )?;
        }
        Ok(())
    }

    /// Refined flow of one direction. Stored fields are complete, so every
    /// pixel counts as valid.
    fn read_flow(&self, dir: Direction) -> Result<AnyTimeFlow> {
        let fields = (0..self.cfg.bins)
            .map(|k| load_flo(&self.path(format!("flow_{}_{k:02}.flo", dir_tag(dir)))))
            .collect::<Result<Vec<_>>>()?;
        let (w, h) = fields[0].dims();
        Ok(AnyTimeFlow {
            direction: dir,
            valid: vec![BinaryImage::filled(w, h, true); fields.len()],
            fields,
        })
    }

    fn write_interp(&self, t: f64, frame: &Frame) -> Result<()> {
        write_frame(&self.path(format!("interp_t{}.pgm", time_tag(t))), frame)
    }

    fn write_fusion(&self, inputs: &FusionInputs) -> Result<()> {
        let tag = time_tag(inputs.t);
        save_flo(&self.path(format!("flow_t0_t{tag}.flo")), &inputs.f_t0)?;
        save_flo(&self.path(format!("flow_t1_t{tag}.flo")), &inputs.f_t1)?;
        write_mask(
            &self.path(format!("occlusion_t{tag}.pgm")),
            &inputs.occlusion,
        )
    }
}
