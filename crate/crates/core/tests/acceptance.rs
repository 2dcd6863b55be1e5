//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

use std::process::ExitCode;
use std::time::Instant;

use evinterp::config::PipelineConfig;
use evinterp::event::{reverse_stream, Event, EventStream};
use evinterp::flow::{confidence_map, ConfidenceParams};
use evinterp::image::{FlowField, Frame};
use evinterp::metrics::{endpoint_error, endpoint_errors, occlusion_loss, psnr, LossWeights};
use evinterp::pipeline::{
    bin_size_study, direction_events, format_bin_study, ground_truth_tracks, interpolate_at,
    object_queries, quantize_frame, run_interval, scene_interval, track_errors, track_queries,
    IntervalInput, RunOutput,
};
use evinterp::scene::{Scene, SceneKind, SceneSpec};
use evinterp::tracker::{build_feature_pyramid, track_all, TrajectorySet};
use evinterp::voxel::build_voxel_grid;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = (bool, String);
type Criterion = (&'static str, fn() -> Outcome);

fn config(kind: SceneKind, size: usize) -> PipelineConfig {
    PipelineConfig {
        scene: SceneSpec::new(kind, size, size),
        ..PipelineConfig::default()
    }
}

fn random_stream(rng: &mut ChaCha8Rng, n: usize) -> EventStream {
    let events = (0..n)
        .map(|_| {
            Event::new(
                rng.gen_range(0.0..=1.0),
                rng.gen_range(0..64),
                rng.gen_range(0..48),
                if rng.gen() { 1 } else { -1 },
            )
        })
        .collect();
    EventStream::new(64, 48, events).unwrap()
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

fn voxel_mass() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    let mut ok = true;
    for _ in 0..100 {
        let s = random_stream(&mut rng, 10_000);
        let mut per_pixel = vec![0i64; 64 * 48];
        for e in s.iter() {
            per_pixel[e.y as usize * 64 + e.x as usize] += e.p as i64;
        }
        for bins in [1, 4, 16] {
            let g = build_voxel_grid(&s, bins, 0.0, 1.0).unwrap();
            let total = s.polarity_sum() as f64;
            ok &= rel_close(g.total_mass(), total, 1e-9);
            worst = worst.max((g.total_mass() - total).abs());
            for (m, &p) in g.pixel_mass().as_slice().iter().zip(&per_pixel) {
                ok &= rel_close(*m, p as f64, 1e-9);
                worst = worst.max((m - p as f64).abs());
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    (
        ok && secs < 5.0,
        format!("max deviation {worst:.2e}, {secs:.2} s"),
    )
}

/// The interval played backwards: frames swapped, events mirrored.
fn reversed(input: &IntervalInput) -> IntervalInput {
    IntervalInput {
        i0: input.i1.clone(),
        i1: input.i0.clone(),
        events: direction_events(input, evinterp::flow::Direction::Backward).unwrap(),
        t0: input.t0,
        t1: input.t1,
    }
}

fn time_reversal() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut grid_dev: f64 = 0.0;
    for _ in 0..20 {
        let s = random_stream(&mut rng, 10_000);
        let r = reverse_stream(&s, 0.0, 1.0).unwrap();
        for bins in [1, 4, 16] {
            let f = build_voxel_grid(&s, bins, 0.0, 1.0).unwrap();
            let b = build_voxel_grid(&r, bins, 0.0, 1.0).unwrap();
            for k in 0..bins {
                for y in 0..48 {
                    for x in 0..64 {
                        grid_dev = grid_dev.max((b.get(k, x, y) + f.get(bins - 1 - k, x, y)).abs());
                    }
                }
            }
        }
    }

    let mut cfg = config(SceneKind::Translate, 128);
    cfg.scene.velocity = (0.75, 0.0);
    let scene = Scene::new(&cfg.scene).unwrap();
    let input = scene_interval(&scene, 0, &cfg).unwrap();
    let queries = object_queries(&scene, 0, 0, 3.0);
    let fwd = track_queries(&input, &queries, cfg.bins, &cfg).unwrap();
    let mut ends = queries.clone();
    for (q, t) in ends.iter_mut().zip(&fwd.trajectories) {
        let p = t.positions[t.len() - 1];
        (q.x, q.y) = (p.0.round(), p.1.round());
    }
    let bwd = track_queries(&reversed(&input), &ends, cfg.bins, &cfg).unwrap();
    let mut traj_dev: f64 = 0.0;
    let mut sum = 0.0;
    let mut count = 0;
    for (f, b) in fwd.trajectories.iter().zip(&bwd.trajectories) {
        let n = f.len();
        for k in 0..n {
            let db = b.displacement(k);
            let (fa, fe) = (f.positions[n - 1 - k], f.positions[n - 1]);
            let d = (db.0 - (fa.0 - fe.0)).hypot(db.1 - (fa.1 - fe.1));
            traj_dev = traj_dev.max(d);
            sum += d;
            count += 1;
        }
    }
    (
        grid_dev <= 1e-9 && traj_dev <= 0.5,
        format!(
            "grid deviation {grid_dev:.2e}; trajectory deviation max {traj_dev:.3} px, mean {:.3} px",
            sum / count as f64
        ),
    )
}

/// Mean per-sample distance of the straight line between the true endpoints.
fn linear_baseline_error(gt: &TrajectorySet) -> f64 {
    let mut sum = 0.0;
    let mut n = 0;
    for g in &gt.trajectories {
        let b = g.len();
        let (a, e) = (g.positions[0], g.positions[b - 1]);
        for (k, p) in g.positions.iter().enumerate() {
            let u = k as f64 / (b - 1) as f64;
            sum += (a.0 + u * (e.0 - a.0) - p.0).hypot(a.1 + u * (e.1 - a.1) - p.1);
            n += 1;
        }
    }
    sum / n as f64
}

/// Endpoint error of raw event tracking, before endpoint anchoring.
fn event_only_end_error(input: &IntervalInput, scene: &Scene, cfg: &PipelineConfig) -> f64 {
    let queries = object_queries(scene, 0, 0, 3.0);
    let voxels = evinterp::pipeline::voxelize(&input.events, cfg.bins, input.t0, input.t1).unwrap();
    let pyramid = build_feature_pyramid(&voxels, &cfg.tracker.scales).unwrap();
    let pred = track_all(&pyramid, &queries, &cfg.tracker);
    track_errors(&pred, &ground_truth_tracks(scene, 0, &queries, cfg.bins)).0
}

fn tracking() -> Outcome {
    let mut ok = true;
    let mut notes = Vec::new();
    for v in [(0.75, 0.0), (0.0, -0.75), (0.5, 0.5), (-0.6, 0.3)] {
        let mut cfg = config(SceneKind::Translate, 128);
        cfg.scene.velocity = v;
        let scene = Scene::new(&cfg.scene).unwrap();
        let input = scene_interval(&scene, 0, &cfg).unwrap();
        let queries = object_queries(&scene, 0, 0, 3.0);
        let pred = track_queries(&input, &queries, cfg.bins, &cfg).unwrap();
        let (end, _) = track_errors(&pred, &ground_truth_tracks(&scene, 0, &queries, cfg.bins));
        ok &= end <= 0.5;
        let raw = event_only_end_error(&input, &scene, &cfg);
        notes.push(format!(
            "v={:?}/frame end {end:.3} (events only {raw:.3})",
            v
        ));
    }
    let cfg = config(SceneKind::Sinusoid, 128);
    let scene = Scene::new(&cfg.scene).unwrap();
    let input = scene_interval(&scene, 0, &cfg).unwrap();
    let queries = object_queries(&scene, 0, 0, 3.0);
    let gt = ground_truth_tracks(&scene, 0, &queries, cfg.bins);
    let pred = track_queries(&input, &queries, cfg.bins, &cfg).unwrap();
    let (_, mean) = track_errors(&pred, &gt);
    let base = linear_baseline_error(&gt);
    ok &= mean <= 1.0 && mean < base;
    notes.push(format!("sinusoid mean {mean:.3} vs linear {base:.3}"));
    (ok, notes.join("; "))
}

fn fraction_within(pred: &FlowField, gt: &FlowField, tol: f64) -> f64 {
    let e = endpoint_errors(pred, gt).unwrap();
    e.iter().filter(|&&x| x <= tol).count() as f64 / e.len() as f64
}

fn flow_quality() -> Outcome {
    let cfg = config(SceneKind::TwoObjects, 256);
    let scene = Scene::new(&cfg.scene).unwrap();
    let input = scene_interval(&scene, 0, &cfg).unwrap();
    let out = run_interval(&input, &cfg).unwrap();
    let (t0, t1) = (scene.tau(0, 0.0), scene.tau(0, 1.0));
    let fwd = fraction_within(
        out.forward.flow.fields.last().unwrap(),
        &scene.flow(t0, t1),
        0.5,
    );
    let bwd = fraction_within(
        out.backward.flow.fields.last().unwrap(),
        &scene.flow(t1, t0),
        0.5,
    );

    let cfg = config(SceneKind::Sinusoid, 256);
    let scene = Scene::new(&cfg.scene).unwrap();
    let input = scene_interval(&scene, 0, &cfg).unwrap();
    let out = run_interval(&input, &cfg).unwrap();
    let (t0, th, t1) = (scene.tau(0, 0.0), scene.tau(0, 0.5), scene.tau(0, 1.0));
    let gt = scene.flow(t0, th);
    let ours = endpoint_error(&out.forward.flow.at(0.5).unwrap(), &gt).unwrap();
    let full = scene.flow(t0, t1);
    let linear = FlowField::from_fn(256, 256, |x, y| {
        let d = full.get(x, y);
        [0.5 * d[0], 0.5 * d[1]]
    });
    let base = endpoint_error(&linear, &gt).unwrap();
    (
        fwd >= 0.95 && bwd >= 0.95 && base >= 2.0 * ours,
        format!("two_objects within 0.5 px: fwd {fwd:.4}, bwd {bwd:.4}; sinusoid EPE at t=0.5 ours {ours:.4}, linear {base:.4}"),
    )
}

fn confidence_spots() -> Outcome {
    let p = ConfidenceParams::default();
    let a = FlowField::from_fn(16, 12, |x, y| [(x % 5) as f32 - 2.0, (y % 3) as f32 - 1.0]);
    let consistent = confidence_map(
        &FlowField::constant(16, 12, 1.5, -2.0),
        &FlowField::constant(16, 12, -1.5, 2.0),
        p,
    )
    .unwrap();
    let zero = confidence_map(&FlowField::zeros(16, 12), &FlowField::zeros(16, 12), p).unwrap();
    let exact = consistent
        .as_slice()
        .iter()
        .chain(zero.as_slice())
        .all(|&c| c == 1.0);
    let spot = *confidence_map(
        &FlowField::constant(16, 12, 2.0, 0.0),
        &FlowField::zeros(16, 12),
        p,
    )
    .unwrap()
    .get(5, 5);
    let expect = (-4.0f64 / 0.54).exp();
    let in_range = confidence_map(&a, &a, p)
        .unwrap()
        .as_slice()
        .iter()
        .all(|&c| c > 0.0 && c <= 1.0);
    (
        exact && in_range && (spot - expect).abs() <= 1e-9,
        format!("consistent fields exact 1: {exact}; spot {spot:.12e} vs {expect:.12e}"),
    )
}

fn frame_average(a: &Frame, b: &Frame) -> Frame {
    Frame::gray_from_fn(a.width(), a.height(), |x, y| {
        0.5 * (a.get(x, y, 0) + b.get(x, y, 0))
    })
}

fn interior_equal(a: &Frame, b: &Frame, margin: usize) -> bool {
    let (w, h) = a.dims();
    (margin..h - margin)
        .all(|y| (margin..w - margin).all(|x| a.get(x, y, 0).to_bits() == b.get(x, y, 0).to_bits()))
}

fn interpolation() -> Outcome {
    let cfg = config(SceneKind::Translate, 256);
    let scene = Scene::new(&cfg.scene).unwrap();
    let input = scene_interval(&scene, 0, &cfg).unwrap();
    let start = Instant::now();
    let out = run_interval(&input, &cfg).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let mut ok = secs < 60.0;
    let mut notes = Vec::new();
    let base = quantize_frame(&frame_average(&input.i0, &input.i1));
    for (t, f) in &out.frames {
        let gt = quantize_frame(&scene.render(scene.tau(0, *t)));
        let ours = psnr(&quantize_frame(f), &gt).unwrap();
        let avg = psnr(&base, &gt).unwrap();
        ok &= ours >= avg + 5.0 && ours >= 30.0;
        notes.push(format!("t={t} {ours:.2} dB (average {avg:.2})"));
    }
    let at = |t| {
        interpolate_at(
            &input.i0,
            &input.i1,
            &out.forward.flow,
            &out.backward.flow,
            t,
            &cfg,
        )
        .unwrap()
        .0
    };
    let boundary = interior_equal(&at(0.0), &input.i0, 1) && interior_equal(&at(1.0), &input.i1, 1);
    ok &= boundary;
    notes.push(format!("boundary exact {boundary}; {secs:.1} s"));
    (ok, notes.join("; "))
}

fn bin_size() -> Outcome {
    let mut cfg = config(SceneKind::Translate, 128);
    cfg.scene.velocity = (1.5, 0.0);
    let scene = Scene::new(&cfg.scene).unwrap();
    let rows = bin_size_study(&scene, &[4, 8, 16, 32], &cfg).unwrap();
    print!("{}", format_bin_study(&rows));
    let (b4, b32) = (rows[0], rows[3]);
    (
        b32.any_time_error <= b4.any_time_error && b32.end_error <= b4.end_error,
        format!(
            "any-time error B=4 {:.3}, B=32 {:.3}; end B=4 {:.3}, B=32 {:.3}; per-sample mean B=4 {:.3}, B=32 {:.3}",
            b4.any_time_error, b32.any_time_error, b4.end_error, b32.end_error, b4.mean_error, b32.mean_error
        ),
    )
}

fn run_with_threads(threads: usize, input: &IntervalInput, cfg: &PipelineConfig) -> RunOutput {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .unwrap();
    pool.install(|| run_interval(input, cfg).unwrap())
}

fn same_bits(a: &RunOutput, b: &RunOutput) -> bool {
    let flows = |o: &RunOutput| {
        [
            &o.forward.flow,
            &o.backward.flow,
            &o.forward.coarse,
            &o.backward.coarse,
        ]
        .iter()
        .flat_map(|f| {
            f.fields
                .iter()
                .flat_map(|g| {
                    g.as_slice()
                        .iter()
                        .flat_map(|d| [d[0].to_bits(), d[1].to_bits()])
                })
                .collect::<Vec<_>>()
        })
        .collect::<Vec<_>>()
    };
    let frames = |o: &RunOutput| {
        o.frames
            .iter()
            .flat_map(|(t, f)| {
                std::iter::once(t.to_bits()).chain(f.as_slice().iter().map(|v| v.to_bits() as u64))
            })
            .collect::<Vec<_>>()
    };
    flows(a) == flows(b)
        && frames(a) == frames(b)
        && a.forward.tracks.trajectories == b.forward.tracks.trajectories
}

fn determinism() -> Outcome {
    let cfg = config(SceneKind::TwoObjects, 128);
    let scene = Scene::new(&cfg.scene).unwrap();
    let input = scene_interval(&scene, 0, &cfg).unwrap();
    let again = scene_interval(&scene, 0, &cfg).unwrap();
    let one = run_with_threads(1, &input, &cfg);
    let four = run_with_threads(4, &input, &cfg);
    let second = run_with_threads(4, &again, &cfg);
    let threads = same_bits(&one, &four);
    let invocations = input.events.bit_identical(&again.events) && same_bits(&four, &second);
    (
        threads && invocations,
        format!("1 vs 4 threads {threads}; repeated {invocations}"),
    )
}

fn metric_cases() -> Outcome {
    let a = Frame::filled(8, 8, 1, 100.0);
    let b = Frame::filled(8, 8, 1, 110.0);
    let p = psnr(&a, &b).unwrap();
    let bce = occlusion_loss(&[0.5; 4], &[true, false, true, false]).unwrap();
    let epe = endpoint_error(
        &FlowField::constant(5, 5, 3.0, 4.0),
        &FlowField::zeros(5, 5),
    )
    .unwrap();
    let w = LossWeights::default();
    let weights = (w.lambda1, w.lambda2, w.lambda3) == (1.0, 1.0, 0.8);
    let track = w.total_track(0.3, 0.2);
    let rec = w.total_rec(2.0, 1.5);
    let ok = (p - 28.130803608679).abs() <= 1e-6
        && (bce - std::f64::consts::LN_2).abs() <= 1e-6
        && (epe - 5.0).abs() <= 1e-6
        && weights
        && (track - 0.5).abs() <= 1e-6
        && (rec - 3.2).abs() <= 1e-6;
    (
        ok,
        format!("psnr {p:.6}, bce {bce:.6}, epe {epe:.6}, totals {track:.6}/{rec:.6}"),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("voxel mass conservation", voxel_mass),
        ("time-reversal symmetry", time_reversal),
        ("tracking accuracy", tracking),
        ("flow quality", flow_quality),
        ("confidence spot values", confidence_spots),
        ("interpolation", interpolation),
        ("bin-size sensitivity", bin_size),
        ("determinism", determinism),
        ("metric cases", metric_cases),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let (ok, detail) = check();
        failed += usize::from(!ok);
        println!("{} {name}: {detail}", if ok { "PASS" } else { "FAIL" });
    }
    println!(
        "acceptance: {} of {} criteria pass",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
