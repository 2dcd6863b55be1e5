mod common;

use evinterp::config::PipelineConfig;
use evinterp::flow::{
    confidence_map, densify_flow, occlusion_mask, refine_flow, sample_intermediate_flows,
    AnyTimeFlow, ConfidenceParams, Direction, RefineConfig,
};
use evinterp::image::{BinaryImage, FlowField, Frame, Plane, ScalarImage};
use evinterp::interpolate::FusionInputs;
use evinterp::scene::Scene;
use evinterp::segmentation::regions_from_labels;
use evinterp::tracker::{Trajectory, TrajectorySet};
use proptest::prelude::*;

fn field(w: usize, h: usize, max: f32) -> impl Strategy<Value = FlowField> {
    prop::collection::vec((-max..max, -max..max), w * h).prop_map(move |v| {
        FlowField::from_vec(w, h, v.into_iter().map(|(u, v)| [u, v]).collect()).unwrap()
    })
}

fn guide(w: usize, h: usize) -> impl Strategy<Value = Frame> {
    prop::collection::vec(0.0..255.0f32, w * h).prop_map(move |d| Frame::new(w, h, 1, d).unwrap())
}

fn constant_flow(w: usize, h: usize, bins: usize, d: [f32; 2]) -> AnyTimeFlow {
    AnyTimeFlow {
        direction: Direction::Forward,
        fields: (0..bins)
            .map(|k| FlowField::constant(w, h, d[0] * k as f32, d[1] * k as f32))
            .collect(),
        valid: vec![BinaryImage::filled(w, h, true); bins],
    }
}

fn max_diff(a: &FlowField, b: &FlowField) -> f64 {
    a.as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(p, q)| ((p[0] - q[0]).abs().max((p[1] - q[1]).abs())) as f64)
        .fold(0.0, f64::max)
}

proptest! {
    #[test]
    fn confidence_lies_in_unit_range(a in field(9, 7, 4.0), b in field(9, 7, 4.0)) {
        let c = confidence_map(&a, &b, ConfidenceParams::default()).unwrap();
        prop_assert!(c.as_slice().iter().all(|&x| x > 0.0 && x <= 1.0));
    }

    // Negating both fields also mirrors the landing point, so the invariance
    // holds for the mapped pair; a spatially constant backward field makes
    // the pair independent of where it is sampled.
    #[test]
    fn confidence_is_negation_invariant(a in field(9, 7, 4.0), u in -4.0..4.0f32, v in -4.0..4.0f32) {
        let p = ConfidenceParams::default();
        let b = FlowField::constant(9, 7, u, v);
        let c = confidence_map(&a, &b, p).unwrap();
        let n = confidence_map(&a.negated(), &b.negated(), p).unwrap();
        for (x, y) in c.as_slice().iter().zip(n.as_slice()) {
            prop_assert!((x - y).abs() <= 1e-12, "{} vs {}", x, y);
        }
    }

    #[test]
    fn confidence_is_one_exactly_on_consistent_pixels(u in -3i32..=3, v in -3i32..=3) {
        let a = FlowField::constant(12, 12, u as f32, v as f32);
        let b = FlowField::constant(12, 12, -u as f32, -v as f32);
        let c = confidence_map(&a, &b, ConfidenceParams::default()).unwrap();
        prop_assert!(c.as_slice().iter().all(|&x| x == 1.0));
    }

    #[test]
    fn occlusion_is_the_intersection(a in prop::collection::vec(0.0..1.0f64, 30), b in prop::collection::vec(0.0..1.0f64, 30), th in 0.0..1.0f64) {
        let ca = ScalarImage::from_vec(6, 5, a).unwrap();
        let cb = ScalarImage::from_vec(6, 5, b).unwrap();
        let m = occlusion_mask(&ca, &cb, th).unwrap();
        for i in 0..30 {
            prop_assert_eq!(m.as_slice()[i], ca.as_slice()[i] < th && cb.as_slice()[i] < th);
        }
    }

    #[test]
    fn refine_keeps_constant_flow_and_is_settled(g in guide(14, 11), u in -5.0..5.0f32, v in -5.0..5.0f32) {
        let flow = constant_flow(14, 11, 3, [u, v]);
        let cfg = RefineConfig::default();
        let once = refine_flow(&flow, &g, &cfg).unwrap();
        let twice = refine_flow(&once, &g, &cfg).unwrap();
        for k in 0..3 {
            prop_assert!(max_diff(&once.fields[k], &flow.fields[k]) <= 1e-6);
            prop_assert!(max_diff(&twice.fields[k], &once.fields[k]) <= 1e-6);
        }
    }

    #[test]
    fn constant_velocity_gives_linear_intermediate_flows(u in -4.0..4.0f32, v in -4.0..4.0f32, t in 0.0..=1.0f64) {
        let bins = 9;
        let fwd = constant_flow(32, 32, bins, [u / 8.0, v / 8.0]);
        let mut bwd = constant_flow(32, 32, bins, [-u / 8.0, -v / 8.0]);
        bwd.direction = Direction::Backward;
        let fl = sample_intermediate_flows(&fwd, &bwd, t).unwrap();
        // Interior pixels: everything that lands at least 5 px from the border.
        for y in 5..27 {
            for x in 5..27 {
                let a = fl.t_to_0.get(x, y);
                let b = fl.t_to_1.get(x, y);
                let (eu, ev) = (-t * u as f64, -t * v as f64);
                prop_assert!((a[0] as f64 - eu).abs() < 1e-5 && (a[1] as f64 - ev).abs() < 1e-5);
                prop_assert!((b[0] as f64 - (1.0 - t) * u as f64).abs() < 1e-5 && (b[1] as f64 - (1.0 - t) * v as f64).abs() < 1e-5);
            }
        }
        if t == 0.0 {
            prop_assert!(fl.t_to_0.as_slice().iter().all(|d| *d == [0.0, 0.0]));
        }
    }
}

/// Two rectangles moving apart on a static background, placed at `o`.
fn two_rects(o: (usize, usize), bins: usize) -> (Plane<u32>, BinaryImage, TrajectorySet, Frame) {
    let (w, h) = (64, 56);
    let label = |x: usize, y: usize| -> u32 {
        let (x, y) = (x as isize - o.0 as isize, y as isize - o.1 as isize);
        if (4..16).contains(&x) && (6..20).contains(&y) {
            1
        } else if (20..30).contains(&x) && (10..24).contains(&y) {
            2
        } else {
            0
        }
    };
    let labels = Plane::from_fn(w, h, label);
    let mask = labels.map(|&l| l != 0);
    let traj = |l: u32, d: (f64, f64)| Trajectory {
        label: l,
        positions: (0..bins)
            .map(|k| (10.0 + d.0 * k as f64, 10.0 + d.1 * k as f64))
            .collect(),
        visible: vec![true; bins],
        residuals: vec![0.0; bins],
    };
    let trajs = TrajectorySet {
        trajectories: vec![traj(1, (-0.75, 0.25)), traj(2, (0.5, -0.5))],
    };
    let g = Frame::gray_from_fn(w, h, |x, y| match label(x, y) {
        0 => 40.0,
        l => (60 * l) as f32 + ((x - o.0 + 2 * (y - o.1)) % 7) as f32 * 9.0,
    });
    (labels, mask, trajs, g)
}

#[test]
fn densify_and_refine_commute_with_integer_translation() {
    let bins = 5;
    let run = |o| {
        let (labels, mask, trajs, g) = two_rects(o, bins);
        let regions = regions_from_labels(&labels, &mask, 0.1).unwrap();
        let coarse = densify_flow(&trajs, &regions, (64, 56), bins, Direction::Forward).unwrap();
        refine_flow(&coarse, &g, &RefineConfig::default()).unwrap()
    };
    let a = run((10, 8));
    let b = run((17, 13));
    for k in 0..bins {
        for y in 0..56 - 5 {
            for x in 0..64 - 7 {
                let p = a.fields[k].get(x, y);
                let q = b.fields[k].get(x + 7, y + 5);
                assert!(
                    (p[0] - q[0]).abs() < 1e-6 && (p[1] - q[1]).abs() < 1e-6,
                    "bin {k} ({x}, {y}): {p:?} vs {q:?}"
                );
            }
        }
    }
}

/// Ground-truth any-time flows of the translating square: each one-sided
/// low-confidence mask covers its analytic band (pixels uncovered since
/// frame 0, pixels about to be covered by frame 1), and the occlusion mask
/// is their intersection, which is empty for a lone object over a static
/// background.
#[test]
fn one_sided_masks_cover_the_analytic_bands() {
    let cfg = PipelineConfig::default();
    let scene = Scene::new(&cfg.scene).unwrap();
    let tau = |u: f64| scene.tau(0, u);
    let (fwd, bwd) = common::true_any_time(&scene, 16);
    let (i0, i1) = (scene.render(tau(0.0)), scene.render(tau(1.0)));
    for t in [0.25, 0.5, 0.75] {
        let fl = sample_intermediate_flows(&fwd, &bwd, t).unwrap();
        let inp = FusionInputs::assemble(
            &i0,
            &i1,
            &fl,
            cfg.flow.confidence,
            cfg.flow.occlusion_threshold,
        )
        .unwrap();
        let th = cfg.flow.occlusion_threshold;
        let (mut uncovered, mut hit0, mut covered, mut hit1) = (0, 0, 0, 0);
        for y in 0..256 {
            for x in 0..256 {
                let (fx, fy) = (x as f64, y as f64);
                let bg_now = scene.object_at(tau(t), fx, fy).is_none();
                if bg_now && scene.object_at(tau(0.0), fx, fy).is_some() {
                    uncovered += 1;
                    hit0 += usize::from(*inp.c_t0.get(x, y) < th);
                }
                if bg_now && scene.object_at(tau(1.0), fx, fy).is_some() {
                    covered += 1;
                    hit1 += usize::from(*inp.c_t1.get(x, y) < th);
                }
                assert_eq!(
                    *inp.occlusion.get(x, y),
                    *inp.c_t0.get(x, y) < th && *inp.c_t1.get(x, y) < th
                );
            }
        }
        assert!(uncovered > 0 && covered > 0);
        assert!(hit0 * 5 >= uncovered * 4, "t={t}: {hit0}/{uncovered}");
        assert!(hit1 * 5 >= covered * 4, "t={t}: {hit1}/{covered}");
    }
}
