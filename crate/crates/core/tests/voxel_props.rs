use evinterp::event::{reverse_stream, Event, EventStream};
use evinterp::tracker::{build_feature_pyramid, DEFAULT_SCALES};
use evinterp::voxel::{bin_slice, build_voxel_grid};
use proptest::prelude::*;

const W: usize = 10;
const H: usize = 7;

fn stream(max: usize) -> impl Strategy<Value = EventStream> {
    prop::collection::vec(
        (0.0..=1.0f64, 0..W as u16, 0..H as u16, any::<bool>()),
        0..max,
    )
    .prop_map(|raw| {
        let events = raw
            .into_iter()
            .map(|(t, x, y, p)| Event::new(t, x, y, if p { 1 } else { -1 }))
            .collect();
        EventStream::new(W, H, events).unwrap()
    })
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

proptest! {
    #[test]
    fn mass_is_conserved_per_pixel_and_globally(s in stream(400), bins in 1usize..20) {
        let g = build_voxel_grid(&s, bins, 0.0, 1.0).unwrap();
        prop_assert!(close(g.total_mass(), s.polarity_sum() as f64, 1e-9));
        let mass = g.pixel_mass();
        for y in 0..H {
            for x in 0..W {
                let p: i64 = s.iter().filter(|e| (e.x as usize, e.y as usize) == (x, y)).map(|e| e.p as i64).sum();
                prop_assert!(close(*mass.get(x, y), p as f64, 1e-9));
            }
        }
    }

    #[test]
    fn each_event_deposits_unit_weight_in_at_most_two_adjacent_bins(t in 0.0..=1.0f64, bins in 1usize..20) {
        let s = EventStream::new(W, H, vec![Event::new(t, 3, 4, -1)]).unwrap();
        let g = build_voxel_grid(&s, bins, 0.0, 1.0).unwrap();
        let touched: Vec<usize> = (0..bins).filter(|&k| g.get(k, 3, 4) != 0.0).collect();
        prop_assert!(!touched.is_empty() && touched.len() <= 2);
        prop_assert!(touched.windows(2).all(|w| w[1] == w[0] + 1));
        let abs: f64 = (0..bins).map(|k| g.get(k, 3, 4).abs()).sum();
        prop_assert!((abs - 1.0).abs() < 1e-12);
        prop_assert!((0..bins).all(|k| g.get(k, 3, 4) <= 0.0));
    }

    #[test]
    fn reversed_stream_gives_negated_bin_reversed_grid(s in stream(400), bins in 1usize..20) {
        let f = build_voxel_grid(&s, bins, 0.0, 1.0).unwrap();
        let r = build_voxel_grid(&reverse_stream(&s, 0.0, 1.0).unwrap(), bins, 0.0, 1.0).unwrap();
        for k in 0..bins {
            let (a, _) = bin_slice(&r, k).unwrap();
            let (b, _) = bin_slice(&f, bins - 1 - k).unwrap();
            for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
                prop_assert!((x + y).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn single_bin_is_the_signed_count_image(s in stream(200)) {
        let g = build_voxel_grid(&s, 1, 0.0, 1.0).unwrap();
        let mut counts = vec![0i64; W * H];
        for e in s.iter() {
            counts[e.y as usize * W + e.x as usize] += e.p as i64;
        }
        for (v, c) in g.values().iter().zip(&counts) {
            prop_assert_eq!(*v, *c as f64);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn reversed_pyramid_is_bin_reversed(raw in prop::collection::vec((0.0..=1.0f64, 0..40u16, 0..36u16, any::<bool>()), 1..300), bins in 2usize..10) {
        let events = raw.into_iter().map(|(t, x, y, p)| Event::new(t, x, y, if p { 1 } else { -1 })).collect();
        let s = EventStream::new(40, 36, events).unwrap();
        let f = build_feature_pyramid(&build_voxel_grid(&s, bins, 0.0, 1.0).unwrap(), &DEFAULT_SCALES).unwrap().bin_reversed();
        let r = build_feature_pyramid(&build_voxel_grid(&reverse_stream(&s, 0.0, 1.0).unwrap(), bins, 0.0, 1.0).unwrap(), &DEFAULT_SCALES).unwrap();
        for k in 0..bins {
            for (a, b) in std::iter::once(f.base(k)).chain(f.scaled(k)).zip(std::iter::once(r.base(k)).chain(r.scaled(k))) {
                for (x, y) in a.data().iter().zip(b.data()) {
                    prop_assert!((x - y).abs() <= 1e-6);
                }
            }
        }
    }
}
