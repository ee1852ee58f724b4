use habdf_core::metrics::{gt_distance, jaccard, success, summarize, FrameEval};
use habdf_core::BoundingBox;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn bb(u: f64, v: f64, h: f64, w: f64) -> BoundingBox {
    BoundingBox::new(u, v, h, w).unwrap()
}

/// Area overlap by scanlines: rows are sampled at their centers and each
/// row's covered length is measured in x.
fn raster_jaccard(a: &BoundingBox, b: &BoundingBox, rows: usize) -> f64 {
    let span = |x: &BoundingBox| {
        (
            x.u - x.w / 2.0,
            x.u + x.w / 2.0,
            x.v - x.h / 2.0,
            x.v + x.h / 2.0,
        )
    };
    let (al, ar, at, ab) = span(a);
    let (bl, br, bt, bb) = span(b);
    let (top, bottom) = (at.min(bt), ab.max(bb));
    let dy = (bottom - top) / rows as f64;
    let (mut area_a, mut area_b, mut inter) = (0.0, 0.0, 0.0);
    for k in 0..rows {
        let y = top + (k as f64 + 0.5) * dy;
        let in_a = y >= at && y < ab;
        let in_b = y >= bt && y < bb;
        if in_a {
            area_a += (ar - al) * dy;
        }
        if in_b {
            area_b += (br - bl) * dy;
        }
        if in_a && in_b {
            inter += (ar.min(br) - al.max(bl)).max(0.0) * dy;
        }
    }
    let union = area_a + area_b - inter;
    if union > 0.0 {
        inter / union
    } else {
        0.0
    }
}

fn random_pair(r: &mut ChaCha8Rng) -> (BoundingBox, BoundingBox) {
    let a = bb(
        r.random_range(50.0..150.0),
        r.random_range(50.0..150.0),
        r.random_range(5.0..80.0),
        r.random_range(5.0..80.0),
    );
    let b = bb(
        a.u + r.random_range(-60.0..60.0),
        a.v + r.random_range(-60.0..60.0),
        r.random_range(5.0..80.0),
        r.random_range(5.0..80.0),
    );
    (a, b)
}

#[test]
fn jaccard_matches_raster_oracle() {
    let mut r = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..1000 {
        let (a, b) = random_pair(&mut r);
        let oracle = raster_jaccard(&a, &b, 20_000);
        assert!((jaccard(&a, &b) - oracle).abs() < 1e-3, "{a:?} {b:?}");
    }
    let (a, b) = (bb(0.0, 0.0, 2.0, 2.0), bb(1.0, 0.0, 2.0, 2.0));
    assert!((raster_jaccard(&a, &b, 20_000) - 1.0 / 3.0).abs() < 1e-3);
    assert!((jaccard(&a, &b) - 1.0 / 3.0).abs() < 1e-12);
}

#[test]
fn success_boundaries_are_inclusive() {
    assert!(success(0.5, 50.0));
    assert!(!success(0.49, 0.0));
    assert!(!success(1.0, 51.0));
    assert!(!success(0.5f64.next_down(), 50.0));
    assert!(!success(0.5, 50.0f64.next_up()));
    assert!(success(1.0, 0.0));
}

#[test]
fn distance_matches_arithmetic_oracle() {
    let mut r = ChaCha8Rng::seed_from_u64(10);
    for _ in 0..1000 {
        let (a, b) = random_pair(&mut r);
        let oracle = [(a.u, b.u), (a.v, b.v), (a.h, b.h), (a.w, b.w)]
            .iter()
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt();
        assert!((gt_distance(&a, &b) - oracle).abs() < 1e-12);
    }
    assert_eq!(
        gt_distance(&bb(0.0, 0.0, 3.0, 4.0), &bb(0.0, 0.0, 0.0, 0.0)),
        5.0
    );
}

#[test]
fn summary_matches_hand_computed_averages() {
    let gt = bb(100.0, 100.0, 40.0, 40.0);
    let ests = [
        gt,                        // J 1, d 0
        gt.translated(20.0, 0.0),  // J 20*40/(2*1600-800) = 1/3, d 20
        gt.translated(100.0, 0.0), // J 0, d 100
        gt.translated(0.0, 8.0),   // J 32/48 = 2/3, d 8
    ];
    let evals: Vec<FrameEval> = ests
        .iter()
        .enumerate()
        .map(|(i, e)| FrameEval::new(i as u64, e, &gt))
        .collect();
    let s = &summarize([("run", evals.as_slice())]).unwrap()[0];
    assert_eq!(s.frames, 4);
    assert!((s.mean_jaccard - (1.0 + 1.0 / 3.0 + 0.0 + 2.0 / 3.0) / 4.0).abs() < 1e-12);
    assert!((s.mean_dist - 128.0 / 4.0).abs() < 1e-12);
    assert_eq!(s.success_rate, 0.5);
    let empty: [FrameEval; 0] = [];
    assert!(summarize([("none", empty.as_slice())]).is_err());
}

proptest! {
    #[test]
    fn jaccard_symmetric_and_reflexive(seed in any::<u64>()) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let (a, b) = random_pair(&mut r);
        prop_assert_eq!(jaccard(&a, &b), jaccard(&b, &a));
        prop_assert!((jaccard(&a, &a) - 1.0).abs() < 1e-12);
        let j = jaccard(&a, &b);
        prop_assert!((0.0..=1.0).contains(&j));
    }

    #[test]
    fn jaccard_shrinks_as_box_moves_away(seed in any::<u64>(), dx in -1.0f64..1.0, dy in -1.0f64..1.0, steps in 1usize..40) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let (a, _) = random_pair(&mut r);
        let norm = (dx * dx + dy * dy).sqrt().max(1e-3);
        let (ux, uy) = (dx / norm, dy / norm);
        let mut prev = jaccard(&a, &a);
        for k in 1..=steps {
            let j = jaccard(&a, &a.translated(ux * k as f64 * 2.0, uy * k as f64 * 2.0));
            prop_assert!(j <= prev + 1e-12);
            prev = j;
        }
    }

    #[test]
    fn success_region_is_product_of_half_intervals(j in 0.0f64..1.0, d in 0.0f64..200.0) {
        prop_assert_eq!(success(j, d), j >= 0.5 && d <= 50.0);
    }
}
