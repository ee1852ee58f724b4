mod common;

use common::*;
use habdf_core::expert::{
    chi2_xi, local_weight, mahalanobis, mahalanobis_diag, Expert, ExpertConfig,
};
use habdf_core::filter::{build_track_model, initial_covariance, TrackState};
use habdf_core::{BoundingBox, DMatrix, DVector};
use proptest::prelude::*;

/// Gamma function at half-integers and integers.
fn gamma_half(k: u32) -> f64 {
    // Gamma(k/2) by the recursion Gamma(x + 1) = x Gamma(x).
    let (mut g, mut x) = if k.is_multiple_of(2) {
        (1.0, 1.0)
    } else {
        (std::f64::consts::PI.sqrt(), 0.5)
    };
    while x < f64::from(k) / 2.0 - 1e-12 {
        g *= x;
        x += 1.0;
    }
    g
}

/// CDF of the distance `M` whose square is chi-square with `k` degrees of
/// freedom, by Simpson integration of its density.
fn distance_cdf(k: u32, x: f64) -> f64 {
    let norm = 2.0 / (2f64.powf(f64::from(k) / 2.0) * gamma_half(k));
    let f = |t: f64| norm * t.powi(k as i32 - 1) * (-t * t / 2.0).exp();
    let n = 20_000;
    let h = x / n as f64;
    let mut s = f(0.0) + f(x);
    for i in 1..n {
        s += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

fn distance_quantile(k: u32, p: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, 20.0);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if distance_cdf(k, mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn chi2_offsets_match_integration_oracle() {
    for (dof, conf, frozen) in [(4, 0.95, 3.0802), (1, 0.6827, 1.0000), (2, 0.95, 2.4477)] {
        let oracle = distance_quantile(dof, conf);
        let xi = chi2_xi(dof, conf).unwrap();
        assert!(
            (xi - oracle).abs() < 1e-6,
            "dof {dof}: {xi} vs oracle {oracle}"
        );
        assert!((xi - frozen).abs() < 1e-4, "dof {dof}: {xi} vs {frozen}");
    }
}

#[test]
fn correlated_distance_matches_inverse_oracle() {
    let c = vec![vec![2.0, 1.0], vec![1.0, 2.0]];
    let q = vec![1.0, 1.0];
    let ci = inv(&c);
    let oracle = q
        .iter()
        .zip(mulv(&ci, &q))
        .map(|(a, b)| a * b)
        .sum::<f64>()
        .sqrt();
    let md = mahalanobis(&from_v(&q), &DVector::zeros(2), &from_m(&c)).unwrap();
    assert!((md - oracle).abs() < 1e-12);
    assert!((md - 0.81650).abs() < 1e-4);
}

#[test]
fn random_distances_match_inverse_oracle() {
    let mut r = rng(3);
    for n in 1..7 {
        for _ in 0..20 {
            let c = rand_spd(&mut r, n, 1.0, 0.05);
            let q: V = (0..n).map(|_| 3.0 * gaussian(&mut r)).collect();
            let oracle = q
                .iter()
                .zip(mulv(&inv(&c), &q))
                .map(|(a, b)| a * b)
                .sum::<f64>()
                .sqrt();
            let md = mahalanobis(&from_v(&q), &DVector::zeros(n), &from_m(&c)).unwrap();
            assert!((md - oracle).abs() < 1e-9 * oracle.max(1.0));
        }
    }
}

#[test]
fn sigmoid_numeric_values() {
    let direct = 1.0 / (1.0 + 3.0802f64.exp());
    assert!((local_weight(0.0, 3.0802) - direct).abs() < 1e-15);
    assert!((local_weight(0.0, 3.0802) - 0.0439).abs() < 1e-4);
    assert!(local_weight(3.08 + 10.0, 3.08) > 0.99);
    for xi in [0.1, 1.0, 3.0802, 25.0] {
        assert!((local_weight(xi, xi) - 0.5).abs() < 1e-12);
        assert!((local_weight(xi + 3f64.ln(), xi) - 0.75).abs() < 1e-12);
    }
}

/// An expert fed data generated by its own model sees squared distances that
/// are chi-square with four degrees of freedom, so about 5% exceed `xi`.
fn flagged_fraction(seed: u64, frames: usize) -> f64 {
    let (accel_var, meas_var) = (0.5, 4.0);
    let model = build_track_model(1.0, accel_var, meas_var).unwrap();
    let mut expert = Expert::new(model.clone(), initial_covariance(&model, 1.0), 5).unwrap();
    let config = ExpertConfig::default();
    let mut r = rng(seed);
    let mut truth =
        TrackState::from_box(&BoundingBox::new(100.0, 100.0, 50.0, 40.0).unwrap()).to_vector();
    let (mut flagged, mut scored) = (0usize, 0usize);
    // The first measurement initializes the filter; skip a short transient.
    let burn_in = 20;
    for k in 0..frames + burn_in {
        let a: V = (0..4)
            .map(|_| accel_var.sqrt() * gaussian(&mut r))
            .collect();
        for axis in 0..4 {
            truth[axis] += truth[axis + 4] + 0.5 * a[axis];
            truth[axis + 4] += a[axis];
        }
        let y = DVector::from_fn(4, |i, _| truth[i] + meas_var.sqrt() * gaussian(&mut r));
        let report = expert.step(k as u64, Some(&y), &config).unwrap().unwrap();
        if k >= burn_in {
            scored += 1;
            if report.md > config.xi {
                flagged += 1;
            }
        }
    }
    flagged as f64 / scored as f64
}

#[test]
fn nominal_outlier_rate_is_calibrated() {
    // 100 sequences of 100 scored frames each.
    let rates: Vec<f64> = (0..100).map(|s| flagged_fraction(1000 + s, 100)).collect();
    let mean = rates.iter().sum::<f64>() / rates.len() as f64;
    assert!((mean - 0.05).abs() <= 0.02, "pooled rate {mean}");
}

fn rotation(seed: u64, n: usize) -> DMatrix<f64> {
    let mut r = rng(seed);
    let m = from_m(&rand_m(&mut r, n, n, 1.0));
    m.qr().q()
}

proptest! {
    #[test]
    fn weight_is_monotone_and_bounded(a in 0.0f64..40.0, b in 0.0f64..40.0, xi in 0.1f64..10.0) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let (wl, wh) = (local_weight(lo, xi), local_weight(hi, xi));
        prop_assert!(wl > 0.0 && wh < 1.0);
        prop_assert!(wl <= wh);
        if hi - lo > 1e-6 && hi - xi < 30.0 {
            prop_assert!(wl < wh);
        }
    }

    #[test]
    fn per_coordinate_distance_bounds_exact(q in prop::collection::vec(-50.0f64..50.0, 1..8), seed in any::<u64>()) {
        let n = q.len();
        let mut r = rng(seed);
        let diag: Vec<f64> = (0..n).map(|_| 0.1 + 10.0 * gaussian(&mut r).abs()).collect();
        let y = DVector::from_vec(q.clone());
        let mu = DVector::zeros(n);
        let c = DMatrix::from_diagonal(&DVector::from_vec(diag.clone()));
        let exact = mahalanobis(&y, &mu, &c).unwrap();
        let approx = mahalanobis_diag(&y, &mu, &DVector::from_vec(diag.clone())).unwrap();
        prop_assert!(approx >= exact - 1e-9 * exact.max(1.0));

        // One nonzero component: the two agree.
        let mut single = DVector::zeros(n);
        single[0] = q[0];
        let e1 = mahalanobis(&single, &mu, &c).unwrap();
        let a1 = mahalanobis_diag(&single, &mu, &DVector::from_vec(diag)).unwrap();
        prop_assert!((e1 - a1).abs() < 1e-9 * e1.max(1.0));
    }

    #[test]
    fn distance_is_rotation_invariant(seed in any::<u64>(), n in 1usize..7) {
        let mut r = rng(seed);
        let c = from_m(&rand_spd(&mut r, n, 1.0, 0.1));
        let q = DVector::from_fn(n, |_, _| 5.0 * gaussian(&mut r));
        let rot = rotation(seed.wrapping_add(1), n);
        let md = mahalanobis(&q, &DVector::zeros(n), &c).unwrap();
        let c_rot = &rot * &c * rot.transpose();
        let c_rot = (&c_rot + c_rot.transpose()) * 0.5;
        let md_rot = mahalanobis(&(&rot * &q), &DVector::zeros(n), &c_rot).unwrap();
        prop_assert!((md - md_rot).abs() < 1e-9 * md.max(1.0));
    }
}
