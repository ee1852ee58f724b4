#![allow(dead_code)]

use std::path::{Path, PathBuf};

use habdf_cli::records::{write_box_rows, write_tracks, TrackRecord};
use habdf_core::BoundingBox;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub const FIXTURE_FRAMES: u64 = 200;
/// First frame on which the third detector repeats its previous box.
pub const FREEZE_AT: u64 = 100;
pub const DETECTORS: [&str; 3] = ["det_a", "det_b", "det_frozen"];

pub fn crate_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

pub fn fixture(name: &str) -> PathBuf {
    crate_dir().join("fixtures").join(name)
}

pub fn scenario(name: &str) -> PathBuf {
    crate_dir().join("scenarios").join(name)
}

/// Target moving about 3 px/frame to the right while bobbing vertically.
pub fn fixture_truth(frame: u64) -> BoundingBox {
    let t = frame as f64;
    BoundingBox {
        u: 100.0 + 3.0 * t,
        v: 240.0 + 30.0 * (2.0 * std::f64::consts::PI * t / 120.0).sin(),
        h: 80.0 + 4.0 * (2.0 * std::f64::consts::PI * t / 90.0).cos(),
        w: 50.0,
    }
}

/// Three noisy detectors on the same target; the last one stops updating at
/// `FREEZE_AT` and keeps reporting its previous box.
pub fn frozen_fixture() -> (Vec<TrackRecord>, Vec<(u64, BoundingBox)>) {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let pos = Normal::new(0.0, 2.0).unwrap();
    let size = Normal::new(0.0, 1.0).unwrap();
    let mut records = Vec::new();
    let mut gt = Vec::new();
    let mut held: Option<BoundingBox> = None;
    for frame in 0..FIXTURE_FRAMES {
        let truth = fixture_truth(frame);
        gt.push((frame, truth));
        for (k, id) in DETECTORS.iter().enumerate() {
            let noisy = BoundingBox {
                u: truth.u + pos.sample(&mut rng),
                v: truth.v + pos.sample(&mut rng),
                h: truth.h + size.sample(&mut rng),
                w: truth.w + size.sample(&mut rng),
            };
            let b = if k == 2 {
                if frame < FREEZE_AT {
                    held = Some(noisy);
                }
                held.expect("held box set before freezing")
            } else {
                noisy
            };
            records.push(TrackRecord {
                frame,
                detector_id: id.to_string(),
                u: b.u,
                v: b.v,
                h: b.h,
                w: b.w,
                valid: true,
            });
        }
    }
    (records, gt)
}

pub fn write_frozen_fixture(dir: &Path) -> (PathBuf, PathBuf) {
    let (records, gt) = frozen_fixture();
    let tracks = dir.join("frozen_tracks.csv");
    let truth = dir.join("frozen_gt.csv");
    write_tracks(&tracks, &records).unwrap();
    write_box_rows(&truth, &gt).unwrap();
    (tracks, truth)
}

/// Mean of a column of `fuse_weights.csv` per detector over `[start, end)`.
pub fn mean_weight(weights_csv: &Path, column: &str, start: u64, end: u64) -> Vec<(String, f64)> {
    let mut reader = csv::Reader::from_path(weights_csv).unwrap();
    let headers = reader.headers().unwrap().clone();
    let col = headers.iter().position(|h| h == column).unwrap();
    let mut sums: Vec<(String, f64, usize)> = Vec::new();
    for rec in reader.records() {
        let rec = rec.unwrap();
        let frame: u64 = rec[0].parse().unwrap();
        if frame < start || frame >= end || rec[col].is_empty() {
            continue;
        }
        let v: f64 = rec[col].parse().unwrap();
        let id = rec[1].to_string();
        match sums.iter_mut().find(|(n, _, _)| *n == id) {
            Some(e) => {
                e.1 += v;
                e.2 += 1;
            }
            None => sums.push((id, v, 1)),
        }
    }
    sums.into_iter()
        .map(|(n, s, c)| (n, s / c as f64))
        .collect()
}
