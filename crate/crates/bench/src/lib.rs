//! Deterministic workloads shared by the benchmarks in `benches/`.

use habdf_core::{BoundingBox, DVector};

/// Boxes for `n` detectors on frame `k`: a target moving diagonally with a
/// small per-detector wobble, and the last detector offset far away every
/// tenth frame so the penalties see both regimes.
pub fn frame_boxes(n: usize, k: u64) -> Vec<Option<BoundingBox>> {
    let t = k as f64;
    (0..n)
        .map(|i| {
            let wobble = (0.7 * t + i as f64).sin() * 1.5;
            let jump = if i == n - 1 && k.is_multiple_of(10) {
                120.0
            } else {
                0.0
            };
            Some(BoundingBox {
                u: 100.0 + 2.0 * t + wobble + jump,
                v: 200.0 + t.sin() * 10.0 - wobble,
                h: 60.0 + wobble,
                w: 40.0 - wobble,
            })
        })
        .collect()
}

pub fn frame_measurements(n: usize, k: u64) -> Vec<Option<DVector<f64>>> {
    frame_boxes(n, k)
        .into_iter()
        .map(|b| b.map(|b| b.to_vector()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn workload_shape() {
        let boxes = frame_boxes(4, 10);
        assert_eq!(boxes.len(), 4);
        let last = boxes[3].unwrap();
        assert!(last.u - boxes[0].unwrap().u > 100.0);
        assert!(boxes.iter().all(|b| b.unwrap().validate().is_ok()));
    }
}
