use habdf_cli::records::{fmt_f64, read_tracks, write_tracks, TrackRecord};
use proptest::prelude::*;

fn nine_digits(x: f64) -> f64 {
    format!("{x:.8e}").parse().unwrap()
}

fn value() -> impl Strategy<Value = f64> {
    prop_oneof![-1e6..1e6f64, (-1e-3..1e-3f64), (1.0..1e20f64), Just(0.0),]
}

proptest! {
    #[test]
    fn float_text_reads_back_rounded(x in value()) {
        let back: f64 = fmt_f64(x).parse().unwrap();
        prop_assert_eq!(back, nine_digits(x));
        // Rounding to nine digits moves by at most half a unit in the ninth place.
        prop_assert!((back - x).abs() <= 5e-9 * x.abs());
    }

    #[test]
    fn track_log_round_trips(rows in prop::collection::vec(
        (0u64..1000, 0usize..4, 0.0..2000.0f64, 0.0..2000.0f64, 0.0..500.0f64, 0.0..500.0f64, any::<bool>()),
        1..40,
    )) {
        let mut rows = rows;
        rows.sort_by_key(|r| r.0);
        let records: Vec<TrackRecord> = rows
            .iter()
            .map(|&(frame, id, u, v, h, w, valid)| TrackRecord {
                frame,
                detector_id: format!("d{id}"),
                u,
                v,
                h,
                w,
                valid,
            })
            .collect();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("log.csv");
        write_tracks(&path, &records).unwrap();
        let back = read_tracks(&path).unwrap();
        prop_assert_eq!(back.len(), records.len());
        for (a, b) in back.iter().zip(&records) {
            prop_assert_eq!((a.frame, &a.detector_id, a.valid), (b.frame, &b.detector_id, b.valid));
            for (x, y) in [(a.u, b.u), (a.v, b.v), (a.h, b.h), (a.w, b.w)] {
                prop_assert_eq!(x, nine_digits(y));
            }
        }
        // Writing what was read is a fixed point.
        let again = dir.path().join("again.csv");
        write_tracks(&again, &back).unwrap();
        prop_assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&again).unwrap());
    }
}

#[test]
fn missing_values_are_empty_fields() {
    assert_eq!(fmt_f64(f64::NAN), "");
    assert_eq!(fmt_f64(-0.0), "0");
    assert_eq!(fmt_f64(1e-7), "1e-7");
    assert_eq!(fmt_f64(2.5), "2.5");
}
