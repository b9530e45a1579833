use std::path::Path;

use proptest::prelude::*;
use resp_core::breath::BreathAnnotation;
use resp_core::signal::SampledSignal;
use resprate::signal_io::{decode, encode, read_signal, write_signal};
use resprate::tables::{read_rates, write_rates, RateRow};

fn signal() -> impl Strategy<Value = SampledSignal> {
    (1usize..4, 1usize..40, 1.0f64..1000.0, -5.0f64..5.0).prop_flat_map(|(c, n, fs, t0)| {
        prop::collection::vec(prop::collection::vec(-1e6f64..1e6, n), c).prop_map(move |chans| {
            let labels = (0..chans.len()).map(|i| format!("ch{i}")).collect();
            SampledSignal::new(chans, labels, fs, t0).unwrap()
        })
    })
}

fn rows(with_breaths: bool) -> impl Strategy<Value = Vec<RateRow>> {
    let row = (
        prop::option::of(0.0f64..60.0),
        prop::collection::vec(0.01f64..1.0, 0..8),
        any::<u8>(),
        prop::option::of("[a-z][a-z0-9_]{0,6}"),
        prop::option::of("[a-z]{1,8}"),
    );
    prop::collection::vec(row, 0..12).prop_map(move |raw| {
        raw.into_iter()
            .enumerate()
            .map(|(i, (avg_rr, gaps, flags, subject, activity))| {
                let peaks = gaps.iter().scan(0.0, |t, g| {
                    *t += g * 8.0;
                    Some(*t)
                });
                RateRow {
                    window_id: i * 3,
                    avg_rr,
                    breaths: with_breaths.then(|| BreathAnnotation::from_peaks(peaks.collect())),
                    flags,
                    subject,
                    activity,
                }
            })
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn binary_signal_round_trip_is_exact(sig in signal()) {
        prop_assert_eq!(decode(Path::new("mem"), &encode(&sig)).unwrap(), sig);
    }

    #[test]
    fn rate_table_round_trip_is_exact(rows in any::<bool>().prop_flat_map(rows)) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rates.csv");
        write_rates(&path, &rows).unwrap();
        prop_assert_eq!(read_rates(&path).unwrap(), rows);
    }
}

#[test]
fn csv_signal_keeps_rate_and_values() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("x.csv");
    let x: Vec<f64> = (0..200).map(|i| (i as f64 * 0.37).sin()).collect();
    let sig = SampledSignal::single(x, "ecg", 250.0).unwrap();
    write_signal(&path, &sig).unwrap();
    let back = read_signal(&path, Some(250.0)).unwrap();
    assert!((back.fs() - 250.0).abs() < 1e-9);
    assert_eq!(back.labels(), ["ecg"]);
    for (a, b) in back.channel(0).iter().zip(sig.channel(0)) {
        assert!((a - b).abs() < 1e-12);
    }
    assert!(read_signal(&path, Some(500.0)).is_err());
}
