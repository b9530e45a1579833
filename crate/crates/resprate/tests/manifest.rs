use std::path::Path;

use resp_core::dataset::{ExtractConfig, FLAG_ADR, INPUT_CHANNELS};
use resp_core::signal::{SampledSignal, RESP_LEN};
use resp_core::synth::{generate, ActivitySegment, Profile, SynthConfig};
use resprate::manifest::{assemble_windows, load_manifest, Manifest, SignalRef, SubjectEntry};
use resprate::signal_io::write_signal;
use resprate::synth_io::{write_synth, SignalFormat, SynthPlan};
use resprate::windows_io::{read_windows, write_windows};
use resprate::Error;

fn plan(n: usize, format: SignalFormat) -> SynthPlan {
    let subjects = (0..n)
        .map(|i| SynthConfig {
            duration_s: 80.0,
            rr_profile: Profile::constant(10.0 + 4.0 * i as f64),
            seed: i as u64,
            activities: vec![
                ActivitySegment { start_s: 0.0, end_s: 50.0, label: "sitting".into() },
                ActivitySegment { start_s: 50.0, end_s: 80.0, label: "walking".into() },
            ],
            ..SynthConfig::default()
        })
        .collect();
    SynthPlan { subjects, format }
}

#[test]
fn synthetic_manifest_assembles_in_channel_order() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_synth(&plan(3, SignalFormat::Binary), dir.path()).unwrap();
    let m = load_manifest(&path).unwrap();
    let (batch, report) = assemble_windows(&m, &ExtractConfig::default()).unwrap();
    assert_eq!(INPUT_CHANNELS, ["edr_rrint", "edr_ramp", "adr"]);
    assert_eq!(batch.inputs.shape(), &[batch.len(), 3, RESP_LEN]);
    assert_eq!(report.windows.total, 3 * 25);
    assert_eq!(batch.len(), report.windows.kept);
    assert!(batch.inputs.is_finite());

    let order: Vec<(&str, f64)> = batch.meta.iter().map(|w| (w.subject.as_str(), w.start_s)).collect();
    let mut sorted = order.clone();
    sorted.sort_by(|a, b| a.0.cmp(b.0).then(a.1.total_cmp(&b.1)));
    assert_eq!(order, sorted);
    // majority label: window [16, 48) is mostly sitting, [24, 56) too, [40, 72) walking
    let label = |start: f64| batch.meta.iter().find(|w| w.start_s == start).unwrap().activity.clone();
    assert_eq!(label(16.0).as_deref(), Some("sitting"));
    assert_eq!(label(40.0).as_deref(), Some("walking"));

    let (again, _) = assemble_windows(&load_manifest(&path).unwrap(), &ExtractConfig::default()).unwrap();
    assert_eq!(again, batch);
}

#[test]
fn csv_and_binary_signals_give_the_same_windows() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let ma = load_manifest(&write_synth(&plan(1, SignalFormat::Binary), a.path()).unwrap()).unwrap();
    let mb = load_manifest(&write_synth(&plan(1, SignalFormat::Csv), b.path()).unwrap()).unwrap();
    let (wa, _) = assemble_windows(&ma, &ExtractConfig::default()).unwrap();
    let (wb, _) = assemble_windows(&mb, &ExtractConfig::default()).unwrap();
    assert_eq!(wa.len(), wb.len());
    let worst = wa.inputs.data().iter().zip(wb.inputs.data()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    assert!(worst < 1e-6, "{worst}");
}

#[test]
fn windows_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let m = load_manifest(&write_synth(&plan(2, SignalFormat::Binary), dir.path()).unwrap()).unwrap();
    let (batch, _) = assemble_windows(&m, &ExtractConfig { include_raw: true, ..Default::default() }).unwrap();
    let p = dir.path().join("windows.bin");
    write_windows(&p, &batch).unwrap();
    let once = read_windows(&p).unwrap();
    let q = dir.path().join("again.bin");
    write_windows(&q, &once).unwrap();
    assert_eq!(std::fs::read(&p).unwrap(), std::fs::read(&q).unwrap());
    assert_eq!(read_windows(&q).unwrap(), once);
    assert_eq!(once.meta, batch.meta);
    assert!(once.raw.is_some());
}

#[test]
fn missing_file_error_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_synth(&plan(1, SignalFormat::Binary), dir.path()).unwrap();
    std::fs::remove_file(dir.path().join("s00_accel.rsp")).unwrap();
    let err = load_manifest(&path).unwrap_err();
    assert!(matches!(err, Error::Io { .. }));
    assert!(err.to_string().contains("s00_accel.rsp"), "{err}");
}

#[test]
fn manifest_structure_is_checked() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_synth(&plan(2, SignalFormat::Binary), dir.path()).unwrap();
    let original = std::fs::read_to_string(&path).unwrap();
    let edit = |f: &dyn Fn(&mut Manifest)| {
        let mut m: Manifest = serde_json::from_str(&original).unwrap();
        f(&mut m);
        std::fs::write(&path, serde_json::to_string(&m).unwrap()).unwrap();
        load_manifest(&path)
    };
    assert!(edit(&|m| m.version = "other/9".into()).is_err());
    assert!(edit(&|m| m.subjects[0].activities[1].start_s = 40.0).is_err());
    assert!(edit(&|m| m.subjects[1].id = "s00".into()).is_err());
    assert!(edit(&|m| m.exclude = vec!["s99".into()]).is_err());
    let m = edit(&|m| m.exclude = vec!["s00".into()]).unwrap();
    let (batch, report) = assemble_windows(&m, &ExtractConfig::default()).unwrap();
    assert_eq!(report.excluded_subjects, ["s00"]);
    assert!(batch.meta.iter().all(|w| w.subject == "s01"));
}

#[test]
fn declared_rate_must_match_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_synth(&plan(1, SignalFormat::Csv), dir.path()).unwrap();
    let mut m = load_manifest(&path).unwrap();
    m.subjects[0].ecg.fs = 500.0;
    let err = assemble_windows(&m, &ExtractConfig::default()).unwrap_err();
    assert!(matches!(err, Error::FsMismatch { .. }), "{err}");
}

#[test]
fn silent_accelerometer_is_flagged_but_kept() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = SynthConfig { duration_s: 80.0, seed: 5, ..SynthConfig::default() };
    let rec = generate(&cfg).unwrap();
    let zeros = vec![vec![0.0; rec.accel.len()]; 3];
    let accel = SampledSignal::new(zeros, rec.accel.labels().to_vec(), cfg.fs, 0.0).unwrap();
    let root = dir.path();
    write_signal(&root.join("ecg.rsp"), &rec.ecg).unwrap();
    write_signal(&root.join("accel.rsp"), &accel).unwrap();
    write_signal(&root.join("resp.rsp"), &rec.resp).unwrap();
    let signal = |p: &str| SignalRef { path: Path::new(p).to_path_buf(), fs: cfg.fs };
    let m = Manifest {
        root: root.to_path_buf(),
        ..Manifest::new(vec![SubjectEntry {
            id: "flat".into(),
            ecg: signal("ecg.rsp"),
            accel: signal("accel.rsp"),
            resp: Some(signal("resp.rsp")),
            truth: None,
            activities: vec![],
        }])
    };
    m.validate().unwrap();
    let (batch, report) = assemble_windows(&m, &ExtractConfig::default()).unwrap();
    assert_eq!(batch.len(), report.windows.total - report.windows.excluded_no_reference);
    assert_eq!(report.windows.per_channel[2], batch.len());
    assert!(batch.flags.iter().all(|f| f & FLAG_ADR != 0));
    for i in 0..batch.len() {
        let adr = &batch.inputs.data()[(i * 3 + 2) * RESP_LEN..(i * 3 + 3) * RESP_LEN];
        assert!(adr.iter().all(|&v| v == 0.0));
    }
}
