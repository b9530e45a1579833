//! Dataset manifests: which signal files make up each subject, their
//! sampling rates, activity labels and optional exact breath times.
//!
//! ```json
//! {
//!   "version": "resprate-manifest/1",
//!   "subjects": [{
//!     "id": "s00",
//!     "ecg":   {"path": "s00_ecg.csv",   "fs": 700.0},
//!     "accel": {"path": "s00_accel.csv", "fs": 700.0},
//!     "resp":  {"path": "s00_resp.csv",  "fs": 700.0},
//!     "truth": "s00_truth.json",
//!     "activities": [{"start_s": 0.0, "end_s": 64.0, "label": "sitting"}]
//!   }],
//!   "exclude": ["s06"]
//! }
//! ```
//!
//! Relative paths resolve against the manifest's directory. `resp`,
//! `truth`, `activities` and `exclude` are optional.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use resp_core::dataset::{extract_recording, ExclusionReport, ExtractConfig, Recording, WindowBatch};
use resp_core::synth::{ActivitySegment, Truth};
use serde::{Deserialize, Serialize};

use crate::error::{read_json, Error, Result};
use crate::signal_io::read_signal;

pub const MANIFEST_VERSION: &str = "resprate-manifest/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalRef {
    pub path: PathBuf,
    pub fs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectEntry {
    pub id: String,
    pub ecg: SignalRef,
    /// Three or more axes; the first three are used.
    pub accel: SignalRef,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resp: Option<SignalRef>,
    /// JSON file with `beat_times_s` and `breath_peak_times_s`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth: Option<PathBuf>,
    #[serde(default)]
    pub activities: Vec<ActivitySegment>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub subjects: Vec<SubjectEntry>,
    /// Subject ids to leave out of assembly.
    #[serde(default)]
    pub exclude: Vec<String>,
    /// Directory relative paths resolve against.
    #[serde(skip)]
    pub root: PathBuf,
}

impl Manifest {
    pub fn new(subjects: Vec<SubjectEntry>) -> Self {
        Self { version: MANIFEST_VERSION.into(), subjects, exclude: Vec::new(), root: PathBuf::new() }
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        self.root.join(p)
    }

    /// Structural checks plus existence of every referenced file.
    pub fn validate(&self) -> Result<()> {
        if self.version != MANIFEST_VERSION {
            return Err(Error::Manifest(format!("unrecognised version `{}` (expected `{MANIFEST_VERSION}`)", self.version)));
        }
        let mut ids = BTreeSet::new();
        for s in &self.subjects {
            if !ids.insert(s.id.as_str()) {
                return Err(Error::Manifest(format!("duplicate subject id `{}`", s.id)));
            }
            check_activities(&s.id, &s.activities)?;
            let signals = [Some(&s.ecg), Some(&s.accel), s.resp.as_ref()];
            for r in signals.into_iter().flatten() {
                if !(r.fs > 0.0 && r.fs.is_finite()) {
                    return Err(Error::Manifest(format!("subject `{}`: invalid fs {}", s.id, r.fs)));
                }
            }
            let files = signals.into_iter().flatten().map(|r| &r.path).chain(s.truth.as_ref());
            for f in files {
                let p = self.resolve(f);
                if !p.is_file() {
                    return Err(Error::io(&p, std::io::Error::new(std::io::ErrorKind::NotFound, "file not found")));
                }
            }
        }
        if let Some(x) = self.exclude.iter().find(|x| !ids.contains(x.as_str())) {
            return Err(Error::Manifest(format!("excluded subject `{x}` is not listed")));
        }
        Ok(())
    }

    /// Reads one subject's files.
    pub fn load_subject(&self, s: &SubjectEntry) -> Result<Recording> {
        let ecg = read_signal(&self.resolve(&s.ecg.path), Some(s.ecg.fs))?;
        let accel = read_signal(&self.resolve(&s.accel.path), Some(s.accel.fs))?;
        if accel.n_channels() < 3 {
            return Err(Error::format(self.resolve(&s.accel.path), "accelerometer needs three axes"));
        }
        let resp = s.resp.as_ref().map(|r| read_signal(&self.resolve(&r.path), Some(r.fs))).transpose()?;
        let truth: Option<Truth> = s.truth.as_ref().map(|t| read_json(&self.resolve(t))).transpose()?;
        Ok(Recording {
            subject: s.id.clone(),
            ecg,
            accel,
            resp,
            breath_peaks_s: truth.map(|t| t.breath_peak_times_s),
            activities: s.activities.clone(),
        })
    }
}

fn check_activities(id: &str, segments: &[ActivitySegment]) -> Result<()> {
    let mut sorted: Vec<&ActivitySegment> = segments.iter().collect();
    sorted.sort_by(|a, b| a.start_s.total_cmp(&b.start_s));
    for s in &sorted {
        if !(s.start_s < s.end_s) {
            return Err(Error::Manifest(format!("subject `{id}`: empty activity segment `{}`", s.label)));
        }
    }
    for w in sorted.windows(2) {
        if w[1].start_s < w[0].end_s {
            return Err(Error::Manifest(format!(
                "subject `{id}`: activities `{}` and `{}` overlap",
                w[0].label, w[1].label
            )));
        }
    }
    Ok(())
}

pub fn load_manifest(path: &Path) -> Result<Manifest> {
    let mut m: Manifest = read_json(path)?;
    m.root = path.parent().map(Path::to_path_buf).unwrap_or_default();
    m.validate()?;
    Ok(m)
}

/// Window accounting for a whole manifest.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AssemblyReport {
    pub windows: ExclusionReport,
    pub subjects: Vec<(String, ExclusionReport)>,
    pub excluded_subjects: Vec<String>,
}

/// Extracts every non-excluded subject, ordered by subject id and then by
/// window start.
pub fn assemble_windows(m: &Manifest, cfg: &ExtractConfig) -> Result<(WindowBatch, AssemblyReport)> {
    let mut subjects: Vec<&SubjectEntry> = m.subjects.iter().collect();
    subjects.sort_by(|a, b| a.id.cmp(&b.id));
    let mut report = AssemblyReport::default();
    let mut parts = Vec::new();
    for s in subjects {
        if m.exclude.contains(&s.id) {
            report.excluded_subjects.push(s.id.clone());
            continue;
        }
        let (batch, r) = extract_recording(&m.load_subject(s)?, cfg)?;
        report.windows.merge(&r);
        report.subjects.push((s.id.clone(), r));
        parts.push(batch);
    }
    let batch = if parts.is_empty() {
        WindowBatch::empty(cfg.include_raw, m.subjects.iter().any(|s| s.resp.is_some()))
    } else {
        WindowBatch::concat(&parts)?
    };
    Ok((batch, report))
}
