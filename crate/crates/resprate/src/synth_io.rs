//! Writes generated subjects to disk together with a manifest.

use std::path::{Path, PathBuf};

use resp_core::synth::{generate, SynthConfig};
use serde::{Deserialize, Serialize};

use crate::error::{write_json, Result};
use crate::manifest::{Manifest, SignalRef, SubjectEntry};
use crate::signal_io::write_signal;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalFormat {
    Csv,
    #[default]
    Binary,
}

impl SignalFormat {
    fn extension(self) -> &'static str {
        match self {
            SignalFormat::Csv => "csv",
            SignalFormat::Binary => "rsp",
        }
    }
}

/// Input of the `synth` command: one generator configuration per subject.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthPlan {
    pub subjects: Vec<SynthConfig>,
    #[serde(default)]
    pub format: SignalFormat,
}

pub const MANIFEST_FILE: &str = "manifest.json";

/// Subject id for the `i`-th configuration.
pub fn subject_id(i: usize) -> String {
    format!("s{i:02}")
}

/// Generates every subject into `dir` and returns the manifest path.
pub fn write_synth(plan: &SynthPlan, dir: &Path) -> Result<PathBuf> {
    let ext = plan.format.extension();
    let mut entries = Vec::with_capacity(plan.subjects.len());
    for (i, cfg) in plan.subjects.iter().enumerate() {
        let id = subject_id(i);
        let rec = generate(cfg)?;
        let file = |kind: &str| PathBuf::from(format!("{id}_{kind}.{ext}"));
        for (kind, sig) in [("ecg", &rec.ecg), ("accel", &rec.accel), ("resp", &rec.resp)] {
            write_signal(&dir.join(file(kind)), sig)?;
        }
        let truth = PathBuf::from(format!("{id}_truth.json"));
        write_json(&dir.join(&truth), &rec.truth)?;
        let signal = |kind: &str| SignalRef { path: file(kind), fs: cfg.fs };
        let (ecg, accel, resp) = (signal("ecg"), signal("accel"), signal("resp"));
        entries.push(SubjectEntry {
            id,
            ecg,
            accel,
            resp: Some(resp),
            truth: Some(truth),
            activities: cfg.activities.clone(),
        });
    }
    let path = dir.join(MANIFEST_FILE);
    write_json(&path, &Manifest::new(entries))?;
    Ok(path)
}
