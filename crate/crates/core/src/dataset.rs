//! Windowed network inputs and targets.
//!
//! Each 32 s window (2 s stride) of a recording becomes three 128-sample
//! respiration surrogates `[EDR-RRint, EDR-Ramp, ADR]`, optionally the raw
//! `[ECG, accel PC1, accel PC2]` at 2048 samples, and, when a reference is
//! available, the z-normalised 4 Hz reference waveform and the window's
//! average respiration rate.

use alloc::string::String;
use alloc::vec::Vec;
#[allow(unused_imports)] // unused when std is linked: its inherent float methods take precedence
use num_traits::Float;

use crate::adr::{adr_prepare, AdrConfig, Pca3};
use crate::breath::{avg_rr, count_breaths};
use crate::ecg_resp::{detect_r_peaks_with, edr_ramp_with, edr_rrint_with, DetectorConfig, EdrConfig, RPeakSeries, Surrogate};
use crate::model::{InputKind, IN_CHANNELS};
use crate::nn::Tensor;
use crate::signal::{resample, resample_to_rate, window_spans, znorm, SampledSignal, TimeSpan, RAW_LEN, RESP_FS, RESP_LEN, STRIDE_S, WINDOW_S};
use crate::synth::{generate, ActivitySegment, SynthConfig};
use crate::{Error, Result};

pub const INPUT_CHANNELS: [&str; 3] = ["edr_rrint", "edr_ramp", "adr"];
pub const RAW_CHANNELS: [&str; 3] = ["ecg", "accel_pc1", "accel_pc2"];

/// Flag bits: the channel was degenerate (or lacked beats) and is zeros.
pub const FLAG_RRINT: u8 = 1;
pub const FLAG_RAMP: u8 = 2;
pub const FLAG_ADR: u8 = 4;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct WindowMeta {
    pub subject: String,
    pub start_s: f64,
    pub activity: Option<String>,
}

/// A set of windows laid out as tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowBatch {
    /// `(N, 3, 128)`.
    pub inputs: Tensor,
    /// `(N, 3, 2048)`.
    pub raw: Option<Tensor>,
    /// `(N, 1, 128)` reference respiration.
    pub waveform: Option<Tensor>,
    /// `(N, 1)` average respiration rate, breaths per minute.
    pub rate: Option<Tensor>,
    pub flags: Vec<u8>,
    pub meta: Vec<WindowMeta>,
}

impl WindowBatch {
    pub fn empty(with_raw: bool, with_targets: bool) -> Self {
        Self {
            inputs: Tensor::zeros(&[0, IN_CHANNELS, RESP_LEN]),
            raw: with_raw.then(|| Tensor::zeros(&[0, IN_CHANNELS, RAW_LEN])),
            waveform: with_targets.then(|| Tensor::zeros(&[0, 1, RESP_LEN])),
            rate: with_targets.then(|| Tensor::zeros(&[0, 1])),
            flags: Vec::new(),
            meta: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.flags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flags.is_empty()
    }

    /// Checks that every tensor agrees on the window count and shape.
    pub fn validate(&self) -> Result<()> {
        let n = self.len();
        let expect = |t: &Tensor, shape: &[usize]| -> Result<()> {
            if t.shape() != shape {
                return Err(Error::Shape { expected: alloc::format!("{shape:?}"), got: alloc::format!("{:?}", t.shape()) });
            }
            Ok(())
        };
        expect(&self.inputs, &[n, IN_CHANNELS, RESP_LEN])?;
        if let Some(r) = &self.raw {
            expect(r, &[n, IN_CHANNELS, RAW_LEN])?;
        }
        if let Some(w) = &self.waveform {
            expect(w, &[n, 1, RESP_LEN])?;
        }
        if let Some(r) = &self.rate {
            expect(r, &[n, 1])?;
        }
        if self.meta.len() != n {
            return Err(Error::LengthMismatch(self.meta.len(), n));
        }
        Ok(())
    }

    /// Network input for a configuration's input kind.
    pub fn input(&self, kind: InputKind) -> Result<&Tensor> {
        match kind {
            InputKind::Resp => Ok(&self.inputs),
            InputKind::Raw => self.raw.as_ref().ok_or(Error::MissingTargets("raw inputs were not extracted")),
        }
    }

    pub fn select(&self, rows: &[usize]) -> Self {
        Self {
            inputs: self.inputs.batch_rows(rows),
            raw: self.raw.as_ref().map(|t| t.batch_rows(rows)),
            waveform: self.waveform.as_ref().map(|t| t.batch_rows(rows)),
            rate: self.rate.as_ref().map(|t| t.batch_rows(rows)),
            flags: rows.iter().map(|&r| self.flags[r]).collect(),
            meta: rows.iter().map(|&r| self.meta[r].clone()).collect(),
        }
    }

    /// Stacks batches; optional parts survive only if every batch has them.
    pub fn concat(parts: &[WindowBatch]) -> Result<Self> {
        let Some(first) = parts.first() else {
            return Ok(Self::empty(false, false));
        };
        let cat = |get: &dyn Fn(&WindowBatch) -> Option<&Tensor>, inner: &[usize]| -> Result<Option<Tensor>> {
            if parts.iter().any(|p| get(p).is_none()) {
                return Ok(None);
            }
            let mut data = Vec::new();
            let mut n = 0;
            for p in parts {
                let t = get(p).unwrap();
                n += t.shape()[0];
                data.extend_from_slice(t.data());
            }
            let mut shape = alloc::vec![n];
            shape.extend_from_slice(inner);
            Ok(Some(Tensor::new(&shape, data)?))
        };
        let out = Self {
            inputs: cat(&|p| Some(&p.inputs), &first.inputs.shape()[1..])?.unwrap(),
            raw: cat(&|p| p.raw.as_ref(), &[IN_CHANNELS, RAW_LEN])?,
            waveform: cat(&|p| p.waveform.as_ref(), &[1, RESP_LEN])?,
            rate: cat(&|p| p.rate.as_ref(), &[1])?,
            flags: parts.iter().flat_map(|p| p.flags.iter().copied()).collect(),
            meta: parts.iter().flat_map(|p| p.meta.iter().cloned()).collect(),
        };
        out.validate()?;
        Ok(out)
    }

    pub fn rate_targets(&self) -> Option<&[f64]> {
        self.rate.as_ref().map(|t| t.data())
    }

    /// Reference waveform of window `i`.
    pub fn waveform_row(&self, i: usize) -> Option<&[f64]> {
        self.waveform.as_ref().map(|t| &t.data()[i * RESP_LEN..(i + 1) * RESP_LEN])
    }
}

/// What to do with windows whose surrogate channels were zero-filled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum FlaggedPolicy {
    /// Keep them (zeros plus flag).
    #[default]
    Keep,
    /// Drop them.
    Exclude,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtractConfig {
    pub window_s: f64,
    pub stride_s: f64,
    pub detector: DetectorConfig,
    pub edr: EdrConfig,
    pub adr: AdrConfig,
    pub include_raw: bool,
    pub policy: FlaggedPolicy,
}

impl Default for ExtractConfig {
    fn default() -> Self {
        Self {
            window_s: WINDOW_S,
            stride_s: STRIDE_S,
            detector: DetectorConfig::default(),
            edr: EdrConfig::default(),
            adr: AdrConfig::default(),
            include_raw: false,
            policy: FlaggedPolicy::Keep,
        }
    }
}

/// Window accounting for one extraction run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ExclusionReport {
    pub total: usize,
    pub kept: usize,
    /// Windows with at least one zero-filled channel.
    pub flagged: usize,
    /// Flagged windows dropped under [`FlaggedPolicy::Exclude`].
    pub excluded_flagged: usize,
    /// Windows dropped because their reference had fewer than two breaths.
    pub excluded_no_reference: usize,
    /// Zero-filled counts per channel `[rrint, ramp, adr]`.
    pub per_channel: [usize; 3],
}

impl ExclusionReport {
    pub fn merge(&mut self, other: &ExclusionReport) {
        self.total += other.total;
        self.kept += other.kept;
        self.flagged += other.flagged;
        self.excluded_flagged += other.excluded_flagged;
        self.excluded_no_reference += other.excluded_no_reference;
        for k in 0..3 {
            self.per_channel[k] += other.per_channel[k];
        }
    }
}

/// One subject's synchronised signals.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    pub subject: String,
    pub ecg: SampledSignal,
    /// At least three axes; the first three are used.
    pub accel: SampledSignal,
    /// Reference respiration, if recorded.
    pub resp: Option<SampledSignal>,
    /// Exact breath-peak times; when absent, window rates are counted on
    /// the reference waveform.
    pub breath_peaks_s: Option<Vec<f64>>,
    pub activities: Vec<ActivitySegment>,
}

/// Label covering most of `span`, if any.
pub fn majority_activity(segments: &[ActivitySegment], span: &TimeSpan) -> Option<String> {
    let mut best: Option<(&str, f64)> = None;
    let mut totals: Vec<(&str, f64)> = Vec::new();
    for s in segments {
        let overlap = s.end_s.min(span.end_s()) - s.start_s.max(span.start_s);
        if overlap <= 0.0 {
            continue;
        }
        match totals.iter_mut().find(|(l, _)| *l == s.label) {
            Some(t) => t.1 += overlap,
            None => totals.push((&s.label, overlap)),
        }
    }
    for (label, total) in totals {
        if best.map_or(true, |(_, b)| total > b) {
            best = Some((label, total));
        }
    }
    best.map(|(l, _)| String::from(l))
}

fn surrogate_or_flag(result: Result<Surrogate>, flag: u8, flags: &mut u8) -> Result<Vec<f64>> {
    match result {
        Ok(s) => {
            if s.degenerate {
                *flags |= flag;
            }
            Ok(s.samples)
        }
        Err(Error::InsufficientBeats { .. }) => {
            *flags |= flag;
            Ok(alloc::vec![0.0; RESP_LEN])
        }
        Err(e) => Err(e),
    }
}

/// Runs the full extraction chain on one recording.
pub fn extract_recording(rec: &Recording, cfg: &ExtractConfig) -> Result<(WindowBatch, ExclusionReport)> {
    let duration = rec.ecg.duration().min(rec.accel.duration());
    let duration = rec.resp.as_ref().map_or(duration, |r| duration.min(r.duration()));
    let spans: Vec<TimeSpan> = window_spans(duration, cfg.window_s, cfg.stride_s)
        .into_iter()
        .map(|s| TimeSpan::new(s.start_s + rec.ecg.t0(), s.length_s))
        .collect();

    let peaks = match detect_r_peaks_with(rec.ecg.channel(0), rec.ecg.fs(), rec.ecg.t0(), &cfg.detector) {
        Ok(p) => p,
        Err(Error::NoPeaks) => RPeakSeries::new(Vec::new(), Vec::new(), rec.ecg.fs())?,
        Err(e) => return Err(e),
    };
    let adr = adr_prepare(&rec.accel, &cfg.adr)?;
    let reference = rec.resp.as_ref().map(|r| resample_to_rate(r, RESP_FS)).transpose()?;

    let with_targets = reference.is_some();
    let mut report = ExclusionReport { total: spans.len(), ..Default::default() };
    let (mut inputs, mut raw, mut waves, mut rates) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    let (mut flags, mut meta) = (Vec::new(), Vec::new());

    for span in &spans {
        let mut flag = 0u8;
        let rrint = surrogate_or_flag(edr_rrint_with(&peaks, span, &cfg.edr), FLAG_RRINT, &mut flag)?;
        let ramp = surrogate_or_flag(edr_ramp_with(&peaks, span, &cfg.edr), FLAG_RAMP, &mut flag)?;
        let adr_w = surrogate_or_flag(adr.window(span), FLAG_ADR, &mut flag)?;

        let mut targets = None;
        if let Some(reference) = &reference {
            let start = ((span.start_s - reference.t0()) * RESP_FS).round() as usize;
            let wave = znorm(&reference.channel(0)[start..start + RESP_LEN]);
            let rate = match &rec.breath_peaks_s {
                Some(truth) => {
                    let inside: Vec<f64> = truth.iter().copied().filter(|&t| span.contains(t)).collect();
                    avg_rr(&inside).ok()
                }
                None => count_breaths(&wave).avg_rr_bpm,
            };
            let Some(rate) = rate else {
                report.excluded_no_reference += 1;
                continue;
            };
            targets = Some((wave, rate));
        }

        if flag != 0 {
            report.flagged += 1;
            for (k, bit) in [FLAG_RRINT, FLAG_RAMP, FLAG_ADR].into_iter().enumerate() {
                if flag & bit != 0 {
                    report.per_channel[k] += 1;
                }
            }
            if cfg.policy == FlaggedPolicy::Exclude {
                report.excluded_flagged += 1;
                continue;
            }
        }

        inputs.extend(rrint);
        inputs.extend(ramp);
        inputs.extend(adr_w);
        if cfg.include_raw {
            raw.extend(raw_window(rec, span)?);
        }
        if let Some((wave, rate)) = targets {
            waves.extend(wave);
            rates.push(rate);
        }
        flags.push(flag);
        meta.push(WindowMeta {
            subject: rec.subject.clone(),
            start_s: span.start_s,
            activity: majority_activity(&rec.activities, span),
        });
    }
    let n = flags.len();
    report.kept = n;
    let batch = WindowBatch {
        inputs: Tensor::new(&[n, IN_CHANNELS, RESP_LEN], inputs)?,
        raw: cfg.include_raw.then(|| Tensor::new(&[n, IN_CHANNELS, RAW_LEN], raw)).transpose()?,
        waveform: with_targets.then(|| Tensor::new(&[n, 1, RESP_LEN], waves)).transpose()?,
        rate: with_targets.then(|| Tensor::new(&[n, 1], rates)).transpose()?,
        flags,
        meta,
    };
    Ok((batch, report))
}

/// `[ECG, accel PC1, accel PC2]` for one window, each resampled to 2048
/// samples and z-normalised.
pub fn raw_window(rec: &Recording, span: &TimeSpan) -> Result<Vec<f64>> {
    let cut = |sig: &SampledSignal| -> Result<Vec<Vec<f64>>> {
        let start = ((span.start_s - sig.t0()) * sig.fs()).round() as usize;
        let len = (span.length_s * sig.fs()).round() as usize;
        if start + len > sig.len() {
            return Err(Error::InvalidArgument("window extends past the recording".into()));
        }
        Ok(sig.channels().iter().map(|c| c[start..start + len].to_vec()).collect())
    };
    let ecg = cut(&rec.ecg)?.swap_remove(0);
    let accel = cut(&rec.accel)?;
    let cols: [&[f64]; 3] = [&accel[0], &accel[1], &accel[2]];
    let pca = Pca3::new(cols);
    let fit = |x: Vec<f64>, fs: f64| -> Result<Vec<f64>> {
        let sig = SampledSignal::single(x, "x", fs)?;
        Ok(znorm(resample(&sig, RAW_LEN)?.channel(0)))
    };
    let mut out = fit(ecg, rec.ecg.fs())?;
    out.extend(fit(pca.project(cols, 0), rec.accel.fs())?);
    out.extend(fit(pca.project(cols, 1), rec.accel.fs())?);
    Ok(out)
}

/// Generates each configuration and extracts its windows; subject ids are
/// `s00`, `s01`, ... in configuration order.
pub fn make_dataset(cfgs: &[SynthConfig], extract: &ExtractConfig) -> Result<(WindowBatch, ExclusionReport)> {
    let mut parts = Vec::with_capacity(cfgs.len());
    let mut report = ExclusionReport::default();
    for (i, cfg) in cfgs.iter().enumerate() {
        let rec = generate(cfg)?;
        let recording = Recording {
            subject: alloc::format!("s{i:02}"),
            ecg: rec.ecg,
            accel: rec.accel,
            resp: Some(rec.resp),
            breath_peaks_s: Some(rec.truth.breath_peak_times_s),
            activities: cfg.activities.clone(),
        };
        let (batch, r) = extract_recording(&recording, extract)?;
        report.merge(&r);
        parts.push(batch);
    }
    Ok((WindowBatch::concat(&parts)?, report))
}
