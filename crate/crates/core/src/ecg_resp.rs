//! R-peak detection and the two ECG-derived respiration surrogates:
//! R-R interval modulation and R-peak amplitude modulation.

use alloc::vec::Vec;

#[allow(unused_imports)] // unused when std is linked: its inherent float methods take precedence
use num_traits::Float;

use crate::filter::{default_padlen, Sos};
use crate::interp::CubicSpline;
use crate::signal::{bandpass_samples, znorm_flagged, SampledSignal, TimeSpan, RESP_FS};
use crate::{Error, Result};

/// Physiological beat-to-beat gap range used to clean and filter series.
pub const MIN_BEAT_GAP_S: f64 = 0.25;
pub const MAX_BEAT_GAP_S: f64 = 3.0;

/// Detected R peaks: times (strictly increasing) and raw ECG values.
#[derive(Debug, Clone, PartialEq)]
pub struct RPeakSeries {
    pub times_s: Vec<f64>,
    pub amplitudes: Vec<f64>,
    pub source_fs: f64,
}

impl RPeakSeries {
    pub fn new(times_s: Vec<f64>, amplitudes: Vec<f64>, source_fs: f64) -> Result<Self> {
        if times_s.len() != amplitudes.len() {
            return Err(Error::LengthMismatch(times_s.len(), amplitudes.len()));
        }
        if times_s.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument("peak times must be strictly increasing".into()));
        }
        Ok(Self { times_s, amplitudes, source_fs })
    }

    pub fn len(&self) -> usize {
        self.times_s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times_s.is_empty()
    }

    /// Beat-to-beat intervals, one per peak after the first.
    pub fn intervals(&self) -> Vec<f64> {
        self.times_s.windows(2).map(|w| w[1] - w[0]).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorConfig {
    pub band_hz: (f64, f64),
    pub band_order: usize,
    pub integration_s: f64,
    pub refractory_s: f64,
    pub refine_s: f64,
    /// Length of the threshold learning phase at the start of the record.
    pub learning_s: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            band_hz: (5.0, 15.0),
            band_order: 4,
            integration_s: 0.150,
            refractory_s: 0.250,
            refine_s: 0.050,
            learning_s: 2.0,
        }
    }
}

/// Detects R peaks on the first channel of `ecg` with the default
/// detector settings.
pub fn detect_r_peaks(ecg: &SampledSignal) -> Result<RPeakSeries> {
    detect_r_peaks_with(ecg.channel(0), ecg.fs(), ecg.t0(), &DetectorConfig::default())
}

/// Band-pass, differentiate, square, integrate over a moving window, pick
/// fiducials with adaptive signal/noise thresholds, then move each fiducial
/// to the raw-ECG maximum within `refine_s`.
pub fn detect_r_peaks_with(ecg: &[f64], fs: f64, t0: f64, cfg: &DetectorConfig) -> Result<RPeakSeries> {
    if fs < 100.0 {
        return Err(Error::InvalidArgument(alloc::format!("ECG rate must be >= 100 Hz, got {fs}")));
    }
    if (ecg.len() as f64) < 5.0 * fs {
        return Err(Error::NotEnoughSamples(ecg.len()));
    }
    if ecg.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    let integrated = qrs_energy(ecg, fs, cfg)?;
    let peak_energy = integrated.iter().cloned().fold(0.0, f64::max);
    if !(peak_energy > 1e-18) {
        return Err(Error::NoPeaks);
    }

    let fiducials = pick_fiducials(&integrated, fs, cfg);
    let half = (cfg.refine_s * fs).round() as usize;
    let mut refined: Vec<usize> = fiducials
        .iter()
        .map(|&c| {
            let lo = c.saturating_sub(half);
            let hi = (c + half + 1).min(ecg.len());
            (lo..hi)
                .max_by(|&a, &b| ecg[a].partial_cmp(&ecg[b]).unwrap().then(b.cmp(&a)))
                .unwrap()
        })
        .collect();
    refined.dedup();

    // refinement may pull neighbours closer than the refractory gap
    let min_gap = (MIN_BEAT_GAP_S * fs).round() as usize;
    let mut kept: Vec<usize> = Vec::with_capacity(refined.len());
    for idx in refined {
        match kept.last_mut() {
            Some(last) if idx - *last < min_gap => {
                if ecg[idx] > ecg[*last] {
                    *last = idx;
                }
            }
            _ => kept.push(idx),
        }
    }
    if kept.is_empty() {
        return Err(Error::NoPeaks);
    }
    let times_s = kept.iter().map(|&i| t0 + i as f64 / fs).collect();
    let amplitudes = kept.iter().map(|&i| ecg[i]).collect();
    Ok(RPeakSeries { times_s, amplitudes, source_fs: fs })
}

fn qrs_energy(ecg: &[f64], fs: f64, cfg: &DetectorConfig) -> Result<Vec<f64>> {
    let sos = Sos::butter_bandpass(cfg.band_order, cfg.band_hz.0, cfg.band_hz.1, fs)?;
    let band = sos.filtfilt(ecg, default_padlen(cfg.band_hz.0, fs));
    let n = band.len();
    let mut squared = alloc::vec![0.0; n];
    for i in 2..n.saturating_sub(2) {
        let d = (2.0 * band[i + 1] + band[i + 2] - band[i - 2] - 2.0 * band[i - 1]) * (fs / 8.0);
        squared[i] = d * d;
    }
    // centred moving-window integration
    let w = ((cfg.integration_s * fs).round() as usize).max(1);
    let mut prefix = alloc::vec![0.0; n + 1];
    for i in 0..n {
        prefix[i + 1] = prefix[i] + squared[i];
    }
    Ok((0..n)
        .map(|i| {
            let lo = i.saturating_sub(w / 2);
            let hi = (lo + w).min(n);
            (prefix[hi] - prefix[lo]) / w as f64
        })
        .collect())
}

fn pick_fiducials(energy: &[f64], fs: f64, cfg: &DetectorConfig) -> Vec<usize> {
    let n = energy.len();
    let candidates: Vec<usize> = (1..n - 1)
        .filter(|&i| energy[i] > energy[i - 1] && energy[i] >= energy[i + 1])
        .collect();
    let learn = ((cfg.learning_s * fs) as usize).min(n);
    let head = &energy[..learn];
    let mut spki = head.iter().cloned().fold(0.0, f64::max) / 3.0;
    let mut npki = head.iter().sum::<f64>() / learn as f64 / 2.0;
    let refractory = (cfg.refractory_s * fs).round() as usize;

    let mut accepted: Vec<usize> = Vec::new();
    for (ci, &c) in candidates.iter().enumerate() {
        let pk = energy[c];
        let threshold = npki + 0.25 * (spki - npki);
        if pk <= threshold {
            npki = 0.125 * pk + 0.875 * npki;
            continue;
        }
        if let Some(&last) = accepted.last() {
            if c - last < refractory {
                if pk > energy[last] {
                    *accepted.last_mut().unwrap() = c;
                }
                continue;
            }
            // search back for a missed beat in a long gap
            if accepted.len() >= 2 {
                let recent = &accepted[accepted.len().saturating_sub(9)..];
                let mean_rr = (recent[recent.len() - 1] - recent[0]) as f64 / (recent.len() - 1) as f64;
                if (c - last) as f64 > 1.66 * mean_rr {
                    let missed = candidates[..ci]
                        .iter()
                        .filter(|&&m| m > last + refractory && m + refractory < c && energy[m] > 0.5 * threshold)
                        .max_by(|&&a, &&b| energy[a].partial_cmp(&energy[b]).unwrap());
                    if let Some(&m) = missed {
                        spki = 0.25 * energy[m] + 0.75 * spki;
                        accepted.push(m);
                    }
                }
            }
        }
        spki = 0.125 * pk + 0.875 * spki;
        accepted.push(c);
    }
    accepted
}

/// Settings shared by both ECG-derived respiration extractors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdrConfig {
    pub band_hz: (f64, f64),
    pub band_order: usize,
    pub min_beats: usize,
}

impl Default for EdrConfig {
    fn default() -> Self {
        Self { band_hz: (0.1, 0.7), band_order: 4, min_beats: 4 }
    }
}

/// A 4 Hz respiration surrogate for one window. `degenerate` is set when
/// the window carried no variance and the output was zero-filled.
#[derive(Debug, Clone, PartialEq)]
pub struct Surrogate {
    pub samples: Vec<f64>,
    pub degenerate: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Modulation {
    Interval,
    Amplitude,
}

/// Respiration from R-R interval modulation (the tachogram).
pub fn edr_rrint(peaks: &RPeakSeries, span: &TimeSpan) -> Result<Surrogate> {
    edr(peaks, span, Modulation::Interval, &EdrConfig::default())
}

/// Respiration from R-peak amplitude modulation.
pub fn edr_ramp(peaks: &RPeakSeries, span: &TimeSpan) -> Result<Surrogate> {
    edr(peaks, span, Modulation::Amplitude, &EdrConfig::default())
}

pub fn edr_rrint_with(peaks: &RPeakSeries, span: &TimeSpan, cfg: &EdrConfig) -> Result<Surrogate> {
    edr(peaks, span, Modulation::Interval, cfg)
}

pub fn edr_ramp_with(peaks: &RPeakSeries, span: &TimeSpan, cfg: &EdrConfig) -> Result<Surrogate> {
    edr(peaks, span, Modulation::Amplitude, cfg)
}

fn edr(peaks: &RPeakSeries, span: &TimeSpan, kind: Modulation, cfg: &EdrConfig) -> Result<Surrogate> {
    let filtered = edr_unnormalized(peaks, span, kind, cfg)?;
    let (samples, degenerate) = znorm_flagged(&filtered);
    Ok(Surrogate { samples, degenerate })
}

/// Interpolated and band-passed modulation series, before normalisation.
fn edr_unnormalized(peaks: &RPeakSeries, span: &TimeSpan, kind: Modulation, cfg: &EdrConfig) -> Result<Vec<f64>> {
    let t = &peaks.times_s;
    let inside = t.iter().filter(|&&v| span.contains(v)).count();
    if inside < cfg.min_beats {
        return Err(Error::InsufficientBeats { found: inside, needed: cfg.min_beats });
    }
    // one beat of context beyond each edge, when available
    let first = t.partition_point(|&v| v < span.start_s).saturating_sub(1);
    let last = (t.partition_point(|&v| v < span.end_s()) + 1).min(t.len());

    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for i in first..last {
        match kind {
            Modulation::Interval => {
                if i == 0 {
                    continue;
                }
                let gap = t[i] - t[i - 1];
                if (MIN_BEAT_GAP_S..=MAX_BEAT_GAP_S).contains(&gap) {
                    xs.push(t[i]);
                    ys.push(gap);
                }
            }
            Modulation::Amplitude => {
                xs.push(t[i]);
                ys.push(peaks.amplitudes[i]);
            }
        }
    }
    if xs.len() < 2 {
        return Err(Error::InsufficientBeats { found: xs.len(), needed: cfg.min_beats });
    }
    let spline = CubicSpline::natural(&xs, &ys)?;
    let grid: Vec<f64> = span.grid(RESP_FS).map(|g| spline.eval(g)).collect();
    bandpass_samples(&grid, RESP_FS, cfg.band_hz.0, cfg.band_hz.1, cfg.band_order)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::RESP_LEN;
    use alloc::vec;
    use core::f64::consts::PI;

    fn mexican_hat(t: f64) -> f64 {
        let s = 0.02;
        let u = t / s;
        (1.0 - u * u) * (-0.5 * u * u).exp()
    }

    fn pulses(beats: &[f64], amps: &[f64], fs: f64, secs: f64) -> Vec<f64> {
        let n = (secs * fs) as usize;
        let mut x = vec![0.0; n];
        for (&b, &a) in beats.iter().zip(amps) {
            let c = (b * fs).round() as i64;
            for k in (c - 80).max(0)..(c + 80).min(n as i64) {
                x[k as usize] += a * mexican_hat(k as f64 / fs - b);
            }
        }
        x
    }

    fn dominant_freq(x: &[f64], fs: f64) -> f64 {
        let n = x.len();
        (1..n / 2)
            .map(|k| {
                let (mut re, mut im) = (0.0, 0.0);
                for (i, v) in x.iter().enumerate() {
                    let ph = 2.0 * PI * (k * i) as f64 / n as f64;
                    re += v * ph.cos();
                    im -= v * ph.sin();
                }
                (k, re * re + im * im)
            })
            .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .map(|(k, _)| k as f64 * fs / n as f64)
            .unwrap()
    }

    fn rsa_beats(secs: f64, depth_s: f64, f_resp: f64) -> Vec<f64> {
        let mut beats = vec![0.4];
        while *beats.last().unwrap() < secs - 1.2 {
            let t = *beats.last().unwrap();
            beats.push(t + 1.0 - depth_s * (2.0 * PI * f_resp * t).sin());
        }
        beats
    }

    #[test]
    fn detects_constant_rate_beats() {
        let beats: Vec<f64> = (0..32).map(|k| 0.5 + k as f64).collect();
        let ecg = pulses(&beats, &vec![1.0; 32], 700.0, 32.0);
        let sig = SampledSignal::single(ecg, "ecg", 700.0).unwrap();
        let peaks = detect_r_peaks(&sig).unwrap();
        assert!((31..=33).contains(&peaks.len()), "{}", peaks.len());
        for t in &peaks.times_s {
            let nearest = beats.iter().map(|b| (b - t).abs()).fold(f64::MAX, f64::min);
            assert!(nearest <= 0.010, "{t}");
        }
    }

    #[test]
    fn flat_ecg_has_no_peaks() {
        let sig = SampledSignal::single(vec![0.0; 7000], "ecg", 700.0).unwrap();
        assert_eq!(detect_r_peaks(&sig), Err(Error::NoPeaks));
        let sig = SampledSignal::single(vec![2.5; 7000], "ecg", 700.0).unwrap();
        assert_eq!(detect_r_peaks(&sig), Err(Error::NoPeaks));
    }

    #[test]
    fn detector_preconditions() {
        let short = SampledSignal::single(vec![0.0; 700], "ecg", 700.0).unwrap();
        assert!(detect_r_peaks(&short).is_err());
        let slow = SampledSignal::single(vec![0.0; 1000], "ecg", 50.0).unwrap();
        assert!(detect_r_peaks(&slow).is_err());
        let mut bad = vec![0.0; 7000];
        bad[10] = f64::INFINITY;
        let bad = SampledSignal::single(bad, "ecg", 700.0).unwrap();
        assert_eq!(detect_r_peaks(&bad), Err(Error::NonFinite));
    }

    #[test]
    fn recovers_modulated_intervals() {
        let beats = rsa_beats(64.0, 0.1, 0.25);
        let ecg = pulses(&beats, &vec![1.0; beats.len()], 700.0, 64.0);
        let sig = SampledSignal::single(ecg, "ecg", 700.0).unwrap();
        let peaks = detect_r_peaks(&sig).unwrap();
        assert_eq!(peaks.len(), beats.len());
        let truth: Vec<f64> = beats.windows(2).map(|w| w[1] - w[0]).collect();
        let found = peaks.intervals();
        assert!(correlation(&truth, &found) > 0.95);
    }

    #[test]
    fn peaks_are_refractory_and_shift_with_time_origin() {
        let beats = rsa_beats(40.0, 0.1, 0.25);
        let ecg = pulses(&beats, &vec![1.0; beats.len()], 700.0, 40.0);
        let a = detect_r_peaks(&SampledSignal::single(ecg.clone(), "ecg", 700.0).unwrap()).unwrap();
        assert!(a.intervals().iter().all(|g| *g >= 0.25));
        let shifted = SampledSignal::single(ecg, "ecg", 700.0).unwrap().with_t0(37.0 / 700.0);
        let b = detect_r_peaks(&shifted).unwrap();
        for (x, y) in a.times_s.iter().zip(&b.times_s) {
            assert!((y - x - 37.0 / 700.0).abs() < 1e-12);
        }
    }

    fn correlation(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len().min(b.len());
        let (a, b) = (&a[..n], &b[..n]);
        let ma = a.iter().sum::<f64>() / n as f64;
        let mb = b.iter().sum::<f64>() / n as f64;
        let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = a.iter().map(|x| (x - ma) * (x - ma)).sum();
        let vb: f64 = b.iter().map(|y| (y - mb) * (y - mb)).sum();
        cov / (va * vb).sqrt()
    }

    #[test]
    fn rrint_surrogate_follows_breathing() {
        let beats = rsa_beats(64.0, 0.1, 0.25);
        let peaks = RPeakSeries::new(beats.clone(), vec![1.0; beats.len()], 700.0).unwrap();
        let out = edr_rrint(&peaks, &TimeSpan::new(16.0, 32.0)).unwrap();
        assert_eq!(out.samples.len(), RESP_LEN);
        assert!(!out.degenerate);
        assert!((dominant_freq(&out.samples, 4.0) - 0.25).abs() <= 1.0 / 32.0 + 1e-12);
    }

    #[test]
    fn constant_intervals_are_degenerate() {
        let beats: Vec<f64> = (0..40).map(|k| k as f64 * 0.8).collect();
        let peaks = RPeakSeries::new(beats, vec![1.0; 40], 700.0).unwrap();
        let span = TimeSpan::new(0.0, 32.0);
        let raw = edr_unnormalized(&peaks, &span, Modulation::Interval, &EdrConfig::default()).unwrap();
        assert!(raw.iter().all(|v| v.abs() < 1e-6));
        let out = edr_rrint(&peaks, &span).unwrap();
        assert!(out.degenerate && out.samples.iter().all(|v| *v == 0.0));
        let ramp = edr_ramp(&peaks, &span).unwrap();
        assert!(ramp.degenerate);
    }

    #[test]
    fn too_few_beats_is_an_error() {
        let peaks = RPeakSeries::new(vec![1.0, 2.0, 3.0], vec![1.0; 3], 700.0).unwrap();
        let span = TimeSpan::new(0.0, 32.0);
        assert_eq!(edr_rrint(&peaks, &span), Err(Error::InsufficientBeats { found: 3, needed: 4 }));
        assert!(edr_ramp(&peaks, &span).is_err());
    }

    #[test]
    fn amplitude_surrogate_follows_breathing() {
        let beats: Vec<f64> = (0..64).map(|k| 0.3 + k as f64 * 0.9).collect();
        let amps: Vec<f64> = beats.iter().map(|t| 1.0 + 0.2 * (2.0 * PI * 0.2 * t).sin()).collect();
        let peaks = RPeakSeries::new(beats, amps, 700.0).unwrap();
        let out = edr_ramp(&peaks, &TimeSpan::new(10.0, 32.0)).unwrap();
        assert_eq!(out.samples.len(), RESP_LEN);
        assert!((dominant_freq(&out.samples, 4.0) - 0.2).abs() <= 1.0 / 32.0 + 1e-12);
    }
}
