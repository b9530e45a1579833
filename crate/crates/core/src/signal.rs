//! Uniformly sampled multi-channel waveforms and the conditioning steps
//! shared by every extraction stage.

use alloc::string::String;
use alloc::vec::Vec;

#[allow(unused_imports)] // unused when std is linked: its inherent float methods take precedence
use num_traits::Float;

use crate::filter::{default_padlen, Sos};
use crate::interp::lerp_at;
use crate::{Error, Result};

/// Analysis window length in seconds.
pub const WINDOW_S: f64 = 32.0;
/// Stride between consecutive analysis windows in seconds.
pub const STRIDE_S: f64 = 2.0;
/// Sampling rate of every respiration waveform fed to the networks.
pub const RESP_FS: f64 = 4.0;
/// Samples in one 32 s window at 4 Hz.
pub const RESP_LEN: usize = 128;
/// Samples in one raw-rate network input window.
pub const RAW_LEN: usize = 2048;

const FLAT_VARIANCE: f64 = 1e-12;

/// A uniformly sampled waveform with one or more named channels of equal
/// length.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledSignal {
    channels: Vec<Vec<f64>>,
    labels: Vec<String>,
    fs: f64,
    t0: f64,
}

impl SampledSignal {
    pub fn new(channels: Vec<Vec<f64>>, labels: Vec<String>, fs: f64, t0: f64) -> Result<Self> {
        if !(fs > 0.0 && fs.is_finite()) {
            return Err(Error::InvalidSignal(alloc::format!("sampling rate must be positive, got {fs}")));
        }
        if channels.is_empty() {
            return Err(Error::InvalidSignal("no channels".into()));
        }
        if labels.len() != channels.len() {
            return Err(Error::LengthMismatch(labels.len(), channels.len()));
        }
        let n = channels[0].len();
        if let Some(bad) = channels.iter().find(|c| c.len() != n) {
            return Err(Error::LengthMismatch(n, bad.len()));
        }
        Ok(Self { channels, labels, fs, t0 })
    }

    pub fn single(samples: Vec<f64>, label: &str, fs: f64) -> Result<Self> {
        Self::new(alloc::vec![samples], alloc::vec![label.into()], fs, 0.0)
    }

    pub fn fs(&self) -> f64 {
        self.fs
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn with_t0(mut self, t0: f64) -> Self {
        self.t0 = t0;
        self
    }

    pub fn len(&self) -> usize {
        self.channels[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn duration(&self) -> f64 {
        self.len() as f64 / self.fs
    }

    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn channels(&self) -> &[Vec<f64>] {
        &self.channels
    }

    pub fn channel(&self, i: usize) -> &[f64] {
        &self.channels[i]
    }

    pub fn channel_by_label(&self, label: &str) -> Option<&[f64]> {
        self.labels.iter().position(|l| l == label).map(|i| self.channels[i].as_slice())
    }

    /// Keeps only the named channels, in the given order.
    pub fn select(&self, labels: &[&str]) -> Result<Self> {
        let mut channels = Vec::with_capacity(labels.len());
        for l in labels {
            let c = self
                .channel_by_label(l)
                .ok_or_else(|| Error::InvalidSignal(alloc::format!("missing channel `{l}`")))?;
            channels.push(c.to_vec());
        }
        Self::new(channels, labels.iter().map(|l| String::from(*l)).collect(), self.fs, self.t0)
    }

    pub fn into_channels(self) -> Vec<Vec<f64>> {
        self.channels
    }

    fn check_finite(&self) -> Result<()> {
        if self.channels.iter().flatten().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::NonFinite)
        }
    }

    fn map_channels(&self, fs: f64, f: impl Fn(&[f64]) -> Vec<f64>) -> Self {
        Self {
            channels: self.channels.iter().map(|c| f(c)).collect(),
            labels: self.labels.clone(),
            fs,
            t0: self.t0,
        }
    }
}

/// Resamples every channel to `target_len` samples. Rate reduction applies
/// a zero-phase anti-alias low-pass (cutoff 0.45 x new rate) first; new
/// samples are linearly interpolated at their exact times.
pub fn resample(sig: &SampledSignal, target_len: usize) -> Result<SampledSignal> {
    if sig.is_empty() {
        return Err(Error::EmptySignal);
    }
    if target_len < 2 {
        return Err(Error::InvalidArgument(alloc::format!("target length must be >= 2, got {target_len}")));
    }
    let len = sig.len();
    if target_len == len {
        return Ok(sig.clone());
    }
    let ratio = len as f64 / target_len as f64;
    let new_fs = sig.fs / ratio;
    resample_with(sig, new_fs, target_len, ratio)
}

/// Resamples to an exact rate `new_fs`; the output covers the input
/// duration (`floor(duration * new_fs)` samples).
pub fn resample_to_rate(sig: &SampledSignal, new_fs: f64) -> Result<SampledSignal> {
    if sig.is_empty() {
        return Err(Error::EmptySignal);
    }
    let target_len = (sig.duration() * new_fs + 1e-9).floor() as usize;
    if target_len < 2 {
        return Err(Error::NotEnoughSamples(target_len));
    }
    resample_with(sig, new_fs, target_len, sig.fs / new_fs)
}

fn resample_with(sig: &SampledSignal, new_fs: f64, target_len: usize, step: f64) -> Result<SampledSignal> {
    sig.check_finite()?;
    let cutoff = 0.45 * new_fs;
    let lowpass = if cutoff < 0.5 * sig.fs * 0.999 {
        Some(Sos::butter_lowpass(4, cutoff, sig.fs)?)
    } else {
        None
    };
    let pad = default_padlen(cutoff, sig.fs).max(16);
    Ok(sig.map_channels(new_fs, |c| {
        let smoothed;
        let src = match &lowpass {
            Some(lp) => {
                smoothed = lp.filtfilt(c, pad);
                &smoothed
            }
            None => c,
        };
        (0..target_len).map(|k| lerp_at(src, k as f64 * step)).collect()
    }))
}

/// Zero-phase Butterworth band-pass; `order` poles per direction.
pub fn bandpass(sig: &SampledSignal, lo_hz: f64, hi_hz: f64, order: usize) -> Result<SampledSignal> {
    sig.check_finite()?;
    let sos = Sos::butter_bandpass(order, lo_hz, hi_hz, sig.fs)?;
    let pad = default_padlen(lo_hz, sig.fs);
    Ok(sig.map_channels(sig.fs, |c| sos.filtfilt(c, pad)))
}

/// Band-pass of a bare sample slice.
pub fn bandpass_samples(x: &[f64], fs: f64, lo_hz: f64, hi_hz: f64, order: usize) -> Result<Vec<f64>> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    let sos = Sos::butter_bandpass(order, lo_hz, hi_hz, fs)?;
    Ok(sos.filtfilt(x, default_padlen(lo_hz, fs)))
}

/// Start time and length of an analysis window, in seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TimeSpan {
    pub start_s: f64,
    pub length_s: f64,
}

impl TimeSpan {
    pub fn new(start_s: f64, length_s: f64) -> Self {
        Self { start_s, length_s }
    }

    pub fn end_s(&self) -> f64 {
        self.start_s + self.length_s
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.start_s && t < self.end_s()
    }

    /// Uniform sample times of this span at `fs`.
    pub fn grid(&self, fs: f64) -> impl Iterator<Item = f64> + '_ {
        let n = (self.length_s * fs).round() as usize;
        let start = self.start_s;
        (0..n).map(move |k| start + k as f64 / fs)
    }
}

/// Per-window targets: reference respiration at 4 Hz and its average rate.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowTargets {
    pub waveform: Vec<f64>,
    pub avg_rr_bpm: f64,
}

/// A fixed-length segment cut from a signal.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    pub span: TimeSpan,
    pub data: Vec<Vec<f64>>,
    pub targets: Option<WindowTargets>,
}

/// Number of windows of `win_s` seconds at stride `stride_s` that fit in
/// `duration_s`.
pub fn window_count(duration_s: f64, win_s: f64, stride_s: f64) -> usize {
    if duration_s + 1e-9 < win_s {
        0
    } else {
        ((duration_s - win_s) / stride_s + 1e-9).floor() as usize + 1
    }
}

/// Window start offsets (relative to the signal start).
pub fn window_spans(duration_s: f64, win_s: f64, stride_s: f64) -> Vec<TimeSpan> {
    (0..window_count(duration_s, win_s, stride_s))
        .map(|k| TimeSpan::new(k as f64 * stride_s, win_s))
        .collect()
}

/// Cuts `sig` into windows of `win_s` seconds every `stride_s` seconds.
pub fn window_stream(sig: &SampledSignal, win_s: f64, stride_s: f64) -> Result<Vec<Window>> {
    if !(win_s > 0.0 && stride_s > 0.0) {
        return Err(Error::InvalidArgument("window and stride must be positive".into()));
    }
    let win_len = (win_s * sig.fs).round() as usize;
    Ok(window_spans(sig.duration(), win_s, stride_s)
        .into_iter()
        .filter_map(|span| {
            let start = (span.start_s * sig.fs).round() as usize;
            let end = start + win_len;
            (end <= sig.len()).then(|| Window {
                span: TimeSpan::new(sig.t0 + span.start_s, win_s),
                data: sig.channels.iter().map(|c| c[start..end].to_vec()).collect(),
                targets: None,
            })
        })
        .collect())
}

/// Mean and population variance.
pub fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var)
}

/// Zero-mean, unit population variance; flat input (variance below 1e-12)
/// maps to all zeros.
pub fn znorm(x: &[f64]) -> Vec<f64> {
    znorm_flagged(x).0
}

/// [`znorm`] plus a flag telling whether the flat-input guard fired.
pub fn znorm_flagged(x: &[f64]) -> (Vec<f64>, bool) {
    if x.is_empty() {
        return (Vec::new(), true);
    }
    let (mean, var) = mean_var(x);
    if !(var >= FLAT_VARIANCE) {
        return (alloc::vec![0.0; x.len()], true);
    }
    let sd = var.sqrt();
    (x.iter().map(|v| (v - mean) / sd).collect(), false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use core::f64::consts::PI;
    use proptest::prelude::*;

    fn sine(freq: f64, fs: f64, n: usize) -> Vec<f64> {
        (0..n).map(|k| (2.0 * PI * freq * k as f64 / fs).sin()).collect()
    }

    /// Amplitude of the `freq` component by direct Fourier projection.
    fn tone_amplitude(x: &[f64], freq: f64, fs: f64) -> f64 {
        let (mut re, mut im) = (0.0, 0.0);
        for (k, v) in x.iter().enumerate() {
            let ph = 2.0 * PI * freq * k as f64 / fs;
            re += v * ph.cos();
            im += v * ph.sin();
        }
        2.0 * (re * re + im * im).sqrt() / x.len() as f64
    }

    #[test]
    fn resample_constant_is_constant() {
        let sig = SampledSignal::single(vec![3.0; 22400], "x", 700.0).unwrap();
        for target in [2048, 1000, 64, 30000] {
            let out = resample(&sig, target).unwrap();
            assert_eq!(out.len(), target);
            assert!(out.channel(0).iter().all(|v| (v - 3.0).abs() < 1e-9));
        }
    }

    #[test]
    fn resample_raw_window_to_network_length() {
        let sig = SampledSignal::single(sine(1.0, 700.0, 22400), "x", 700.0).unwrap();
        let out = resample(&sig, RAW_LEN).unwrap();
        assert_eq!(out.len(), 2048);
        assert!((out.fs() - 64.0).abs() < 1e-12);
    }

    #[test]
    fn resample_tracks_slow_sine() {
        let sig = SampledSignal::single(sine(0.25, 700.0, 22400), "x", 700.0).unwrap();
        let out = resample(&sig, 2048).unwrap();
        let n = out.len();
        let (lo, hi) = (n / 20, n - n / 20);
        let mse: f64 = (lo..hi)
            .map(|k| {
                let t = k as f64 / out.fs();
                let d = out.channel(0)[k] - (2.0 * PI * 0.25 * t).sin();
                d * d
            })
            .sum::<f64>()
            / (hi - lo) as f64;
        assert!(mse.sqrt() < 1e-3, "rms {}", mse.sqrt());
    }

    #[test]
    fn resample_errors() {
        let sig = SampledSignal::single(vec![1.0; 10], "x", 10.0).unwrap();
        assert!(matches!(resample(&sig, 1), Err(Error::InvalidArgument(_))));
        let empty = SampledSignal::single(vec![], "x", 10.0).unwrap();
        assert_eq!(resample(&empty, 4), Err(Error::EmptySignal));
    }

    #[test]
    fn resample_twice_equals_once() {
        let sig = SampledSignal::single(vec![-1.5; 7000], "x", 700.0).unwrap();
        let once = resample(&sig, 640).unwrap();
        let twice = resample(&once, 640).unwrap();
        for (a, b) in once.channel(0).iter().zip(twice.channel(0)) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn bandpass_rejects_dc() {
        let sig = SampledSignal::single(vec![5.0; 400], "x", 4.0).unwrap();
        let out = bandpass(&sig, 0.1, 0.7, 4).unwrap();
        assert!(out.channel(0).iter().all(|v| v.abs() < 0.01));
    }

    #[test]
    fn bandpass_passes_in_band_and_stops_out_of_band() {
        let fs = 20.0;
        let n = 2000;
        let pass = bandpass(&SampledSignal::single(sine(0.3, fs, n), "x", fs).unwrap(), 0.1, 0.7, 4).unwrap();
        let stop = bandpass(&SampledSignal::single(sine(5.0, fs, n), "x", fs).unwrap(), 0.1, 0.7, 4).unwrap();
        // steady state: drop the outer quarter on each side
        let mid = |x: &[f64]| x[n / 4..3 * n / 4].to_vec();
        let a_pass = tone_amplitude(&mid(pass.channel(0)), 0.3, fs);
        let a_stop = tone_amplitude(&mid(stop.channel(0)), 5.0, fs);
        assert!((0.9..=1.1).contains(&a_pass), "{a_pass}");
        assert!(a_stop < 0.1, "{a_stop}");
    }

    #[test]
    fn bandpass_errors() {
        let sig = SampledSignal::single(vec![0.0; 100], "x", 4.0).unwrap();
        assert!(matches!(bandpass(&sig, 0.1, 2.5, 4), Err(Error::BandOutsideNyquist { .. })));
        let bad = SampledSignal::single(vec![f64::NAN; 100], "x", 4.0).unwrap();
        assert_eq!(bandpass(&bad, 0.1, 0.7, 4), Err(Error::NonFinite));
    }

    #[test]
    fn bandpass_of_zero_is_zero() {
        let sig = SampledSignal::single(vec![0.0; 256], "x", 4.0).unwrap();
        assert!(bandpass(&sig, 0.1, 0.7, 4).unwrap().channel(0).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn window_counts() {
        let mk = |secs: f64| SampledSignal::single(vec![0.0; (secs * 10.0).round() as usize], "x", 10.0).unwrap();
        assert_eq!(window_stream(&mk(64.0), 32.0, 2.0).unwrap().len(), 17);
        assert_eq!(window_stream(&mk(31.9), 32.0, 2.0).unwrap().len(), 0);
        let one = window_stream(&mk(32.0), 32.0, 2.0).unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(one[0].span.start_s, 0.0);
        assert!(window_stream(&mk(64.0), 0.0, 2.0).is_err());
    }

    #[test]
    fn windows_tile_with_overlap() {
        let samples: Vec<f64> = (0..700).map(|k| k as f64).collect();
        let sig = SampledSignal::single(samples, "x", 10.0).unwrap();
        let wins = window_stream(&sig, 32.0, 2.0).unwrap();
        for (k, pair) in wins.windows(2).enumerate() {
            assert_eq!(pair[0].span.start_s, k as f64 * 2.0);
            // the last 300 samples of window k are the first 300 of window k+1
            assert_eq!(pair[0].data[0][20..], pair[1].data[0][..300]);
        }
    }

    #[test]
    fn znorm_examples() {
        assert_eq!(znorm(&[4.0; 5]), vec![0.0; 5]);
        assert_eq!(znorm(&[0.0, 2.0]), vec![-1.0, 1.0]);
    }

    proptest! {
        #[test]
        fn znorm_moments(x in prop::collection::vec(-1e3f64..1e3, 2..200)) {
            let (z, flat) = znorm_flagged(&x);
            if flat {
                prop_assert!(z.iter().all(|v| *v == 0.0));
            } else {
                let (m, v) = mean_var(&z);
                prop_assert!(m.abs() < 1e-9);
                prop_assert!((v - 1.0).abs() < 1e-6);
            }
        }

        #[test]
        fn znorm_affine_invariant(
            x in prop::collection::vec(-10f64..10.0, 8..64),
            a in prop_oneof![-5f64..-0.1, 0.1f64..5.0],
            b in -100f64..100.0,
        ) {
            let (zx, flat) = znorm_flagged(&x);
            prop_assume!(!flat);
            let y: Vec<f64> = x.iter().map(|v| a * v + b).collect();
            let zy = znorm(&y);
            let s = a.signum();
            for (p, q) in zx.iter().zip(&zy) {
                prop_assert!((s * p - q).abs() < 1e-6);
            }
        }
    }
}
