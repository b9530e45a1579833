//! Synthetic recordings with exact labels.
//!
//! Respiration is a unit sinusoid whose instantaneous frequency follows a
//! piecewise-linear rate profile. Heartbeats are placed so each interval is
//! the profile's heart period shortened by `rsa_depth` times the current
//! respiration value; the ECG is a train of Mexican-hat pulses whose
//! amplitude follows respiration, plus baseline wander and white noise. The
//! accelerometer sees a fixed gravity vector tilted along a fixed direction
//! in proportion to respiration, plus activity noise.

use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_2, TAU};

#[allow(unused_imports)] // unused when std is linked: its inherent float methods take precedence
use num_traits::Float;
use rand::Rng as _;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::rng::{seeded, streams};
use crate::signal::{SampledSignal, WINDOW_S};
use crate::{Error, Result};

/// Allowed respiration rates, breaths per minute.
pub const RR_RANGE: (f64, f64) = (6.0, 40.0);
/// Allowed heart rates, beats per minute.
pub const HR_RANGE: (f64, f64) = (40.0, 180.0);
/// Width parameter of the QRS pulse, seconds.
pub const QRS_SIGMA_S: f64 = 0.02;
const WANDER_HZ: f64 = 0.05;

/// Piecewise-linear function of time, constant beyond its end points.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Profile {
    /// `(time_s, value)` knots with strictly increasing times.
    pub points: Vec<(f64, f64)>,
}

impl Profile {
    pub fn constant(value: f64) -> Self {
        Self { points: alloc::vec![(0.0, value)] }
    }

    pub fn linear(t0: f64, v0: f64, t1: f64, v1: f64) -> Self {
        Self { points: alloc::vec![(t0, v0), (t1, v1)] }
    }

    fn validate(&self, name: &str, range: (f64, f64)) -> Result<()> {
        if self.points.is_empty() {
            return Err(Error::InvalidArgument(alloc::format!("{name} profile is empty")));
        }
        if self.points.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return Err(Error::InvalidArgument(alloc::format!("{name} profile times must increase")));
        }
        for &(t, v) in &self.points {
            if !t.is_finite() || !(range.0..=range.1).contains(&v) {
                return Err(Error::InvalidArgument(alloc::format!(
                    "{name} profile value {v} at {t} s outside [{}, {}]",
                    range.0,
                    range.1
                )));
            }
        }
        Ok(())
    }

    pub fn at(&self, t: f64) -> f64 {
        let p = &self.points;
        if t <= p[0].0 {
            return p[0].1;
        }
        let last = p[p.len() - 1];
        if t >= last.0 {
            return last.1;
        }
        let k = p.partition_point(|q| q.0 <= t);
        let (a, b) = (p[k - 1], p[k]);
        a.1 + (b.1 - a.1) * (t - a.0) / (b.0 - a.0)
    }

    /// Exact integral of the profile from 0 to `t` (`t >= 0`).
    pub fn integral(&self, t: f64) -> f64 {
        let mut knots: Vec<f64> = self.points.iter().map(|q| q.0).filter(|&x| x > 0.0 && x < t).collect();
        knots.insert(0, 0.0);
        knots.push(t);
        // linear between knots, so the trapezoid rule is exact
        knots.windows(2).map(|w| 0.5 * (self.at(w[0]) + self.at(w[1])) * (w[1] - w[0])).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ActivitySegment {
    pub start_s: f64,
    pub end_s: f64,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct SynthConfig {
    pub duration_s: f64,
    pub fs: f64,
    /// Breaths per minute over time.
    pub rr_profile: Profile,
    /// Beats per minute over time.
    pub hr_profile: Profile,
    /// Peak heart-period shortening at full inspiration, milliseconds.
    pub rsa_depth_ms: f64,
    /// R-amplitude modulation depth, percent.
    pub ramp_mod_pct: f64,
    /// Tilt amplitude, g.
    pub tilt_amp: f64,
    /// Per-axis accelerometer noise, g.
    pub activity_noise_sigma: f64,
    /// White noise added to the ECG, in units of the QRS amplitude.
    pub ecg_noise_sigma: f64,
    /// Amplitude of the 0.05 Hz ECG baseline wander.
    pub baseline_wander: f64,
    pub activities: Vec<ActivitySegment>,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            duration_s: 128.0,
            fs: 700.0,
            rr_profile: Profile::constant(15.0),
            hr_profile: Profile::constant(70.0),
            rsa_depth_ms: 100.0,
            ramp_mod_pct: 15.0,
            tilt_amp: 0.05,
            activity_noise_sigma: 0.01,
            ecg_noise_sigma: 0.01,
            baseline_wander: 0.05,
            activities: Vec::new(),
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.duration_s >= 2.0 * WINDOW_S) {
            return Err(Error::InvalidArgument(alloc::format!(
                "duration must be at least {} s, got {}",
                2.0 * WINDOW_S,
                self.duration_s
            )));
        }
        if !(self.fs >= 100.0 && self.fs.is_finite()) {
            return Err(Error::InvalidArgument(alloc::format!("sampling rate must be >= 100 Hz, got {}", self.fs)));
        }
        self.rr_profile.validate("respiration-rate", RR_RANGE)?;
        self.hr_profile.validate("heart-rate", HR_RANGE)?;
        let amplitudes = [
            self.rsa_depth_ms,
            self.ramp_mod_pct,
            self.tilt_amp,
            self.activity_noise_sigma,
            self.ecg_noise_sigma,
            self.baseline_wander,
        ];
        if amplitudes.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(Error::InvalidArgument("modulation depths and noise levels must be finite and >= 0".into()));
        }
        if self.ramp_mod_pct >= 100.0 {
            return Err(Error::InvalidArgument("amplitude modulation must stay below 100%".into()));
        }
        // the shortened heart period must stay positive
        let fastest = self.hr_profile.points.iter().map(|p| p.1).fold(0.0, f64::max);
        if self.rsa_depth_ms / 1000.0 >= 0.5 * 60.0 / fastest {
            return Err(Error::InvalidArgument(alloc::format!("RSA depth {} ms is too large", self.rsa_depth_ms)));
        }
        Ok(())
    }
}

/// Exact event times behind a recording.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Truth {
    pub beat_times_s: Vec<f64>,
    pub breath_peak_times_s: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthRecording {
    pub ecg: SampledSignal,
    /// Axes `ax`, `ay`, `az` in g.
    pub accel: SampledSignal,
    /// Reference respiration in `[-1, 1]`.
    pub resp: SampledSignal,
    pub truth: Truth,
}

/// Respiration phase model `phi(t) = phi0 + 2 pi integral(rr / 60)`.
struct Breathing<'a> {
    profile: &'a Profile,
    phase0: f64,
}

impl Breathing<'_> {
    fn phase(&self, t: f64) -> f64 {
        self.phase0 + TAU * self.profile.integral(t) / 60.0
    }

    fn value(&self, t: f64) -> f64 {
        self.phase(t).sin()
    }

    /// Time at which the phase reaches `target`; phase is strictly
    /// increasing since rates are positive.
    fn time_of_phase(&self, target: f64, hi_bound: f64) -> f64 {
        let (mut lo, mut hi) = (0.0, hi_bound);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if self.phase(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-12 {
                break;
            }
        }
        0.5 * (lo + hi)
    }

    fn peaks(&self, duration: f64) -> Vec<f64> {
        let mut out = Vec::new();
        let end_phase = self.phase(duration);
        let mut k = ((self.phase0 - FRAC_PI_2) / TAU).ceil();
        loop {
            let target = FRAC_PI_2 + TAU * k;
            if target > end_phase {
                break;
            }
            if target >= self.phase0 {
                out.push(self.time_of_phase(target, duration));
            }
            k += 1.0;
        }
        out
    }
}

/// Mexican-hat pulse with unit peak.
pub fn qrs_template(dt: f64) -> f64 {
    let u = dt / QRS_SIGMA_S;
    (1.0 - u * u) * (-0.5 * u * u).exp()
}

pub fn generate(cfg: &SynthConfig) -> Result<SynthRecording> {
    cfg.validate()?;
    let n = (cfg.duration_s * cfg.fs).round() as usize;
    let times: Vec<f64> = (0..n).map(|i| i as f64 / cfg.fs).collect();

    let mut resp_rng = seeded(cfg.seed, streams::SYNTH_RESP);
    let breathing = Breathing { profile: &cfg.rr_profile, phase0: resp_rng.random_range(0.0..TAU) };
    let resp: Vec<f64> = times.iter().map(|&t| breathing.value(t)).collect();
    let breath_peaks = breathing.peaks(cfg.duration_s);

    let mut ecg_rng = seeded(cfg.seed, streams::SYNTH_ECG);
    let rsa = cfg.rsa_depth_ms / 1000.0;
    let mut beats = Vec::new();
    let mut t = ecg_rng.random_range(0.0..60.0 / cfg.hr_profile.at(0.0));
    while t < cfg.duration_s {
        beats.push(t);
        t += 60.0 / cfg.hr_profile.at(t) - rsa * breathing.value(t);
    }

    let mut ecg = alloc::vec![0.0; n];
    let reach = (6.0 * QRS_SIGMA_S * cfg.fs).ceil() as isize;
    let ramp = cfg.ramp_mod_pct / 100.0;
    for &b in &beats {
        let amp = 1.0 + ramp * breathing.value(b);
        let centre = (b * cfg.fs).round() as isize;
        for i in (centre - reach).max(0)..(centre + reach + 1).min(n as isize) {
            let i = i as usize;
            ecg[i] += amp * qrs_template(times[i] - b);
        }
    }
    let wander_phase = ecg_rng.random_range(0.0..TAU);
    for (v, &t) in ecg.iter_mut().zip(&times) {
        let noise: f64 = StandardNormal.sample(&mut ecg_rng);
        *v += cfg.baseline_wander * (TAU * WANDER_HZ * t + wander_phase).sin() + cfg.ecg_noise_sigma * noise;
    }

    let mut acc_rng = seeded(cfg.seed, streams::SYNTH_ACCEL);
    let gravity = random_unit(&mut acc_rng);
    let tilt = random_unit(&mut acc_rng);
    let noise = Normal::new(0.0, cfg.activity_noise_sigma.max(f64::MIN_POSITIVE)).expect("finite sigma");
    let mut axes: [Vec<f64>; 3] = core::array::from_fn(|_| Vec::with_capacity(n));
    for &r in &resp {
        for a in 0..3 {
            let eps = if cfg.activity_noise_sigma > 0.0 { noise.sample(&mut acc_rng) } else { 0.0 };
            axes[a].push(gravity[a] + cfg.tilt_amp * r * tilt[a] + eps);
        }
    }

    let [ax, ay, az] = axes;
    Ok(SynthRecording {
        ecg: SampledSignal::single(ecg, "ecg", cfg.fs)?,
        accel: SampledSignal::new(
            alloc::vec![ax, ay, az],
            ["ax", "ay", "az"].iter().map(|s| String::from(*s)).collect(),
            cfg.fs,
            0.0,
        )?,
        resp: SampledSignal::single(resp, "resp", cfg.fs)?,
        truth: Truth { beat_times_s: beats, breath_peak_times_s: breath_peaks },
    })
}

fn random_unit<R: rand::Rng>(rng: &mut R) -> [f64; 3] {
    loop {
        let v: [f64; 3] = core::array::from_fn(|_| StandardNormal.sample(rng));
        let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if norm > 1e-6 {
            return v.map(|c| c / norm);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::breath::avg_rr;

    fn base() -> SynthConfig {
        SynthConfig {
            duration_s: 64.0,
            rr_profile: Profile::constant(15.0),
            hr_profile: Profile::constant(60.0),
            seed: 1,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn profile_integral_is_exact() {
        let p = Profile::linear(10.0, 10.0, 20.0, 30.0);
        // 10 s at 10, ramp averaging 20 over 10 s, then 5 s at 30
        assert!((p.integral(25.0) - (100.0 + 200.0 + 150.0)).abs() < 1e-9);
        assert_eq!(p.at(15.0), 20.0);
        assert_eq!(p.at(-1.0), 10.0);
    }

    #[test]
    fn constant_rates_give_expected_counts() {
        let rec = generate(&base()).unwrap();
        let beats = rec.truth.beat_times_s.len();
        assert!((63..=65).contains(&beats), "{beats} beats");
        let peaks = &rec.truth.breath_peak_times_s;
        assert!((avg_rr(peaks).unwrap() - 15.0).abs() < 1e-6);
        for &p in peaks {
            let i = (p * 700.0).round() as usize;
            assert!(rec.resp.channel(0)[i] > 0.999);
        }
    }

    #[test]
    fn dominant_frequency_of_reference() {
        let rec = generate(&base()).unwrap();
        let x = rec.resp.channel(0);
        let n = x.len();
        let fs = 700.0;
        // DFT power on bins up to 1 Hz
        let bins = (1.0 * n as f64 / fs) as usize;
        let power = |k: usize| {
            let (mut re, mut im) = (0.0, 0.0);
            for (i, v) in x.iter().enumerate() {
                let a = TAU * (k * i) as f64 / n as f64;
                re += v * a.cos();
                im -= v * a.sin();
            }
            re * re + im * im
        };
        let best = (1..=bins).max_by(|&a, &b| power(a).partial_cmp(&power(b)).unwrap()).unwrap();
        let f = best as f64 * fs / n as f64;
        assert!((f - 0.25).abs() <= fs / n as f64 + 1e-12, "{f}");
    }

    #[test]
    fn deterministic() {
        assert_eq!(generate(&base()).unwrap(), generate(&base()).unwrap());
        let other = generate(&SynthConfig { seed: 2, ..base() }).unwrap();
        assert_ne!(generate(&base()).unwrap().ecg, other.ecg);
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(generate(&SynthConfig { rr_profile: Profile::constant(50.0), ..base() }).is_err());
        assert!(generate(&SynthConfig { hr_profile: Profile::constant(30.0), ..base() }).is_err());
        assert!(generate(&SynthConfig { duration_s: 40.0, ..base() }).is_err());
        assert!(generate(&SynthConfig { ecg_noise_sigma: -1.0, ..base() }).is_err());
    }

    #[test]
    fn beat_intervals_follow_rsa() {
        let rec = generate(&SynthConfig { ecg_noise_sigma: 0.0, ..base() }).unwrap();
        let b = &rec.truth.beat_times_s;
        let breathing_value = |t: f64| {
            let i = (t * 700.0).round() as usize;
            rec.resp.channel(0)[i.min(rec.resp.len() - 1)]
        };
        for w in b.windows(2) {
            let expect = 1.0 - 0.1 * breathing_value(w[0]);
            assert!((w[1] - w[0] - expect).abs() < 1e-3);
        }
    }
}
