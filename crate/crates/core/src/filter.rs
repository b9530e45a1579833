//! Butterworth filter design as cascaded biquads, with forward-backward
//! (zero-phase) application.

use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
#[allow(unused_imports)] // unused when std is linked: its inherent float methods take precedence
use num_traits::Float;

use crate::{Error, Result};

/// One second-order section, `a[0] == 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 3],
}

impl Biquad {
    fn response(&self, w: f64) -> Complex64 {
        let z1 = Complex64::from_polar(1.0, -w);
        let z2 = z1 * z1;
        let num = self.b[0] + z1 * self.b[1] + z2 * self.b[2];
        let den = self.a[0] + z1 * self.a[1] + z2 * self.a[2];
        num / den
    }

    /// State that makes the section output constant for a constant input `x0`.
    fn steady_state(&self, x0: f64) -> ([f64; 2], f64) {
        let gain = (self.b[0] + self.b[1] + self.b[2]) / (self.a[0] + self.a[1] + self.a[2]);
        let y = gain * x0;
        let z2 = self.b[2] * x0 - self.a[2] * y;
        let z1 = self.b[1] * x0 - self.a[1] * y + z2;
        ([z1, z2], y)
    }
}

/// Cascade of second-order sections.
#[derive(Debug, Clone, PartialEq)]
pub struct Sos {
    pub sections: Vec<Biquad>,
}

/// Left-half-plane poles of the unit-cutoff analog Butterworth prototype.
fn prototype_poles(n: usize) -> Vec<Complex64> {
    (0..n)
        .map(|k| {
            let theta = PI * (2 * k + n + 1) as f64 / (2 * n) as f64;
            Complex64::from_polar(1.0, theta)
        })
        .collect()
}

fn bilinear(s: Complex64, fs: f64) -> Complex64 {
    let two_fs = Complex64::new(2.0 * fs, 0.0);
    (two_fs + s) / (two_fs - s)
}

fn prewarp(f: f64, fs: f64) -> f64 {
    2.0 * fs * (PI * f / fs).tan()
}

/// Groups digital poles into conjugate pairs (or pairs of real poles).
fn pair_poles(poles: &[Complex64]) -> Vec<[f64; 3]> {
    const REAL_TOL: f64 = 1e-12;
    let mut denominators = Vec::new();
    let mut reals = Vec::new();
    for p in poles {
        if p.im.abs() <= REAL_TOL * p.norm().max(1.0) {
            reals.push(p.re);
        } else if p.im > 0.0 {
            denominators.push([1.0, -2.0 * p.re, p.norm_sqr()]);
        }
    }
    reals.sort_by(|a, b| a.partial_cmp(b).unwrap_or(core::cmp::Ordering::Equal));
    for pair in reals.chunks(2) {
        match pair {
            [p1, p2] => denominators.push([1.0, -(p1 + p2), p1 * p2]),
            [p] => denominators.push([1.0, -p, 0.0]),
            _ => unreachable!(),
        }
    }
    denominators
}

impl Sos {
    /// Butterworth band-pass with `order` poles per direction (even, >= 2).
    pub fn butter_bandpass(order: usize, lo_hz: f64, hi_hz: f64, fs: f64) -> Result<Self> {
        let nyquist = fs / 2.0;
        if !(lo_hz > 0.0 && lo_hz < hi_hz && hi_hz < nyquist) {
            return Err(Error::BandOutsideNyquist { lo: lo_hz, hi: hi_hz, nyquist });
        }
        if order < 2 || order % 2 != 0 {
            return Err(Error::InvalidArgument(alloc::format!(
                "band-pass order must be even and >= 2, got {order}"
            )));
        }
        let w1 = prewarp(lo_hz, fs);
        let w2 = prewarp(hi_hz, fs);
        let bw = w2 - w1;
        let w0_sq = w1 * w2;

        let mut poles = Vec::with_capacity(order);
        for p in prototype_poles(order / 2) {
            let half = p * (bw / 2.0);
            let root = (half * half - w0_sq).sqrt();
            poles.push(bilinear(half + root, fs));
            poles.push(bilinear(half - root, fs));
        }
        let center = 2.0 * (w0_sq.sqrt() / (2.0 * fs)).atan();
        let sections = pair_poles(&poles)
            .into_iter()
            .map(|a| {
                let mut s = Biquad { b: [1.0, 0.0, -1.0], a };
                let g = s.response(center).norm();
                s.b.iter_mut().for_each(|b| *b /= g);
                s
            })
            .collect();
        Ok(Self { sections })
    }

    /// Butterworth low-pass with `order` poles per direction.
    pub fn butter_lowpass(order: usize, cutoff_hz: f64, fs: f64) -> Result<Self> {
        let nyquist = fs / 2.0;
        if !(cutoff_hz > 0.0 && cutoff_hz < nyquist) {
            return Err(Error::BandOutsideNyquist { lo: 0.0, hi: cutoff_hz, nyquist });
        }
        if order == 0 {
            return Err(Error::InvalidArgument("low-pass order must be >= 1".into()));
        }
        let wc = prewarp(cutoff_hz, fs);
        let poles: Vec<_> = prototype_poles(order)
            .into_iter()
            .map(|p| bilinear(p * wc, fs))
            .collect();
        let sections = pair_poles(&poles)
            .into_iter()
            .map(|a| {
                let b = if a[2] == 0.0 { [1.0, 1.0, 0.0] } else { [1.0, 2.0, 1.0] };
                let mut s = Biquad { b, a };
                let g = s.response(0.0).norm();
                s.b.iter_mut().for_each(|b| *b /= g);
                s
            })
            .collect();
        Ok(Self { sections })
    }

    /// Magnitude response at `f_hz`.
    pub fn magnitude(&self, f_hz: f64, fs: f64) -> f64 {
        let w = 2.0 * PI * f_hz / fs;
        self.sections.iter().map(|s| s.response(w).norm()).product()
    }

    /// Causal filtering, with section states initialised to the steady
    /// state of the first sample (no start-up step on a DC level).
    pub fn filter(&self, x: &[f64]) -> Vec<f64> {
        let mut y = x.to_vec();
        if x.is_empty() {
            return y;
        }
        let mut level = x[0];
        for s in &self.sections {
            let ([mut z1, mut z2], out_level) = s.steady_state(level);
            level = out_level;
            for v in y.iter_mut() {
                let input = *v;
                let out = s.b[0] * input + z1;
                z1 = s.b[1] * input - s.a[1] * out + z2;
                z2 = s.b[2] * input - s.a[2] * out;
                *v = out;
            }
        }
        y
    }

    /// Zero-phase filtering: odd-extension padding of `padlen` samples on
    /// both ends, forward pass, reversed pass, then the padding is cut.
    pub fn filtfilt(&self, x: &[f64], padlen: usize) -> Vec<f64> {
        let n = x.len();
        if n == 0 {
            return Vec::new();
        }
        let pad = padlen.min(n - 1);
        let mut ext = Vec::with_capacity(n + 2 * pad);
        let (first, last) = (x[0], x[n - 1]);
        ext.extend((1..=pad).rev().map(|i| 2.0 * first - x[i]));
        ext.extend_from_slice(x);
        ext.extend((1..=pad).map(|i| 2.0 * last - x[n - 1 - i]));

        let mut y = self.filter(&ext);
        y.reverse();
        let mut y = self.filter(&y);
        y.reverse();
        y.drain(..pad);
        y.truncate(n);
        y
    }
}

/// Default padding for zero-phase filtering: one period of the lowest
/// corner frequency.
pub fn default_padlen(low_corner_hz: f64, fs: f64) -> usize {
    (fs / low_corner_hz).ceil() as usize
}
