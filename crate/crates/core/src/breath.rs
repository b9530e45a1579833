//! Breath counting on a 4 Hz respiration waveform.
//!
//! Extrema are found and forced to alternate; vertical distances between
//! neighbouring extrema set a validity threshold (a fraction of their
//! third quartile); extremum pairs closer than the threshold are pruned as
//! non-breath ripples, and the surviving maxima are the breath peaks.

use alloc::vec::Vec;

#[allow(unused_imports)] // unused when std is linked: its inherent float methods take precedence
use num_traits::Float;

use crate::signal::RESP_FS;
use crate::{Error, Result};

/// Plausible respiration-rate band in breaths per minute (exclusive).
pub const RR_BAND_BPM: (f64, f64) = (2.0, 90.0);

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BreathAnnotation {
    /// Breath-peak times in seconds from the start of the waveform.
    pub peak_times_s: Vec<f64>,
    /// Rates of adjacent-peak intervals inside [`RR_BAND_BPM`].
    pub inst_rr_bpm: Vec<f64>,
    /// Intervals dropped for falling outside [`RR_BAND_BPM`].
    pub rejected: usize,
    pub avg_rr_bpm: Option<f64>,
}

impl BreathAnnotation {
    pub fn from_peaks(peak_times_s: Vec<f64>) -> Self {
        let (inst_rr_bpm, rejected) = inst_rr(&peak_times_s);
        let avg_rr_bpm = avg_rr(&peak_times_s).ok();
        Self { peak_times_s, inst_rr_bpm, rejected, avg_rr_bpm }
    }

    pub fn n_peaks(&self) -> usize {
        self.peak_times_s.len()
    }

    pub fn avg_rr(&self) -> Result<f64> {
        avg_rr(&self.peak_times_s)
    }
}

/// `60 (n - 1) / (t_last - t_first)` breaths per minute.
pub fn avg_rr(peak_times_s: &[f64]) -> Result<f64> {
    match peak_times_s {
        [first, .., last] => Ok(60.0 * (peak_times_s.len() - 1) as f64 / (last - first)),
        _ => Err(Error::UndefinedRate { peaks: peak_times_s.len() }),
    }
}

/// `60 / (t[k+1] - t[k])` per interval, keeping values inside
/// [`RR_BAND_BPM`]; returns the kept rates and the number dropped.
pub fn inst_rr(peak_times_s: &[f64]) -> (Vec<f64>, usize) {
    let mut rejected = 0;
    let rates = peak_times_s
        .windows(2)
        .map(|w| 60.0 / (w[1] - w[0]))
        .filter(|&r| {
            let ok = r > RR_BAND_BPM.0 && r < RR_BAND_BPM.1;
            rejected += usize::from(!ok);
            ok
        })
        .collect();
    (rates, rejected)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CountConfig {
    pub fs: f64,
    /// Validity threshold as a fraction of the extremum-distance quartile.
    pub threshold_frac: f64,
    pub quartile: f64,
}

impl Default for CountConfig {
    fn default() -> Self {
        Self { fs: RESP_FS, threshold_frac: 0.3, quartile: 0.75 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Max,
    Min,
}

#[derive(Debug, Clone, Copy)]
struct Extremum {
    idx: usize,
    value: f64,
    kind: Kind,
    /// First or last sample: the true turning point may lie outside.
    edge: bool,
}

/// Counts breaths on a 4 Hz waveform with the default settings.
pub fn count_breaths(resp: &[f64]) -> BreathAnnotation {
    count_breaths_with(resp, &CountConfig::default())
}

pub fn count_breaths_with(resp: &[f64], cfg: &CountConfig) -> BreathAnnotation {
    if resp.len() < 3 || resp.iter().any(|v| !v.is_finite()) {
        return BreathAnnotation::from_peaks(Vec::new());
    }
    let mut ext = alternate(find_extrema(resp));
    if ext.len() < 2 {
        return BreathAnnotation::from_peaks(Vec::new());
    }
    let mut dists: Vec<f64> = ext.windows(2).map(|w| (w[1].value - w[0].value).abs()).collect();
    dists.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let q = cfg.threshold_frac * quantile_sorted(&dists, cfg.quartile);
    prune(&mut ext, q);

    let peaks = (0..ext.len())
        .filter(|&i| ext[i].kind == Kind::Max && !ext[i].edge && is_valid_peak(&ext, i, q))
        .map(|i| refine(resp, ext[i].idx) / cfg.fs)
        .collect();
    BreathAnnotation::from_peaks(peaks)
}

fn find_extrema(x: &[f64]) -> Vec<Extremum> {
    let n = x.len();
    let mut out = Vec::new();
    let edge = |idx: usize, other: usize| {
        if x[idx] > x[other] {
            Some(Extremum { idx, value: x[idx], kind: Kind::Max, edge: true })
        } else if x[idx] < x[other] {
            Some(Extremum { idx, value: x[idx], kind: Kind::Min, edge: true })
        } else {
            None
        }
    };
    out.extend(edge(0, 1));
    for i in 1..n - 1 {
        let kind = if x[i] > x[i - 1] && x[i] >= x[i + 1] {
            Kind::Max
        } else if x[i] < x[i - 1] && x[i] <= x[i + 1] {
            Kind::Min
        } else {
            continue;
        };
        out.push(Extremum { idx: i, value: x[i], kind, edge: false });
    }
    out.extend(edge(n - 1, n - 2));
    out
}

/// Collapses runs of same-kind extrema to the most extreme member.
fn alternate(ext: Vec<Extremum>) -> Vec<Extremum> {
    let mut out: Vec<Extremum> = Vec::with_capacity(ext.len());
    for e in ext {
        match out.last_mut() {
            Some(last) if last.kind == e.kind => {
                let more = match e.kind {
                    Kind::Max => e.value > last.value,
                    Kind::Min => e.value < last.value,
                };
                if more {
                    *last = e;
                }
            }
            _ => out.push(e),
        }
    }
    out
}

/// Repeatedly removes the closest neighbouring pair while its distance is
/// below `q`. Removing two adjacent extrema keeps the alternation; an edge
/// extremum is dropped on its own.
fn prune(ext: &mut Vec<Extremum>, q: f64) {
    loop {
        let closest = ext
            .windows(2)
            .enumerate()
            .map(|(i, w)| (i, (w[1].value - w[0].value).abs()))
            .filter(|&(_, d)| d < q)
            .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
        let Some((i, _)) = closest else { break };
        if ext[i].edge {
            ext.remove(i);
        } else if ext[i + 1].edge {
            ext.remove(i + 1);
        } else {
            ext.drain(i..i + 2);
            // the removal can leave two same-kind extrema adjacent
            let merged = alternate(core::mem::take(ext));
            *ext = merged;
        }
    }
}

fn is_valid_peak(ext: &[Extremum], i: usize, q: f64) -> bool {
    let flanks = [i.checked_sub(1), (i + 1 < ext.len()).then_some(i + 1)];
    let mut interior = 0;
    let mut edge_ok = false;
    for j in flanks.into_iter().flatten() {
        let d = (ext[i].value - ext[j].value).abs();
        if ext[j].edge {
            edge_ok |= d >= q;
        } else {
            if d < q {
                return false;
            }
            interior += 1;
        }
    }
    interior > 0 || edge_ok
}

/// Sub-sample peak position by a parabola through three samples.
fn refine(x: &[f64], i: usize) -> f64 {
    let (a, b, c) = (x[i - 1], x[i], x[i + 1]);
    let den = a - 2.0 * b + c;
    if den >= 0.0 {
        return i as f64;
    }
    i as f64 + (0.5 * (a - c) / den).clamp(-0.5, 0.5)
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}
