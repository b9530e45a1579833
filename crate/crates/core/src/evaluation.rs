//! Agreement between estimated and reference respiration rates.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

#[allow(unused_imports)] // unused when std is linked: its inherent float methods take precedence
use num_traits::Float;

use crate::breath::{BreathAnnotation, RR_BAND_BPM};
use crate::{Error, Result};

/// Factor applied to the standard deviation for the limits of agreement.
pub const LOA_FACTOR: f64 = 1.96;

fn check_pair(pred: &[f64], reference: &[f64]) -> Result<()> {
    if pred.len() != reference.len() {
        return Err(Error::LengthMismatch(pred.len(), reference.len()));
    }
    if pred.is_empty() {
        return Err(Error::NotEnoughSamples(0));
    }
    Ok(())
}

pub fn mae(pred: &[f64], reference: &[f64]) -> Result<f64> {
    check_pair(pred, reference)?;
    Ok(pred.iter().zip(reference).map(|(p, r)| (p - r).abs()).sum::<f64>() / pred.len() as f64)
}

pub fn rmse(pred: &[f64], reference: &[f64]) -> Result<f64> {
    check_pair(pred, reference)?;
    let mse = pred.iter().zip(reference).map(|(p, r)| (p - r) * (p - r)).sum::<f64>() / pred.len() as f64;
    Ok(mse.sqrt())
}

/// MAE and RMSE over the same samples.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ErrorSummary {
    pub mae: f64,
    pub rmse: f64,
    pub n: usize,
}

impl ErrorSummary {
    pub fn of(pred: &[f64], reference: &[f64]) -> Result<Self> {
        Ok(Self { mae: mae(pred, reference)?, rmse: rmse(pred, reference)?, n: pred.len() })
    }
}

/// Instantaneous rates of reference breath intervals and the predicted
/// intervals paired with them.
#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct InstantPairs {
    pub pred: Vec<f64>,
    pub reference: Vec<f64>,
    /// Reference intervals with no overlapping predicted interval.
    pub misses: usize,
}

impl InstantPairs {
    pub fn extend(&mut self, other: InstantPairs) {
        self.pred.extend(other.pred);
        self.reference.extend(other.reference);
        self.misses += other.misses;
    }

    pub fn summary(&self) -> Option<ErrorSummary> {
        ErrorSummary::of(&self.pred, &self.reference).ok()
    }
}

/// Breath intervals `(start, end, rate)` whose rate lies inside the
/// plausible band.
fn intervals(ann: &BreathAnnotation) -> Vec<(f64, f64, f64)> {
    ann.peak_times_s
        .windows(2)
        .map(|w| (w[0], w[1], 60.0 / (w[1] - w[0])))
        .filter(|&(_, _, r)| r > RR_BAND_BPM.0 && r < RR_BAND_BPM.1)
        .collect()
}

/// Pairs each reference breath interval with the predicted interval that
/// overlaps it the most in time (earliest on ties).
pub fn instantaneous_pairing(pred: &BreathAnnotation, reference: &BreathAnnotation) -> InstantPairs {
    let candidates = intervals(pred);
    let mut out = InstantPairs::default();
    for (start, end, rate) in intervals(reference) {
        let mut best: Option<(f64, f64)> = None;
        for &(ps, pe, pr) in &candidates {
            let overlap = pe.min(end) - ps.max(start);
            if overlap > 0.0 && best.map_or(true, |(o, _)| overlap > o) {
                best = Some((overlap, pr));
            }
        }
        match best {
            Some((_, pr)) => {
                out.pred.push(pr);
                out.reference.push(rate);
            }
            None => out.misses += 1,
        }
    }
    out
}

/// Per-window rate estimates, from a model or from a reference.
#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Estimate {
    pub avg_rr: Option<f64>,
    /// Breaths counted on a waveform, when one was available.
    pub breaths: Option<BreathAnnotation>,
}

/// Average- and instantaneous-rate agreement over a set of windows.
#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Assessment {
    pub avg_rr: Option<ErrorSummary>,
    pub inst_rr: Option<ErrorSummary>,
    pub inst_misses: usize,
    /// Windows left out of the instantaneous comparison.
    pub inst_excluded_windows: usize,
}

/// Compares estimates window by window. Windows marked in `exclude_inst`
/// (for instance those with zero-filled input channels) are left out of
/// the instantaneous comparison only.
pub fn assess(pred: &[Estimate], reference: &[Estimate], exclude_inst: &[bool]) -> Result<Assessment> {
    if pred.len() != reference.len() {
        return Err(Error::LengthMismatch(pred.len(), reference.len()));
    }
    if exclude_inst.len() != pred.len() {
        return Err(Error::LengthMismatch(exclude_inst.len(), pred.len()));
    }
    let (mut ap, mut ar) = (Vec::new(), Vec::new());
    let mut pairs = InstantPairs::default();
    let mut any_inst = false;
    let mut excluded = 0;
    for ((p, r), &skip) in pred.iter().zip(reference).zip(exclude_inst) {
        if let (Some(a), Some(b)) = (p.avg_rr, r.avg_rr) {
            ap.push(a);
            ar.push(b);
        }
        if let (Some(pb), Some(rb)) = (&p.breaths, &r.breaths) {
            any_inst = true;
            if skip {
                excluded += 1;
            } else {
                pairs.extend(instantaneous_pairing(pb, rb));
            }
        }
    }
    Ok(Assessment {
        avg_rr: ErrorSummary::of(&ap, &ar).ok(),
        inst_rr: if any_inst { pairs.summary() } else { None },
        inst_misses: pairs.misses,
        inst_excluded_windows: excluded,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AgreementStats {
    pub bias: f64,
    pub loa_lo: f64,
    pub loa_hi: f64,
    /// Percentage of differences inside `[loa_lo, loa_hi]`.
    pub pct_within: f64,
    pub n: usize,
}

/// One point of a Bland-Altman plot.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScatterPoint {
    pub mean: f64,
    pub diff: f64,
}

/// Bias and limits of agreement (`bias +/- 1.96 sd`, population sd) of
/// `pred - reference`, plus the scatter table.
pub fn bland_altman(pred: &[f64], reference: &[f64]) -> Result<(AgreementStats, Vec<ScatterPoint>)> {
    check_pair(pred, reference)?;
    let n = pred.len();
    if n < 2 {
        return Err(Error::NotEnoughSamples(n));
    }
    let scatter: Vec<ScatterPoint> = pred
        .iter()
        .zip(reference)
        .map(|(p, r)| ScatterPoint { mean: 0.5 * (p + r), diff: p - r })
        .collect();
    let bias = scatter.iter().map(|s| s.diff).sum::<f64>() / n as f64;
    let var = scatter.iter().map(|s| (s.diff - bias) * (s.diff - bias)).sum::<f64>() / n as f64;
    let half = LOA_FACTOR * var.sqrt();
    let (loa_lo, loa_hi) = (bias - half, bias + half);
    let within = scatter.iter().filter(|s| s.diff >= loa_lo && s.diff <= loa_hi).count();
    let stats = AgreementStats { bias, loa_lo, loa_hi, pct_within: 100.0 * within as f64 / n as f64, n };
    Ok((stats, scatter))
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GroupSummary {
    pub group: String,
    pub mae: f64,
    pub rmse: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SampleError {
    pub group: String,
    pub pred: f64,
    pub reference: f64,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GroupedErrors {
    pub overall: ErrorSummary,
    /// Sorted by group label.
    pub groups: Vec<GroupSummary>,
    pub samples: Vec<SampleError>,
}

/// Label used when no grouping key is available.
pub const DEFAULT_GROUP: &str = "all";

/// Per-group MAE/RMSE. Missing or empty labels fall into the `"all"` group.
pub fn grouped_errors(pred: &[f64], reference: &[f64], groups: &[Option<&str>]) -> Result<GroupedErrors> {
    check_pair(pred, reference)?;
    if groups.len() != pred.len() {
        return Err(Error::LengthMismatch(groups.len(), pred.len()));
    }
    let mut by_group: BTreeMap<&str, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    let mut samples = Vec::with_capacity(pred.len());
    for ((&p, &r), g) in pred.iter().zip(reference).zip(groups) {
        let label = g.filter(|s| !s.is_empty()).unwrap_or(DEFAULT_GROUP);
        let entry = by_group.entry(label).or_default();
        entry.0.push(p);
        entry.1.push(r);
        samples.push(SampleError { group: label.into(), pred: p, reference: r, error: p - r });
    }
    let groups = by_group
        .into_iter()
        .map(|(g, (p, r))| {
            let s = ErrorSummary::of(&p, &r)?;
            Ok(GroupSummary { group: g.into(), mae: s.mae, rmse: s.rmse, n: s.n })
        })
        .collect::<Result<_>>()?;
    Ok(GroupedErrors { overall: ErrorSummary::of(pred, reference)?, groups, samples })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    #[test]
    fn mae_rmse_examples() {
        assert_eq!(mae(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(mae(&[3.0, 4.0], &[1.0, 2.0]).unwrap(), 2.0);
        assert_eq!(rmse(&[3.0, 4.0], &[1.0, 2.0]).unwrap(), 2.0);
        assert_eq!(mae(&[1.0, -3.0], &[0.0, 0.0]).unwrap(), 2.0);
        assert!((rmse(&[1.0, -3.0], &[0.0, 0.0]).unwrap() - 5f64.sqrt()).abs() < 1e-15);
        assert!(matches!(mae(&[1.0], &[1.0, 2.0]), Err(Error::LengthMismatch(1, 2))));
        assert!(rmse(&[], &[]).is_err());
    }

    #[test]
    fn pairing_identity_and_shift() {
        let reference = BreathAnnotation::from_peaks(vec![1.0, 5.0, 8.5, 12.0, 16.2]);
        let same = instantaneous_pairing(&reference, &reference);
        assert_eq!(same.pred, same.reference);
        assert_eq!(same.misses, 0);

        let shifted = BreathAnnotation::from_peaks(reference.peak_times_s.iter().map(|t| t + 0.1).collect());
        let p = instantaneous_pairing(&shifted, &reference);
        assert_eq!(p.pred.len(), 4);
        assert!(mae(&p.pred, &p.reference).unwrap() < 0.2);

        let none = instantaneous_pairing(&BreathAnnotation::from_peaks(vec![]), &reference);
        assert_eq!((none.pred.len(), none.misses), (0, 4));
    }

    #[test]
    fn pairing_prefers_largest_overlap() {
        let reference = BreathAnnotation::from_peaks(vec![0.0, 4.0]);
        let pred = BreathAnnotation::from_peaks(vec![-1.0, 1.0, 5.0]);
        let p = instantaneous_pairing(&pred, &reference);
        assert_eq!(p.pred, vec![15.0]);
    }

    #[test]
    fn bland_altman_examples() {
        let (s, scatter) = bland_altman(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!((s.bias, s.loa_lo, s.loa_hi, s.pct_within), (0.0, 0.0, 0.0, 100.0));
        assert_eq!(scatter[1], ScatterPoint { mean: 2.0, diff: 0.0 });
        let (s, _) = bland_altman(&[2.0, 3.0, 4.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!((s.bias, s.loa_lo, s.loa_hi), (1.0, 1.0, 1.0));
        assert!(bland_altman(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn grouped_examples() {
        let p = [1.0, 1.0, 3.0, 3.0];
        let r = [0.0; 4];
        let g = grouped_errors(&p, &r, &[Some("a"), Some("a"), Some("b"), Some("b")]).unwrap();
        assert_eq!(g.groups.iter().map(|x| x.mae).collect::<Vec<_>>(), vec![1.0, 3.0]);
        assert_eq!(g.overall.mae, 2.0);
        let single = grouped_errors(&p, &r, &[None, Some(""), None, None]).unwrap();
        assert_eq!(single.groups.len(), 1);
        assert_eq!(single.groups[0].group, "all");
        assert_eq!(single.groups[0].mae, single.overall.mae);
        assert_eq!(single.groups[0].rmse, single.overall.rmse);
    }

    #[test]
    fn assess_skips_missing_and_excluded() {
        let ann = BreathAnnotation::from_peaks(vec![0.0, 4.0, 8.0]);
        let with = |rr: f64| Estimate { avg_rr: Some(rr), breaths: Some(ann.clone()) };
        let pred = [with(16.0), Estimate { avg_rr: None, breaths: None }, with(14.0)];
        let reference = [with(15.0), with(15.0), with(15.0)];
        let a = assess(&pred, &reference, &[false, false, true]).unwrap();
        assert_eq!(a.avg_rr.unwrap().n, 2);
        assert_eq!(a.avg_rr.unwrap().mae, 1.0);
        assert_eq!(a.inst_rr.unwrap().n, 2);
        assert_eq!(a.inst_excluded_windows, 1);
        let none = assess(&[Estimate::default()], &[with(15.0)], &[false]).unwrap();
        assert!(none.avg_rr.is_none() && none.inst_rr.is_none());
    }

    proptest! {
        #[test]
        fn rmse_bounds_mae(pairs in proptest::collection::vec((-50.0f64..50.0, -50.0f64..50.0), 1..40)) {
            let (p, r): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            prop_assert!(rmse(&p, &r).unwrap() + 1e-12 >= mae(&p, &r).unwrap());
        }

        #[test]
        fn metrics_ignore_order(pairs in proptest::collection::vec((-50.0f64..50.0, -50.0f64..50.0), 2..40)) {
            let (p, r): (Vec<f64>, Vec<f64>) = pairs.iter().copied().unzip();
            let (pr, rr): (Vec<f64>, Vec<f64>) = pairs.into_iter().rev().unzip();
            prop_assert!((mae(&p, &r).unwrap() - mae(&pr, &rr).unwrap()).abs() < 1e-9);
            prop_assert!((rmse(&p, &r).unwrap() - rmse(&pr, &rr).unwrap()).abs() < 1e-9);
            let (a, _) = bland_altman(&p, &r).unwrap();
            let (b, _) = bland_altman(&pr, &rr).unwrap();
            prop_assert!((a.bias - b.bias).abs() < 1e-9);
            prop_assert!((a.loa_hi - b.loa_hi).abs() < 1e-9);
        }
    }
}
