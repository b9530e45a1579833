//! Per-window prediction tables, metrics and report files.
//!
//! `pred.csv` and `ref.csv` share one layout:
//!
//! ```text
//! window_id,avg_rr,inst_rr,peak_times,flags,subject,activity
//! ```
//!
//! `inst_rr` and `peak_times` are `;`-separated lists. They are present
//! only when a waveform was counted; within such a file an empty cell is an
//! empty list. An empty `avg_rr` means no rate was available. Only
//! `window_id` and `avg_rr` are required when reading.

use std::collections::BTreeMap;
use std::path::Path;

use resp_core::breath::BreathAnnotation;
use resp_core::evaluation::{assess, bland_altman, grouped_errors, AgreementStats, Assessment, Estimate, GroupSummary};
use resp_core::training::History;
use serde::{Deserialize, Serialize};

use crate::error::{write, Error, Result};
use crate::signal_io::csv_error;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RateRow {
    pub window_id: usize,
    pub avg_rr: Option<f64>,
    /// Counted breaths, when a waveform was available.
    pub breaths: Option<BreathAnnotation>,
    pub flags: u8,
    pub subject: Option<String>,
    pub activity: Option<String>,
}

impl RateRow {
    pub fn estimate(&self) -> Estimate {
        Estimate { avg_rr: self.avg_rr, breaths: self.breaths.clone() }
    }
}

const COLUMNS: [&str; 7] = ["window_id", "avg_rr", "inst_rr", "peak_times", "flags", "subject", "activity"];

fn join(xs: &[f64]) -> String {
    xs.iter().map(f64::to_string).collect::<Vec<_>>().join(";")
}

pub fn write_rates(path: &Path, rows: &[RateRow]) -> Result<()> {
    let with_breaths = rows.iter().any(|r| r.breaths.is_some());
    let mut w = csv::Writer::from_writer(Vec::new());
    let header: Vec<&str> = COLUMNS.iter().copied().filter(|c| with_breaths || !matches!(*c, "inst_rr" | "peak_times")).collect();
    w.write_record(&header).map_err(|e| csv_error(path, e))?;
    for r in rows {
        let mut rec = vec![r.window_id.to_string(), r.avg_rr.map(|v| v.to_string()).unwrap_or_default()];
        if with_breaths {
            let b = r.breaths.as_ref();
            rec.push(b.map(|b| join(&b.inst_rr_bpm)).unwrap_or_default());
            rec.push(b.map(|b| join(&b.peak_times_s)).unwrap_or_default());
        }
        rec.push(r.flags.to_string());
        rec.push(r.subject.clone().unwrap_or_default());
        rec.push(r.activity.clone().unwrap_or_default());
        w.write_record(&rec).map_err(|e| csv_error(path, e))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::format(path, e.to_string()))?;
    write(path, &bytes)
}

pub fn read_rates(path: &Path) -> Result<Vec<RateRow>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let headers = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let (Some(id_col), Some(avg_col)) = (col("window_id"), col("avg_rr")) else {
        return Err(Error::csv(path, 1, "header must contain `window_id` and `avg_rr`"));
    };
    let peaks_col = col("peak_times");
    let (flags_col, subject_col, activity_col) = (col("flags"), col("subject"), col("activity"));

    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        let bad = |what: &str, v: &str| Error::csv(path, line, format!("invalid {what} `{v}`"));
        let cell = |c: Option<usize>| c.and_then(|c| rec.get(c)).map(str::trim).filter(|s| !s.is_empty());
        let number = |what: &str, v: &str| v.parse::<f64>().map_err(|_| bad(what, v));

        let id = cell(Some(id_col)).ok_or_else(|| bad("window_id", ""))?;
        let window_id = id.parse().map_err(|_| bad("window_id", id))?;
        let avg_rr = cell(Some(avg_col)).map(|v| number("avg_rr", v)).transpose()?;
        let breaths = match peaks_col {
            Some(_) => {
                let peaks = match cell(peaks_col) {
                    Some(list) => list.split(';').map(|v| number("peak time", v.trim())).collect::<Result<Vec<_>>>()?,
                    None => Vec::new(),
                };
                Some(BreathAnnotation::from_peaks(peaks))
            }
            None => None,
        };
        let flags = match cell(flags_col) {
            Some(v) => v.parse().map_err(|_| bad("flags", v))?,
            None => 0,
        };
        rows.push(RateRow {
            window_id,
            avg_rr,
            breaths,
            flags,
            subject: cell(subject_col).map(String::from),
            activity: cell(activity_col).map(String::from),
        });
    }
    Ok(rows)
}

/// Pairs each prediction with the reference row of the same `window_id`.
pub fn join_rows<'a>(pred: &'a [RateRow], reference: &'a [RateRow]) -> Result<Vec<(&'a RateRow, &'a RateRow)>> {
    let by_id: BTreeMap<usize, &RateRow> = reference.iter().map(|r| (r.window_id, r)).collect();
    pred.iter()
        .map(|p| {
            by_id
                .get(&p.window_id)
                .map(|r| (p, *r))
                .ok_or_else(|| Error::Manifest(format!("window {} has no reference row", p.window_id)))
        })
        .collect()
}

/// Column used to group errors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupBy {
    Activity,
    Subject,
}

impl std::str::FromStr for GroupBy {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "activity" => Ok(GroupBy::Activity),
            "subject" => Ok(GroupBy::Subject),
            _ => Err(format!("unknown group column `{s}` (expected activity or subject)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub n_windows: usize,
    pub avg_rr_mae: Option<f64>,
    pub avg_rr_rmse: Option<f64>,
    pub avg_rr_n: usize,
    pub inst_rr_mae: Option<f64>,
    pub inst_rr_rmse: Option<f64>,
    pub inst_rr_n: usize,
    /// Reference intervals with no overlapping predicted interval.
    pub inst_rr_misses: usize,
    /// Flagged windows left out of the instantaneous comparison.
    pub inst_rr_excluded_windows: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub groups: Option<Vec<GroupSummary>>,
}

impl Metrics {
    pub fn from_assessment(n_windows: usize, a: &Assessment) -> Self {
        Self {
            n_windows,
            avg_rr_mae: a.avg_rr.map(|s| s.mae),
            avg_rr_rmse: a.avg_rr.map(|s| s.rmse),
            avg_rr_n: a.avg_rr.map_or(0, |s| s.n),
            inst_rr_mae: a.inst_rr.map(|s| s.mae),
            inst_rr_rmse: a.inst_rr.map(|s| s.rmse),
            inst_rr_n: a.inst_rr.map_or(0, |s| s.n),
            inst_rr_misses: a.inst_misses,
            inst_rr_excluded_windows: a.inst_excluded_windows,
            groups: None,
        }
    }
}

/// Average- and instantaneous-rate errors of `pred` against `reference`.
/// Windows flagged in the reference are left out of the instantaneous
/// comparison.
pub fn evaluate(pred: &[RateRow], reference: &[RateRow], group: Option<GroupBy>) -> Result<Metrics> {
    let pairs = join_rows(pred, reference)?;
    let p: Vec<Estimate> = pairs.iter().map(|(p, _)| p.estimate()).collect();
    let r: Vec<Estimate> = pairs.iter().map(|(_, r)| r.estimate()).collect();
    let exclude: Vec<bool> = pairs.iter().map(|(_, r)| r.flags != 0).collect();
    let mut metrics = Metrics::from_assessment(pairs.len(), &assess(&p, &r, &exclude)?);
    if let Some(g) = group {
        let rated: Vec<_> = pairs.iter().filter_map(|(p, r)| Some((p.avg_rr?, r.avg_rr?, *r))).collect();
        let labels: Vec<Option<&str>> = rated
            .iter()
            .map(|(_, _, r)| match g {
                GroupBy::Activity => r.activity.as_deref(),
                GroupBy::Subject => r.subject.as_deref(),
            })
            .collect();
        let (a, b): (Vec<f64>, Vec<f64>) = rated.iter().map(|&(a, b, _)| (a, b)).unzip();
        metrics.groups = Some(grouped_errors(&a, &b, &labels)?.groups);
    }
    Ok(metrics)
}

pub fn write_grouped(path: &Path, groups: &[GroupSummary]) -> Result<()> {
    let mut out = String::from("group,mae,rmse,n\n");
    for g in groups {
        out.push_str(&format!("{},{},{},{}\n", g.group, g.mae, g.rmse, g.n));
    }
    write(path, out.as_bytes())
}

/// Bland-Altman statistics of the average rates plus one CSV row per
/// window: `window_id,pred,ref,mean,diff`.
pub fn write_bland_altman(path: &Path, pred: &[RateRow], reference: &[RateRow]) -> Result<AgreementStats> {
    let pairs: Vec<(usize, f64, f64)> = join_rows(pred, reference)?
        .into_iter()
        .filter_map(|(p, r)| Some((p.window_id, p.avg_rr?, r.avg_rr?)))
        .collect();
    let a: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let b: Vec<f64> = pairs.iter().map(|p| p.2).collect();
    let (stats, points) = bland_altman(&a, &b)?;
    let mut out = String::from("window_id,pred,ref,mean,diff\n");
    for ((id, p, r), pt) in pairs.iter().zip(&points) {
        out.push_str(&format!("{id},{p},{r},{},{}\n", pt.mean, pt.diff));
    }
    write(path, out.as_bytes())?;
    Ok(stats)
}

pub fn write_history(path: &Path, history: &History) -> Result<()> {
    let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
    let mut out = String::from("epoch,lr,loss_total,loss_wave,loss_rr,val_mae\n");
    for r in &history.epochs {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.epoch,
            r.lr,
            r.loss_total,
            opt(r.loss_wave),
            opt(r.loss_rr),
            opt(r.val_mae)
        ));
    }
    write(path, out.as_bytes())
}
