//! Reading and writing [`SampledSignal`]s.
//!
//! Two encodings, chosen by file extension:
//!
//! * `.csv`: a `time,<label>...` header (`time_s` is also accepted), then
//!   one row per sample. The time column must advance in uniform steps;
//!   the sampling rate is recovered from it.
//! * anything else: `RSP1` magic, a little-endian `u32` header length, a
//!   JSON header `{fs, t0, labels, samples}`, then each channel as
//!   little-endian `f64`.

use std::path::Path;

use resp_core::signal::SampledSignal;
use serde::{Deserialize, Serialize};

use crate::binary::{Reader, Writer};
use crate::error::{read, write, Error, Result};

const MAGIC: &[u8; 4] = b"RSP1";
const TIME_COLUMN: &str = "time";
const TIME_ALIASES: [&str; 2] = [TIME_COLUMN, "time_s"];
/// Relative tolerance when checking a CSV time column against a declared rate.
const FS_RTOL: f64 = 1e-6;

#[derive(Serialize, Deserialize)]
struct Header {
    fs: f64,
    t0: f64,
    labels: Vec<String>,
    samples: usize,
}

fn is_csv(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

pub fn write_signal(path: &Path, sig: &SampledSignal) -> Result<()> {
    if is_csv(path) {
        write_csv(path, sig)
    } else {
        write(path, &encode(sig))
    }
}

/// Reads a signal; `expected_fs`, when given, must match the file's rate.
pub fn read_signal(path: &Path, expected_fs: Option<f64>) -> Result<SampledSignal> {
    let sig = if is_csv(path) { read_csv(path)? } else { decode(path, &read(path)?)? };
    if let Some(fs) = expected_fs {
        if ((sig.fs() - fs) / fs).abs() > FS_RTOL {
            return Err(Error::FsMismatch { path: path.to_path_buf(), expected: fs, found: sig.fs() });
        }
    }
    Ok(sig)
}

pub fn encode(sig: &SampledSignal) -> Vec<u8> {
    let header = Header { fs: sig.fs(), t0: sig.t0(), labels: sig.labels().to_vec(), samples: sig.len() };
    let mut w = Writer::new(MAGIC, &header);
    for c in sig.channels() {
        w.f64s(c);
    }
    w.finish()
}

pub fn decode(path: &Path, bytes: &[u8]) -> Result<SampledSignal> {
    let (header, mut r): (Header, _) = Reader::open(path, bytes, MAGIC)?;
    let channels = (0..header.labels.len()).map(|_| r.f64s(header.samples)).collect::<Result<Vec<_>>>()?;
    r.finish()?;
    Ok(SampledSignal::new(channels, header.labels, header.fs, header.t0)?)
}

fn write_csv(path: &Path, sig: &SampledSignal) -> Result<()> {
    let mut out = String::with_capacity(sig.len() * 16 * (sig.n_channels() + 1));
    out.push_str(TIME_COLUMN);
    for l in sig.labels() {
        out.push(',');
        out.push_str(l);
    }
    out.push('\n');
    for i in 0..sig.len() {
        out.push_str(&(sig.t0() + i as f64 / sig.fs()).to_string());
        for c in sig.channels() {
            out.push(',');
            out.push_str(&c[i].to_string());
        }
        out.push('\n');
    }
    write(path, out.as_bytes())
}

fn read_csv(path: &Path) -> Result<SampledSignal> {
    let mut rdr = csv::ReaderBuilder::new().from_path(path).map_err(|e| csv_error(path, e))?;
    let headers = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    if !headers.get(0).is_some_and(|h| TIME_ALIASES.contains(&h)) || headers.len() < 2 {
        return Err(Error::csv(path, 1, format!("expected a header starting with `{TIME_COLUMN}` and at least one channel")));
    }
    let labels: Vec<String> = headers.iter().skip(1).map(String::from).collect();
    let mut times = Vec::new();
    let mut channels = vec![Vec::new(); labels.len()];
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        let mut fields = rec.iter().map(|f| {
            f.trim().parse::<f64>().map_err(|_| Error::csv(path, line, format!("`{f}` is not a number")))
        });
        times.push(fields.next().unwrap()?);
        for c in channels.iter_mut() {
            c.push(fields.next().unwrap()?);
        }
    }
    if times.len() < 2 {
        return Err(Error::format(path, "need at least two samples to infer the sampling rate"));
    }
    let step = (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64;
    // rows are numbered from 2 because of the header
    for (i, w) in times.windows(2).enumerate() {
        let d = w[1] - w[0];
        if !(d > 0.0) || (d - step).abs() > 1e-3 * step {
            return Err(Error::csv(path, i as u64 + 3, "time column must increase in uniform steps"));
        }
    }
    let fs = 1.0 / step;
    Ok(SampledSignal::new(channels, labels, fs, times[0])?)
}

pub(crate) fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        kind => Error::csv(path, line, format!("{kind:?}")),
    }
}
