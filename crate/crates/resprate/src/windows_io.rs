//! `windows.bin`: extracted network inputs and targets.
//!
//! Layout: `RWN1` magic, little-endian `u32` header length, JSON header
//! (counts, channel names, shapes, per-window metadata), then
//! little-endian `f32` blocks in this order: inputs, raw inputs (if any),
//! waveform targets (if any), rate targets (if any), flags.

use std::path::Path;

use resp_core::dataset::{WindowBatch, WindowMeta, INPUT_CHANNELS, RAW_CHANNELS};
use resp_core::nn::Tensor;
use resp_core::signal::{RAW_LEN, RESP_LEN};
use serde::{Deserialize, Serialize};

use crate::binary::{Reader, Writer};
use crate::error::{read, write, Error, Result};

const MAGIC: &[u8; 4] = b"RWN1";
pub const VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    version: u32,
    count: usize,
    channels: Vec<String>,
    input_shape: [usize; 3],
    raw_channels: Option<Vec<String>>,
    raw_shape: Option<[usize; 3]>,
    waveform_shape: Option<[usize; 3]>,
    rate_shape: Option<[usize; 2]>,
    windows: Vec<WindowMeta>,
}

pub fn encode(batch: &WindowBatch) -> Result<Vec<u8>> {
    batch.validate()?;
    let n = batch.len();
    let header = Header {
        version: VERSION,
        count: n,
        channels: INPUT_CHANNELS.iter().map(|s| s.to_string()).collect(),
        input_shape: [n, INPUT_CHANNELS.len(), RESP_LEN],
        raw_channels: batch.raw.as_ref().map(|_| RAW_CHANNELS.iter().map(|s| s.to_string()).collect()),
        raw_shape: batch.raw.as_ref().map(|_| [n, RAW_CHANNELS.len(), RAW_LEN]),
        waveform_shape: batch.waveform.as_ref().map(|_| [n, 1, RESP_LEN]),
        rate_shape: batch.rate.as_ref().map(|_| [n, 1]),
        windows: batch.meta.clone(),
    };
    let mut w = Writer::new(MAGIC, &header);
    w.f32s(batch.inputs.data());
    for t in [&batch.raw, &batch.waveform, &batch.rate].into_iter().flatten() {
        w.f32s(t.data());
    }
    w.f32s(&batch.flags.iter().map(|&f| f as f64).collect::<Vec<_>>());
    Ok(w.finish())
}

pub fn decode(path: &Path, bytes: &[u8]) -> Result<WindowBatch> {
    let (h, mut r): (Header, _) = Reader::open(path, bytes, MAGIC)?;
    if h.version != VERSION {
        return Err(Error::format(path, format!("unsupported windows version {}", h.version)));
    }
    if h.channels != INPUT_CHANNELS || h.input_shape != [h.count, INPUT_CHANNELS.len(), RESP_LEN] {
        return Err(Error::format(path, "unexpected input channels or shape"));
    }
    if h.windows.len() != h.count {
        return Err(Error::format(path, "window metadata count does not match"));
    }
    let mut block = |shape: &[usize]| -> Result<Tensor> {
        let data = r.f32s(shape.iter().product())?;
        Ok(Tensor::new(shape, data)?)
    };
    let inputs = block(&h.input_shape)?;
    let raw = h.raw_shape.map(|s| block(&s)).transpose()?;
    let waveform = h.waveform_shape.map(|s| block(&s)).transpose()?;
    let rate = h.rate_shape.map(|s| block(&s)).transpose()?;
    let flags = r
        .f32s(h.count)?
        .into_iter()
        .map(|f| u8::try_from(f as i64).map_err(|_| Error::format(path, format!("bad flag value {f}"))))
        .collect::<Result<Vec<_>>>()?;
    r.finish()?;
    let batch = WindowBatch { inputs, raw, waveform, rate, flags, meta: h.windows };
    batch.validate()?;
    Ok(batch)
}

pub fn write_windows(path: &Path, batch: &WindowBatch) -> Result<()> {
    write(path, &encode(batch)?)
}

pub fn read_windows(path: &Path) -> Result<WindowBatch> {
    decode(path, &read(path)?)
}
