//! Model checkpoints.
//!
//! Layout: `RNN1` magic, little-endian `u32` header length, JSON header
//! (configuration, layer specs, parameter shapes, training metadata), then
//! every parameter as little-endian `f64` in [`Model::params`] order,
//! followed by the batch-norm running statistics in [`Model::buffers`]
//! order. Values are stored at full precision so a reloaded model infers
//! bit-identically.

use std::path::Path;

use resp_core::model::{ConfSpec, Model};
use resp_core::nn::{LayerSpec, Sequential};
use resp_core::rng::seeded;
use resp_core::training::TrainConfig;
use serde::{Deserialize, Serialize};

use crate::binary::{Reader, Writer};
use crate::error::{read, write, Error, Result};

const MAGIC: &[u8; 4] = b"RNN1";
pub const VERSION: u32 = 1;

/// Provenance stored next to the weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    /// Seed the weights were initialised from.
    pub init_seed: u64,
    /// Epochs completed.
    pub epoch: usize,
    /// Training settings, including the split used for held-out windows.
    pub train: Option<TrainConfig>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    version: u32,
    conf: ConfSpec,
    meta: CheckpointMeta,
    encoder: Vec<LayerSpec>,
    decoder: Option<Vec<LayerSpec>>,
    head: Option<Vec<LayerSpec>>,
    param_shapes: Vec<Vec<usize>>,
    buffer_lens: Vec<usize>,
}

pub fn encode(model: &Model, meta: &CheckpointMeta) -> Vec<u8> {
    let header = Header {
        version: VERSION,
        conf: model.conf,
        meta: meta.clone(),
        encoder: model.encoder.specs(),
        decoder: model.decoder.as_ref().map(Sequential::specs),
        head: model.head.as_ref().map(Sequential::specs),
        param_shapes: model.params().iter().map(|p| p.value.shape().to_vec()).collect(),
        buffer_lens: model.buffers().iter().map(|b| b.len()).collect(),
    };
    let mut w = Writer::new(MAGIC, &header);
    for p in model.params() {
        w.f64s(p.value.data());
    }
    for b in model.buffers() {
        w.f64s(b);
    }
    w.finish()
}

pub fn decode(path: &Path, bytes: &[u8]) -> Result<(Model, CheckpointMeta)> {
    let (h, mut r): (Header, _) = Reader::open(path, bytes, MAGIC)?;
    if h.version != VERSION {
        return Err(Error::format(path, format!("unsupported checkpoint version {}", h.version)));
    }
    let mut rng = seeded(0, 0);
    let mut build = |specs: &[LayerSpec]| Sequential::from_specs(specs, &mut rng);
    let encoder = build(&h.encoder)?;
    let decoder = h.decoder.as_deref().map(&mut build).transpose()?;
    let head = h.head.as_deref().map(&mut build).transpose()?;
    let mut model = Model::from_parts(h.conf, encoder, decoder, head)?;

    let shapes: Vec<Vec<usize>> = model.params().iter().map(|p| p.value.shape().to_vec()).collect();
    if shapes != h.param_shapes {
        return Err(Error::format(path, "parameter shapes do not match the layer specs"));
    }
    for p in model.params_mut() {
        let values = r.f64s(p.value.len())?;
        p.value.data_mut().copy_from_slice(&values);
    }
    let lens: Vec<usize> = model.buffers().iter().map(|b| b.len()).collect();
    if lens != h.buffer_lens {
        return Err(Error::format(path, "buffer sizes do not match the layer specs"));
    }
    for b in model.buffers_mut() {
        let values = r.f64s(b.len())?;
        b.copy_from_slice(&values);
    }
    r.finish()?;
    Ok((model, h.meta))
}

pub fn save(path: &Path, model: &Model, meta: &CheckpointMeta) -> Result<()> {
    write(path, &encode(model, meta))
}

pub fn load(path: &Path) -> Result<(Model, CheckpointMeta)> {
    decode(path, &read(path)?)
}
