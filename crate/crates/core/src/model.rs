//! The five network configurations.
//!
//! Every configuration shares an encoder that maps its input to a
//! `(B, 1024, 2)` bottleneck. A decoder turns the bottleneck into a
//! 128-sample respiration waveform, a regression head turns it into one
//! average rate; configurations differ in input kind and which of the two
//! outputs they carry.

use alloc::format;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::nn::gradcheck::{self, Differentiable};
use crate::nn::{Layer, LayerSpec, Mode, Param, Sequential, Tensor, INCEPTION_KERNEL};
use crate::rng::{seeded, streams};
use crate::signal::{RAW_LEN, RESP_LEN};
use crate::{Error, Result};

/// Input channels for every configuration.
pub const IN_CHANNELS: usize = 3;
/// Widest encoder layer.
pub const MAX_FILTERS: usize = 1024;
/// Length of the shared bottleneck.
pub const BOTTLENECK_LEN: usize = 2;

const ENCODER_FILTERS: [usize; 6] = [32, 64, 128, 256, 512, 1024];
const DECODER_FILTERS: [usize; 6] = [512, 256, 128, 64, 32, 16];
const HEAD_FILTERS: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum ConfId {
    A,
    B,
    C,
    D,
    E,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputKind {
    /// ECG plus two accelerometer components at 2048 samples per window.
    Raw,
    /// The three respiration surrogates at 128 samples per window.
    Resp,
}

impl InputKind {
    pub fn len(self) -> usize {
        match self {
            InputKind::Raw => RAW_LEN,
            InputKind::Resp => RESP_LEN,
        }
    }
}

impl ConfId {
    pub const ALL: [ConfId; 5] = [ConfId::A, ConfId::B, ConfId::C, ConfId::D, ConfId::E];

    pub fn input_kind(self) -> InputKind {
        match self {
            ConfId::A | ConfId::B => InputKind::Raw,
            _ => InputKind::Resp,
        }
    }

    pub fn has_waveform(self) -> bool {
        matches!(self, ConfId::B | ConfId::C | ConfId::E)
    }

    pub fn has_rate(self) -> bool {
        !matches!(self, ConfId::C)
    }

    pub fn as_char(self) -> char {
        match self {
            ConfId::A => 'A',
            ConfId::B => 'B',
            ConfId::C => 'C',
            ConfId::D => 'D',
            ConfId::E => 'E',
        }
    }
}

impl fmt::Display for ConfId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_char())
    }
}

impl FromStr for ConfId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let s = s.strip_prefix("CONF-").or_else(|| s.strip_prefix("conf-")).unwrap_or(s);
        match s {
            "A" | "a" => Ok(ConfId::A),
            "B" | "b" => Ok(ConfId::B),
            "C" | "c" => Ok(ConfId::C),
            "D" | "d" => Ok(ConfId::D),
            "E" | "e" => Ok(ConfId::E),
            _ => Err(Error::InvalidArgument(format!("unknown configuration {s:?}"))),
        }
    }
}

/// A configuration plus a width divisor; `width_div = 1` is the full
/// network, larger powers of two give narrow copies for testing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ConfSpec {
    pub id: ConfId,
    pub width_div: usize,
}

impl ConfSpec {
    pub fn new(id: ConfId) -> Self {
        Self { id, width_div: 1 }
    }

    pub fn narrow(id: ConfId, width_div: usize) -> Self {
        Self { id, width_div }
    }

    fn validate(&self) -> Result<()> {
        // The narrowest layer (16 decoder filters) must stay even for the
        // inception split.
        if self.width_div == 0 || !self.width_div.is_power_of_two() || self.width_div > 8 {
            return Err(Error::InvalidArgument(format!(
                "width divisor must be 1, 2, 4 or 8, got {}",
                self.width_div
            )));
        }
        Ok(())
    }

    fn width(&self, filters: usize) -> usize {
        filters / self.width_div
    }

    pub fn input_len(&self) -> usize {
        self.id.input_kind().len()
    }

    /// Number of stride-2 encoder blocks.
    pub fn encoder_depth(&self) -> usize {
        (self.input_len() / BOTTLENECK_LEN).trailing_zeros() as usize
    }

    pub fn encoder_specs(&self) -> Vec<LayerSpec> {
        let mut specs = Vec::new();
        let mut c_in = IN_CHANNELS;
        for i in 0..self.encoder_depth() {
            let c_out = self.width(ENCODER_FILTERS.get(i).copied().unwrap_or(MAX_FILTERS));
            specs.extend([
                LayerSpec::Conv1d { c_in, c_out, kernel: 3, stride: 2, padding: 1 },
                LayerSpec::BatchNorm1d { channels: c_out },
                LayerSpec::LeakyRelu { slope: crate::nn::LEAKY_SLOPE },
                LayerSpec::InceptionRes { channels: c_out, kernel: INCEPTION_KERNEL },
            ]);
            c_in = c_out;
        }
        specs
    }

    pub fn bottleneck_channels(&self) -> usize {
        self.width(MAX_FILTERS)
    }

    pub fn decoder_specs(&self) -> Vec<LayerSpec> {
        let mut specs = Vec::new();
        let mut c_in = self.bottleneck_channels();
        for filters in DECODER_FILTERS {
            let c_out = self.width(filters);
            specs.extend([
                LayerSpec::ConvTranspose1d { c_in, c_out, kernel: 3, stride: 2, padding: 1, output_padding: 1 },
                LayerSpec::BatchNorm1d { channels: c_out },
                LayerSpec::LeakyRelu { slope: crate::nn::LEAKY_SLOPE },
                LayerSpec::InceptionRes { channels: c_out, kernel: INCEPTION_KERNEL },
            ]);
            c_in = c_out;
        }
        specs.push(LayerSpec::Conv1d { c_in, c_out: 1, kernel: 1, stride: 1, padding: 0 });
        specs
    }

    pub fn head_specs(&self) -> Vec<LayerSpec> {
        let mut specs = Vec::new();
        let mut c_in = self.bottleneck_channels();
        let mut c_out = self.width(HEAD_FILTERS);
        let mut len = BOTTLENECK_LEN;
        while len > 1 {
            specs.extend([
                LayerSpec::Conv1d { c_in, c_out, kernel: 4, stride: 2, padding: 1 },
                LayerSpec::BatchNorm1d { channels: c_out },
                LayerSpec::LeakyRelu { slope: crate::nn::LEAKY_SLOPE },
                LayerSpec::InceptionRes { channels: c_out, kernel: INCEPTION_KERNEL },
            ]);
            len /= 2;
            c_in = c_out;
            c_out = (c_out / 2).max(2);
        }
        specs.extend([LayerSpec::Flatten, LayerSpec::Dense { n_in: c_in, n_out: 1 }]);
        specs
    }
}

/// Outputs of one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    /// `(B, 1, 128)` respiration waveform.
    pub waveform: Option<Tensor>,
    /// `(B, 1)` average respiration rate.
    pub rate: Option<Tensor>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub conf: ConfSpec,
    pub encoder: Sequential,
    pub decoder: Option<Sequential>,
    pub head: Option<Sequential>,
}

impl Model {
    /// Builds a freshly initialised model. Encoder, decoder and head draw
    /// from separate random streams, so the shared parts of two
    /// configurations built with the same seed start out identical.
    pub fn build(conf: ConfSpec, seed: u64) -> Result<Self> {
        conf.validate()?;
        let encoder = Sequential::from_specs(&conf.encoder_specs(), &mut seeded(seed, streams::ENCODER))?;
        let decoder = conf
            .id
            .has_waveform()
            .then(|| Sequential::from_specs(&conf.decoder_specs(), &mut seeded(seed, streams::DECODER)))
            .transpose()?;
        let head = conf
            .id
            .has_rate()
            .then(|| Sequential::from_specs(&conf.head_specs(), &mut seeded(seed, streams::HEAD)))
            .transpose()?;
        Ok(Self { conf, encoder, decoder, head })
    }

    /// Assembles a model from existing parts, checking that the layer
    /// structure matches the configuration.
    pub fn from_parts(conf: ConfSpec, encoder: Sequential, decoder: Option<Sequential>, head: Option<Sequential>) -> Result<Self> {
        conf.validate()?;
        let check = |name: &str, got: Option<&Sequential>, want: Option<Vec<LayerSpec>>| -> Result<()> {
            let got = got.map(Sequential::specs);
            if got != want {
                return Err(Error::Shape {
                    expected: format!("{name} layers for CONF-{}", conf.id),
                    got: format!("{} layers", got.map_or(0, |g| g.len())),
                });
            }
            Ok(())
        };
        check("encoder", Some(&encoder), Some(conf.encoder_specs()))?;
        check("decoder", decoder.as_ref(), conf.id.has_waveform().then(|| conf.decoder_specs()))?;
        check("head", head.as_ref(), conf.id.has_rate().then(|| conf.head_specs()))?;
        Ok(Self { conf, encoder, decoder, head })
    }

    fn check_input(&self, x: &Tensor) -> Result<()> {
        let (_, c, l) = x.dims3()?;
        if c != IN_CHANNELS || l != self.conf.input_len() {
            return Err(Error::Shape {
                expected: format!("(B, {IN_CHANNELS}, {})", self.conf.input_len()),
                got: format!("{:?}", x.shape()),
            });
        }
        Ok(())
    }

    /// Training-mode forward pass; caches activations for [`Model::backward`].
    pub fn forward(&mut self, x: &Tensor, mode: Mode) -> Result<Output> {
        self.check_input(x)?;
        let z = self.encoder.forward(x, mode)?;
        let waveform = match self.decoder.as_mut() {
            Some(d) => Some(d.forward(&z, mode)?),
            None => None,
        };
        let rate = match self.head.as_mut() {
            Some(h) => Some(h.forward(&z, mode)?),
            None => None,
        };
        Ok(Output { waveform, rate })
    }

    /// Inference with running batch-norm statistics; no caching.
    pub fn infer(&self, x: &Tensor) -> Result<Output> {
        self.check_input(x)?;
        let z = self.encoder.infer(x)?;
        let waveform = self.decoder.as_ref().map(|d| d.infer(&z)).transpose()?;
        let rate = self.head.as_ref().map(|h| h.infer(&z)).transpose()?;
        Ok(Output { waveform, rate })
    }

    /// Bottleneck for `x` under running statistics.
    pub fn encode(&self, x: &Tensor) -> Result<Tensor> {
        self.check_input(x)?;
        self.encoder.infer(x)
    }

    /// Back-propagates output gradients through the heads and the shared
    /// encoder, accumulating parameter gradients, and returns the input
    /// gradient. A head with no gradient is skipped entirely.
    pub fn backward(&mut self, grad_waveform: Option<&Tensor>, grad_rate: Option<&Tensor>) -> Result<Tensor> {
        let mut dz: Option<Tensor> = None;
        let mut accumulate = |g: Tensor| match dz.as_mut() {
            Some(acc) => acc.add_assign(&g),
            None => dz = Some(g),
        };
        if let Some(g) = grad_waveform {
            let d = self.decoder.as_mut().ok_or(Error::MissingTargets("model has no waveform output"))?;
            accumulate(d.backward(g));
        }
        if let Some(g) = grad_rate {
            let h = self.head.as_mut().ok_or(Error::MissingTargets("model has no rate output"))?;
            accumulate(h.backward(g));
        }
        let dz = dz.ok_or_else(|| Error::InvalidArgument("backward needs at least one output gradient".into()))?;
        Ok(self.encoder.backward(&dz))
    }

    pub fn params(&self) -> Vec<&Param> {
        let mut p = self.encoder.params();
        if let Some(d) = &self.decoder {
            p.extend(d.params());
        }
        if let Some(h) = &self.head {
            p.extend(h.params());
        }
        p
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut p = self.encoder.params_mut();
        if let Some(d) = &mut self.decoder {
            p.extend(d.params_mut());
        }
        if let Some(h) = &mut self.head {
            p.extend(h.params_mut());
        }
        p
    }

    /// Batch-norm running statistics in the same order as [`Model::params`].
    pub fn buffers(&self) -> Vec<&Vec<f64>> {
        self.parts().flat_map(Sequential::buffers).collect()
    }

    pub fn buffers_mut(&mut self) -> Vec<&mut Vec<f64>> {
        let mut b = self.encoder.buffers_mut();
        if let Some(d) = &mut self.decoder {
            b.extend(d.buffers_mut());
        }
        if let Some(h) = &mut self.head {
            b.extend(h.buffers_mut());
        }
        b
    }

    fn parts(&self) -> impl Iterator<Item = &Sequential> {
        core::iter::once(&self.encoder).chain(self.decoder.as_ref()).chain(self.head.as_ref())
    }

    pub fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    /// Total trainable scalars.
    pub fn param_count(&self) -> usize {
        self.parts().map(Sequential::param_count).sum()
    }

    pub fn layers(&self) -> impl Iterator<Item = &Layer> {
        self.parts().flat_map(|s| s.layers.iter())
    }
}

impl Differentiable for Model {
    fn forward_all(&mut self, x: &Tensor) -> Result<Vec<Tensor>> {
        let out = self.forward(x, Mode::Train)?;
        Ok(out.waveform.into_iter().chain(out.rate).collect())
    }

    fn backward_all(&mut self, grads: &[Tensor]) -> Result<Tensor> {
        let mut it = grads.iter();
        let gw = if self.decoder.is_some() { it.next() } else { None };
        let gr = if self.head.is_some() { it.next() } else { None };
        self.backward(gw, gr)
    }

    fn params(&self) -> Vec<&Param> {
        Model::params(self)
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        Model::params_mut(self)
    }

    fn branch_fingerprint(&self) -> u64 {
        gradcheck::fingerprint(self.parts().flat_map(Sequential::activation_patterns))
    }
}
