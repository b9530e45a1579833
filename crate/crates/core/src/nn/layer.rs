use alloc::boxed::Box;
use alloc::vec::Vec;

use rand::Rng;

use super::{BatchNorm1d, Conv1d, ConvTranspose1d, Dense, Flatten, InceptionRes, LeakyRelu, Mode, Param, Tensor, LEAKY_SLOPE};
use crate::{Error, Result};

/// Serializable description of a layer's hyperparameters.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum LayerSpec {
    Conv1d { c_in: usize, c_out: usize, kernel: usize, stride: usize, padding: usize },
    ConvTranspose1d { c_in: usize, c_out: usize, kernel: usize, stride: usize, padding: usize, output_padding: usize },
    BatchNorm1d { channels: usize },
    LeakyRelu { slope: f64 },
    InceptionRes { channels: usize, kernel: usize },
    Dense { n_in: usize, n_out: usize },
    Flatten,
}

impl LayerSpec {
    pub fn build<R: Rng>(&self, rng: &mut R) -> Result<Layer> {
        let positive = |v: &[usize]| v.iter().all(|&x| x > 0);
        Ok(match *self {
            LayerSpec::Conv1d { c_in, c_out, kernel, stride, padding } => {
                if !positive(&[c_in, c_out, kernel, stride]) {
                    return Err(Error::InvalidArgument(alloc::format!("bad layer spec {self:?}")));
                }
                Layer::Conv1d(Conv1d::new(c_in, c_out, kernel, stride, padding, rng))
            }
            LayerSpec::ConvTranspose1d { c_in, c_out, kernel, stride, padding, output_padding } => {
                if !positive(&[c_in, c_out, kernel, stride]) || output_padding >= stride {
                    return Err(Error::InvalidArgument(alloc::format!("bad layer spec {self:?}")));
                }
                Layer::ConvTranspose1d(ConvTranspose1d::new(c_in, c_out, kernel, stride, padding, output_padding, rng))
            }
            LayerSpec::BatchNorm1d { channels } if channels > 0 => Layer::BatchNorm1d(BatchNorm1d::new(channels)),
            LayerSpec::LeakyRelu { slope } if slope == LEAKY_SLOPE => Layer::LeakyRelu(LeakyRelu::new()),
            LayerSpec::InceptionRes { channels, kernel } => {
                Layer::InceptionRes(Box::new(InceptionRes::with_kernel(channels, kernel, rng)?))
            }
            LayerSpec::Dense { n_in, n_out } if n_in > 0 && n_out > 0 => Layer::Dense(Dense::new(n_in, n_out, rng)),
            LayerSpec::Flatten => Layer::Flatten(Flatten::new()),
            _ => return Err(Error::InvalidArgument(alloc::format!("bad layer spec {self:?}"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    Conv1d(Conv1d),
    ConvTranspose1d(ConvTranspose1d),
    BatchNorm1d(BatchNorm1d),
    LeakyRelu(LeakyRelu),
    InceptionRes(Box<InceptionRes>),
    Dense(Dense),
    Flatten(Flatten),
}

impl Layer {
    pub fn spec(&self) -> LayerSpec {
        match self {
            Layer::Conv1d(c) => LayerSpec::Conv1d {
                c_in: c.c_in(),
                c_out: c.c_out(),
                kernel: c.kernel(),
                stride: c.stride,
                padding: c.padding,
            },
            Layer::ConvTranspose1d(c) => LayerSpec::ConvTranspose1d {
                c_in: c.c_in(),
                c_out: c.c_out(),
                kernel: c.kernel(),
                stride: c.stride,
                padding: c.padding,
                output_padding: c.output_padding,
            },
            Layer::BatchNorm1d(b) => LayerSpec::BatchNorm1d { channels: b.channels() },
            Layer::LeakyRelu(_) => LayerSpec::LeakyRelu { slope: LEAKY_SLOPE },
            Layer::InceptionRes(i) => LayerSpec::InceptionRes { channels: i.channels(), kernel: i.kernel() },
            Layer::Dense(d) => LayerSpec::Dense { n_in: d.n_in(), n_out: d.n_out() },
            Layer::Flatten(_) => LayerSpec::Flatten,
        }
    }

    pub fn forward(&mut self, x: &Tensor, mode: Mode) -> Result<Tensor> {
        match self {
            Layer::Conv1d(l) => l.forward(x),
            Layer::ConvTranspose1d(l) => l.forward(x),
            Layer::BatchNorm1d(l) => l.forward(x, mode),
            Layer::LeakyRelu(l) => Ok(l.forward(x)),
            Layer::InceptionRes(l) => l.forward(x, mode),
            Layer::Dense(l) => l.forward(x),
            Layer::Flatten(l) => l.forward(x),
        }
    }

    /// Evaluation-mode forward pass without caching.
    pub fn infer(&self, x: &Tensor) -> Result<Tensor> {
        match self {
            Layer::Conv1d(l) => l.infer(x),
            Layer::ConvTranspose1d(l) => l.infer(x),
            Layer::BatchNorm1d(l) => l.infer(x),
            Layer::LeakyRelu(l) => Ok(l.infer(x)),
            Layer::InceptionRes(l) => l.infer(x),
            Layer::Dense(l) => l.infer(x),
            Layer::Flatten(l) => l.infer(x),
        }
    }

    pub fn backward(&mut self, dy: &Tensor) -> Tensor {
        match self {
            Layer::Conv1d(l) => l.backward(dy),
            Layer::ConvTranspose1d(l) => l.backward(dy),
            Layer::BatchNorm1d(l) => l.backward(dy),
            Layer::LeakyRelu(l) => l.backward(dy),
            Layer::InceptionRes(l) => l.backward(dy),
            Layer::Dense(l) => l.backward(dy),
            Layer::Flatten(l) => l.backward(dy),
        }
    }

    pub fn params(&self) -> Vec<&Param> {
        match self {
            Layer::Conv1d(l) => l.params().into(),
            Layer::ConvTranspose1d(l) => l.params().into(),
            Layer::BatchNorm1d(l) => l.params().into(),
            Layer::InceptionRes(l) => l.params(),
            Layer::Dense(l) => l.params().into(),
            Layer::LeakyRelu(_) | Layer::Flatten(_) => Vec::new(),
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        match self {
            Layer::Conv1d(l) => l.params_mut().into(),
            Layer::ConvTranspose1d(l) => l.params_mut().into(),
            Layer::BatchNorm1d(l) => l.params_mut().into(),
            Layer::InceptionRes(l) => l.params_mut(),
            Layer::Dense(l) => l.params_mut().into(),
            Layer::LeakyRelu(_) | Layer::Flatten(_) => Vec::new(),
        }
    }

    /// Non-trainable state (batch-norm running mean and variance).
    pub fn buffers(&self) -> Vec<&Vec<f64>> {
        match self {
            Layer::BatchNorm1d(b) => alloc::vec![&b.running_mean, &b.running_var],
            Layer::InceptionRes(i) => alloc::vec![&i.norm.running_mean, &i.norm.running_var],
            _ => Vec::new(),
        }
    }

    pub fn buffers_mut(&mut self) -> Vec<&mut Vec<f64>> {
        match self {
            Layer::BatchNorm1d(b) => alloc::vec![&mut b.running_mean, &mut b.running_var],
            Layer::InceptionRes(i) => alloc::vec![&mut i.norm.running_mean, &mut i.norm.running_var],
            _ => Vec::new(),
        }
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    /// Sign pattern of the last training forward pass through this layer's
    /// activation, if it has one.
    pub fn activation_pattern(&self) -> Option<&[bool]> {
        match self {
            Layer::LeakyRelu(l) => l.pattern(),
            Layer::InceptionRes(i) => i.activation().pattern(),
            _ => None,
        }
    }
}

/// Layers applied in order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Sequential {
    pub layers: Vec<Layer>,
}

impl Sequential {
    pub fn new(layers: Vec<Layer>) -> Self {
        Self { layers }
    }

    pub fn from_specs<R: Rng>(specs: &[LayerSpec], rng: &mut R) -> Result<Self> {
        Ok(Self { layers: specs.iter().map(|s| s.build(rng)).collect::<Result<_>>()? })
    }

    pub fn specs(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(Layer::spec).collect()
    }

    pub fn forward(&mut self, x: &Tensor, mode: Mode) -> Result<Tensor> {
        let mut h = x.clone();
        for layer in &mut self.layers {
            h = layer.forward(&h, mode)?;
            debug_assert!(h.is_finite(), "non-finite activation after {:?}", layer.spec());
        }
        Ok(h)
    }

    pub fn infer(&self, x: &Tensor) -> Result<Tensor> {
        let mut h = x.clone();
        for layer in &self.layers {
            h = layer.infer(&h)?;
        }
        Ok(h)
    }

    pub fn backward(&mut self, dy: &Tensor) -> Tensor {
        let mut g = dy.clone();
        for layer in self.layers.iter_mut().rev() {
            g = layer.backward(&g);
            debug_assert!(g.is_finite(), "non-finite gradient in {:?}", layer.spec());
        }
        g
    }

    pub fn params(&self) -> Vec<&Param> {
        self.layers.iter().flat_map(Layer::params).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        self.layers.iter_mut().flat_map(Layer::params_mut).collect()
    }

    pub fn buffers(&self) -> Vec<&Vec<f64>> {
        self.layers.iter().flat_map(Layer::buffers).collect()
    }

    pub fn buffers_mut(&mut self) -> Vec<&mut Vec<f64>> {
        self.layers.iter_mut().flat_map(Layer::buffers_mut).collect()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Layer::param_count).sum()
    }

    pub fn activation_patterns(&self) -> impl Iterator<Item = &[bool]> {
        self.layers.iter().filter_map(Layer::activation_pattern)
    }
}
