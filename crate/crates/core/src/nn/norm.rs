use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // unused when std is linked: its inherent float methods take precedence
use num_traits::Float;

use super::{Mode, Param, Tensor};
use crate::{Error, Result};

pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.1;

/// Per-channel batch normalisation over `(batch, length)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm1d {
    pub gamma: Param,
    pub beta: Param,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    pub eps: f64,
    pub momentum: f64,
    cache: Option<Cache>,
}

#[derive(Debug, Clone, PartialEq)]
struct Cache {
    xhat: Vec<f64>,
    inv_std: Vec<f64>,
    mode: Mode,
}

impl BatchNorm1d {
    pub fn new(channels: usize) -> Self {
        Self {
            gamma: Param::filled(&[channels], 1.0),
            beta: Param::zeros(&[channels]),
            running_mean: vec![0.0; channels],
            running_var: vec![1.0; channels],
            eps: BN_EPS,
            momentum: BN_MOMENTUM,
            cache: None,
        }
    }

    pub fn channels(&self) -> usize {
        self.gamma.len()
    }

    fn check(&self, x: &Tensor) -> Result<(usize, usize, usize)> {
        let (b, c, l) = x.dims3()?;
        if c != self.channels() {
            return Err(Error::Shape {
                expected: alloc::format!("(B, {}, L)", self.channels()),
                got: alloc::format!("{:?}", x.shape()),
            });
        }
        if b == 0 || l == 0 {
            return Err(Error::InvalidArgument("batch normalisation of an empty batch".into()));
        }
        Ok((b, c, l))
    }

    fn normalize(&self, x: &Tensor, mean: &[f64], inv_std: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let (b, c, l) = x.dims3().unwrap();
        let mut xhat = vec![0.0; x.len()];
        let mut y = vec![0.0; x.len()];
        let (g, be) = (self.gamma.value.data(), self.beta.value.data());
        for bi in 0..b {
            for ci in 0..c {
                let off = (bi * c + ci) * l;
                for i in off..off + l {
                    let h = (x.data()[i] - mean[ci]) * inv_std[ci];
                    xhat[i] = h;
                    y[i] = g[ci] * h + be[ci];
                }
            }
        }
        (xhat, y)
    }

    fn running_inv_std(&self) -> Vec<f64> {
        self.running_var.iter().map(|v| 1.0 / (v + self.eps).sqrt()).collect()
    }

    /// Evaluation-mode output from the running statistics.
    pub fn infer(&self, x: &Tensor) -> Result<Tensor> {
        self.check(x)?;
        let (_, y) = self.normalize(x, &self.running_mean, &self.running_inv_std());
        Tensor::new(x.shape(), y)
    }

    pub fn forward(&mut self, x: &Tensor, mode: Mode) -> Result<Tensor> {
        let (b, c, l) = self.check(x)?;
        let (mean, inv_std) = match mode {
            Mode::Eval => (self.running_mean.clone(), self.running_inv_std()),
            Mode::Train => {
                let n = (b * l) as f64;
                let mut mean = vec![0.0; c];
                let mut var = vec![0.0; c];
                for ci in 0..c {
                    let mut s = 0.0;
                    for bi in 0..b {
                        s += x.data()[(bi * c + ci) * l..(bi * c + ci + 1) * l].iter().sum::<f64>();
                    }
                    mean[ci] = s / n;
                    let mut ss = 0.0;
                    for bi in 0..b {
                        ss += x.data()[(bi * c + ci) * l..(bi * c + ci + 1) * l]
                            .iter()
                            .map(|v| (v - mean[ci]) * (v - mean[ci]))
                            .sum::<f64>();
                    }
                    var[ci] = ss / n;
                }
                let unbias = if n > 1.0 { n / (n - 1.0) } else { 1.0 };
                for ci in 0..c {
                    self.running_mean[ci] = (1.0 - self.momentum) * self.running_mean[ci] + self.momentum * mean[ci];
                    self.running_var[ci] = (1.0 - self.momentum) * self.running_var[ci] + self.momentum * var[ci] * unbias;
                }
                let inv_std = var.iter().map(|v| 1.0 / (v + self.eps).sqrt()).collect();
                (mean, inv_std)
            }
        };
        let (xhat, y) = self.normalize(x, &mean, &inv_std);
        self.cache = Some(Cache { xhat, inv_std, mode });
        Tensor::new(x.shape(), y)
    }

    pub fn backward(&mut self, dy: &Tensor) -> Tensor {
        let cache = self.cache.as_ref().expect("BatchNorm1d::backward before forward");
        let (b, c, l) = dy.dims3().unwrap();
        let n = (b * l) as f64;
        let mut dx = vec![0.0; dy.len()];
        for ci in 0..c {
            let (mut sum_dy, mut sum_dy_xhat) = (0.0, 0.0);
            for bi in 0..b {
                let off = (bi * c + ci) * l;
                for i in off..off + l {
                    sum_dy += dy.data()[i];
                    sum_dy_xhat += dy.data()[i] * cache.xhat[i];
                }
            }
            self.gamma.grad.data_mut()[ci] += sum_dy_xhat;
            self.beta.grad.data_mut()[ci] += sum_dy;
            let scale = self.gamma.value.data()[ci] * cache.inv_std[ci];
            for bi in 0..b {
                let off = (bi * c + ci) * l;
                for i in off..off + l {
                    dx[i] = match cache.mode {
                        Mode::Train => scale / n * (n * dy.data()[i] - sum_dy - cache.xhat[i] * sum_dy_xhat),
                        Mode::Eval => scale * dy.data()[i],
                    };
                }
            }
        }
        Tensor::new(dy.shape(), dx).unwrap()
    }

    pub fn params(&self) -> [&Param; 2] {
        [&self.gamma, &self.beta]
    }

    pub fn params_mut(&mut self) -> [&mut Param; 2] {
        [&mut self.gamma, &mut self.beta]
    }
}
