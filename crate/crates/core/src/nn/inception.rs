use alloc::vec::Vec;

use rand::Rng;

use super::{BatchNorm1d, Conv1d, LeakyRelu, Mode, Param, Tensor};
use crate::{Error, Result};

/// Kernel length of the wide branch.
pub const INCEPTION_KERNEL: usize = 15;

/// Channel-preserving residual block: a 1-tap and a 15-tap convolution,
/// each producing half the channels, are concatenated, batch-normalised,
/// added to the input and passed through a leaky ReLU.
#[derive(Debug, Clone, PartialEq)]
pub struct InceptionRes {
    pub narrow: Conv1d,
    pub wide: Conv1d,
    pub norm: BatchNorm1d,
    act: LeakyRelu,
}

impl InceptionRes {
    pub fn new<R: Rng>(channels: usize, rng: &mut R) -> Result<Self> {
        Self::with_kernel(channels, INCEPTION_KERNEL, rng)
    }

    pub fn with_kernel<R: Rng>(channels: usize, kernel: usize, rng: &mut R) -> Result<Self> {
        if channels == 0 || channels % 2 != 0 {
            return Err(Error::InvalidArgument(alloc::format!(
                "inception block needs an even channel count, got {channels}"
            )));
        }
        if kernel % 2 == 0 {
            return Err(Error::InvalidArgument("inception kernel must be odd".into()));
        }
        let half = channels / 2;
        Ok(Self {
            narrow: Conv1d::new(channels, half, 1, 1, 0, rng),
            wide: Conv1d::new(channels, half, kernel, 1, kernel / 2, rng),
            norm: BatchNorm1d::new(channels),
            act: LeakyRelu::new(),
        })
    }

    pub fn channels(&self) -> usize {
        self.norm.channels()
    }

    pub fn kernel(&self) -> usize {
        self.wide.kernel()
    }

    fn concat(a: &Tensor, b: &Tensor) -> Tensor {
        let (batch, half, l) = a.dims3().unwrap();
        let mut data = Vec::with_capacity(2 * a.len());
        for bi in 0..batch {
            data.extend_from_slice(&a.data()[bi * half * l..(bi + 1) * half * l]);
            data.extend_from_slice(&b.data()[bi * half * l..(bi + 1) * half * l]);
        }
        Tensor::new(&[batch, 2 * half, l], data).unwrap()
    }

    fn split(t: &Tensor) -> (Tensor, Tensor) {
        let (batch, c, l) = t.dims3().unwrap();
        let half = c / 2;
        let (mut a, mut b) = (Vec::with_capacity(t.len() / 2), Vec::with_capacity(t.len() / 2));
        for bi in 0..batch {
            let row = &t.data()[bi * c * l..(bi + 1) * c * l];
            a.extend_from_slice(&row[..half * l]);
            b.extend_from_slice(&row[half * l..]);
        }
        (Tensor::new(&[batch, half, l], a).unwrap(), Tensor::new(&[batch, half, l], b).unwrap())
    }

    pub fn infer(&self, x: &Tensor) -> Result<Tensor> {
        let cat = Self::concat(&self.narrow.infer(x)?, &self.wide.infer(x)?);
        let mut s = self.norm.infer(&cat)?;
        s.add_assign(x);
        Ok(self.act.infer(&s))
    }

    pub fn forward(&mut self, x: &Tensor, mode: Mode) -> Result<Tensor> {
        let cat = Self::concat(&self.narrow.forward(x)?, &self.wide.forward(x)?);
        let mut s = self.norm.forward(&cat, mode)?;
        s.add_assign(x);
        Ok(self.act.forward(&s))
    }

    pub fn backward(&mut self, dy: &Tensor) -> Tensor {
        let ds = self.act.backward(dy);
        let dcat = self.norm.backward(&ds);
        let (da, db) = Self::split(&dcat);
        let mut dx = self.narrow.backward(&da);
        dx.add_assign(&self.wide.backward(&db));
        dx.add_assign(&ds);
        dx
    }

    pub fn activation(&self) -> &LeakyRelu {
        &self.act
    }

    pub fn params(&self) -> Vec<&Param> {
        let mut p = Vec::with_capacity(6);
        p.extend(self.narrow.params());
        p.extend(self.wide.params());
        p.extend(self.norm.params());
        p
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut p = Vec::with_capacity(6);
        p.extend(self.narrow.params_mut());
        p.extend(self.wide.params_mut());
        p.extend(self.norm.params_mut());
        p
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::LeakyRelu;
    use crate::rng::seeded;

    #[test]
    fn zero_branches_reduce_to_activation() {
        let mut rng = seeded(8, 0);
        let mut block = InceptionRes::new(4, &mut rng).unwrap();
        for p in block.params_mut() {
            if p.value.shape().len() == 3 {
                p.value.fill(0.0);
            }
        }
        let x = Tensor::new(&[2, 4, 16], (0..128).map(|i| (i as f64 * 0.37).sin()).collect()).unwrap();
        let want = LeakyRelu::new().infer(&x);
        assert_eq!(block.forward(&x, Mode::Train).unwrap(), want);
    }

    #[test]
    fn preserves_shape() {
        let mut rng = seeded(9, 0);
        let mut block = InceptionRes::new(32, &mut rng).unwrap();
        let y = block.forward(&Tensor::filled(&[2, 32, 128], 0.1), Mode::Train).unwrap();
        assert_eq!(y.shape(), &[2, 32, 128]);
    }

    #[test]
    fn odd_channels_rejected() {
        let mut rng = seeded(9, 0);
        assert!(InceptionRes::new(3, &mut rng).is_err());
    }
}
