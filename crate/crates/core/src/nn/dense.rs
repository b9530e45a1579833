use rand::Rng;

use super::gemm::{gemm, Mat, MatMut};
use super::{Param, Tensor};
use crate::{Error, Result};

/// Fully connected layer: `y = x W^T + b`, weight `(out, in)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weight: Param,
    pub bias: Param,
    cache: Option<Tensor>,
}

impl Dense {
    pub fn new<R: Rng>(n_in: usize, n_out: usize, rng: &mut R) -> Self {
        Self { weight: Param::kaiming(&[n_out, n_in], n_in, rng), bias: Param::zeros(&[n_out]), cache: None }
    }

    pub fn from_tensors(weight: Tensor, bias: Tensor) -> Result<Self> {
        match (weight.shape(), bias.shape()) {
            ([m, _], [mb]) if m == mb => Ok(Self { weight: Param::new(weight), bias: Param::new(bias), cache: None }),
            _ => Err(Error::Shape {
                expected: "weight (out, in), bias (out)".into(),
                got: alloc::format!("{:?}, {:?}", weight.shape(), bias.shape()),
            }),
        }
    }

    pub fn n_in(&self) -> usize {
        self.weight.value.shape()[1]
    }

    pub fn n_out(&self) -> usize {
        self.weight.value.shape()[0]
    }

    pub fn infer(&self, x: &Tensor) -> Result<Tensor> {
        let (n_in, n_out) = (self.n_in(), self.n_out());
        let b = match x.shape() {
            [b, n] if *n == n_in => *b,
            s => {
                return Err(Error::Shape {
                    expected: alloc::format!("(B, {n_in})"),
                    got: alloc::format!("{:?}", s),
                })
            }
        };
        let mut y = Tensor::zeros(&[b, n_out]);
        for row in y.data_mut().chunks_mut(n_out) {
            row.copy_from_slice(self.bias.value.data());
        }
        gemm(
            b,
            n_in,
            n_out,
            1.0,
            Mat { data: x.data(), offset: 0, rs: n_in, cs: 1 },
            Mat { data: self.weight.value.data(), offset: 0, rs: 1, cs: n_in },
            1.0,
            MatMut { data: y.data_mut(), offset: 0, rs: n_out, cs: 1 },
        );
        Ok(y)
    }

    pub fn forward(&mut self, x: &Tensor) -> Result<Tensor> {
        let y = self.infer(x)?;
        self.cache = Some(x.clone());
        Ok(y)
    }

    pub fn backward(&mut self, dy: &Tensor) -> Tensor {
        let x = self.cache.as_ref().expect("Dense::backward before forward");
        let (n_in, n_out) = (self.n_in(), self.n_out());
        let b = x.shape()[0];
        for row in dy.data().chunks(n_out) {
            for (g, d) in self.bias.grad.data_mut().iter_mut().zip(row) {
                *g += d;
            }
        }
        gemm(
            n_out,
            b,
            n_in,
            1.0,
            Mat { data: dy.data(), offset: 0, rs: 1, cs: n_out },
            Mat { data: x.data(), offset: 0, rs: n_in, cs: 1 },
            1.0,
            MatMut { data: self.weight.grad.data_mut(), offset: 0, rs: n_in, cs: 1 },
        );
        let mut dx = Tensor::zeros(&[b, n_in]);
        gemm(
            b,
            n_out,
            n_in,
            1.0,
            Mat { data: dy.data(), offset: 0, rs: n_out, cs: 1 },
            Mat { data: self.weight.value.data(), offset: 0, rs: n_in, cs: 1 },
            0.0,
            MatMut { data: dx.data_mut(), offset: 0, rs: n_in, cs: 1 },
        );
        dx
    }

    pub fn params(&self) -> [&Param; 2] {
        [&self.weight, &self.bias]
    }

    pub fn params_mut(&mut self) -> [&mut Param; 2] {
        [&mut self.weight, &mut self.bias]
    }
}

/// `(B, C, L)` to `(B, C * L)`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Flatten {
    input_shape: Option<alloc::vec::Vec<usize>>,
}

impl Flatten {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn infer(&self, x: &Tensor) -> Result<Tensor> {
        let b = *x.shape().first().ok_or_else(|| Error::Shape { expected: "(B, ...)".into(), got: "[]".into() })?;
        let rest = if b == 0 { 0 } else { x.len() / b };
        x.clone().reshape(&[b, rest])
    }

    pub fn forward(&mut self, x: &Tensor) -> Result<Tensor> {
        self.input_shape = Some(x.shape().to_vec());
        self.infer(x)
    }

    pub fn backward(&mut self, dy: &Tensor) -> Tensor {
        let shape = self.input_shape.as_ref().expect("Flatten::backward before forward");
        dy.clone().reshape(shape).unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn identity_weights_pass_input_through() {
        let mut w = Tensor::zeros(&[3, 3]);
        for i in 0..3 {
            w.data_mut()[i * 3 + i] = 1.0;
        }
        let d = Dense::from_tensors(w, Tensor::zeros(&[3])).unwrap();
        let x = Tensor::new(&[2, 3], vec![1.0, -2.0, 3.0, 0.5, 0.0, 9.0]).unwrap();
        assert_eq!(d.infer(&x).unwrap(), x);
    }

    #[test]
    fn dot_product_example() {
        let d = Dense::from_tensors(Tensor::filled(&[1, 4], 1.0), Tensor::filled(&[1], 0.5)).unwrap();
        let x = Tensor::new(&[1, 4], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(d.infer(&x).unwrap().data(), &[10.5]);
        assert_eq!(d.weight.len() + d.bias.len(), 5);
    }
}
