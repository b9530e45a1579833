use alloc::vec::Vec;

use rand::Rng;

use super::Tensor;

/// A trainable tensor with its gradient and Adam moments.
#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub value: Tensor,
    pub grad: Tensor,
    /// First and second moment estimates; allocated on the first update.
    pub(crate) m: Vec<f64>,
    pub(crate) v: Vec<f64>,
    pub step: u64,
}

impl Param {
    pub fn new(value: Tensor) -> Self {
        let grad = Tensor::zeros(value.shape());
        Self { value, grad, m: Vec::new(), v: Vec::new(), step: 0 }
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::new(Tensor::zeros(shape))
    }

    pub fn filled(shape: &[usize], value: f64) -> Self {
        Self::new(Tensor::filled(shape, value))
    }

    /// Uniform in `[-bound, bound]`.
    pub fn uniform<R: Rng>(shape: &[usize], bound: f64, rng: &mut R) -> Self {
        let n = shape.iter().product();
        let data = (0..n).map(|_| rng.random_range(-bound..=bound)).collect();
        Self::new(Tensor::new(shape, data).expect("shape product"))
    }

    /// Kaiming-uniform for fan-in `fan_in` (gain for rectifiers).
    pub fn kaiming<R: Rng>(shape: &[usize], fan_in: usize, rng: &mut R) -> Self {
        let bound = libm::sqrt(6.0 / fan_in as f64);
        Self::uniform(shape, bound, rng)
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
    }

    pub fn moments(&self) -> (&[f64], &[f64]) {
        (&self.m, &self.v)
    }
}
