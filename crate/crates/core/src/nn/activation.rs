use alloc::vec::Vec;

use super::Tensor;

pub const LEAKY_SLOPE: f64 = 0.2;

/// Leaky ReLU with a fixed negative slope of 0.2.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LeakyRelu {
    mask: Option<Vec<bool>>,
}

#[inline]
pub(crate) fn leaky(v: f64) -> f64 {
    if v >= 0.0 {
        v
    } else {
        LEAKY_SLOPE * v
    }
}

impl LeakyRelu {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn infer(&self, x: &Tensor) -> Tensor {
        let mut y = x.clone();
        y.data_mut().iter_mut().for_each(|v| *v = leaky(*v));
        y
    }

    pub fn forward(&mut self, x: &Tensor) -> Tensor {
        self.mask = Some(x.data().iter().map(|v| *v >= 0.0).collect());
        self.infer(x)
    }

    /// Which inputs of the last training forward pass were non-negative.
    pub fn pattern(&self) -> Option<&[bool]> {
        self.mask.as_deref()
    }

    pub fn backward(&mut self, dy: &Tensor) -> Tensor {
        let mask = self.mask.as_ref().expect("LeakyRelu::backward before forward");
        let mut dx = dy.clone();
        dx.data_mut()
            .iter_mut()
            .zip(mask)
            .for_each(|(d, &pos)| if !pos { *d *= LEAKY_SLOPE });
        dx
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_values() {
        let x = Tensor::new(&[1, 1, 3], alloc::vec![1.0, -1.0, 0.0]).unwrap();
        assert_eq!(LeakyRelu::new().infer(&x).data(), &[1.0, -0.2, 0.0]);
    }
}
