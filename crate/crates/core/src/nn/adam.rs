#[allow(unused_imports)] // unused when std is linked: its inherent float methods take precedence
use num_traits::Float;

use super::Param;

/// Adam with bias-corrected moment estimates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for Adam {
    fn default() -> Self {
        Self { beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

impl Adam {
    pub fn step_param(&self, p: &mut Param, lr: f64) {
        let n = p.value.len();
        if p.m.len() != n {
            p.m = alloc::vec![0.0; n];
            p.v = alloc::vec![0.0; n];
        }
        p.step += 1;
        let t = p.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
        let values = p.value.data_mut();
        let grads = p.grad.data();
        for i in 0..n {
            let g = grads[i];
            let m = b1 * p.m[i] + (1.0 - b1) * g;
            let v = b2 * p.v[i] + (1.0 - b2) * g * g;
            p.m[i] = m;
            p.v[i] = v;
            values[i] -= lr * (m / c1) / ((v / c2).sqrt() + eps);
        }
    }

    pub fn step<'a>(&self, params: impl IntoIterator<Item = &'a mut Param>, lr: f64) {
        for p in params {
            self.step_param(p, lr);
        }
    }
}
