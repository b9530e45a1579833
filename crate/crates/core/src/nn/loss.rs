use super::Tensor;
use crate::{Error, Result};

/// SmoothL1 between `pred` and `target`: `0.5 d^2` for `|d| < 1`, else
/// `|d| - 0.5`, summed over elements and averaged over the leading (batch)
/// dimension. Returns the loss and its gradient with respect to `pred`
/// (`clamp(d, -1, 1)` under the same reduction; the linear branch is used
/// at `|d| = 1`).
pub fn smooth_l1(pred: &Tensor, target: &Tensor) -> Result<(f64, Tensor)> {
    if pred.shape() != target.shape() {
        return Err(Error::Shape {
            expected: alloc::format!("{:?}", pred.shape()),
            got: alloc::format!("{:?}", target.shape()),
        });
    }
    let batch = pred.shape().first().copied().unwrap_or(1).max(1) as f64;
    let mut grad = Tensor::zeros(pred.shape());
    let mut total = 0.0;
    for ((g, p), t) in grad.data_mut().iter_mut().zip(pred.data()).zip(target.data()) {
        let d = p - t;
        let (value, slope) = smooth_l1_scalar(d);
        total += value;
        *g = slope / batch;
    }
    Ok((total / batch, grad))
}

/// Value and derivative of the elementwise SmoothL1 at difference `d`.
pub fn smooth_l1_scalar(d: f64) -> (f64, f64) {
    let a = libm::fabs(d);
    if a < 1.0 {
        (0.5 * d * d, d)
    } else {
        (a - 0.5, if d > 0.0 { 1.0 } else { -1.0 })
    }
}
