//! A small dense-tensor engine for 1-D convolutional networks.
//!
//! Layers cache what they need during [`Layer::forward`] and produce exact
//! gradients in [`Layer::backward`]; parameter gradients accumulate in each
//! [`Param`] until cleared. Everything runs in `f64`.

mod activation;
mod adam;
mod conv;
mod dense;
mod gemm;
pub mod gradcheck;
mod inception;
mod layer;
mod loss;
mod norm;
mod param;
mod tensor;

pub use activation::{LeakyRelu, LEAKY_SLOPE};
pub use adam::Adam;
pub use conv::{mirror_output_padding, Conv1d, ConvTranspose1d};
pub use dense::{Dense, Flatten};
pub use inception::{InceptionRes, INCEPTION_KERNEL};
pub use layer::{Layer, LayerSpec, Sequential};
pub use loss::{smooth_l1, smooth_l1_scalar};
pub use norm::BatchNorm1d;
pub use param::Param;
pub use tensor::Tensor;

/// Whether batch normalisation uses batch statistics (and updates its
/// running estimates) or the running estimates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}
