//! Dense `f32` tensors with reverse-mode automatic differentiation.
//!
//! The op set is exactly what a Conformer-style audio classifier needs:
//! matrix products, 2-D and depthwise 1-D convolution, layer/batch norm,
//! multi-head attention, softmax, sequence pooling and a handful of
//! pointwise activations. Matrix products go through `matrixmultiply`.

mod error;
pub mod ops;
pub mod optim;
pub mod param;
pub mod rng;
mod tensor;

pub use error::{Result, TensorError};
pub use ops::{softplus_scalar, BatchNormState, BatchStats, Mode, DEFAULT_EPS};
pub use optim::Adam;
pub use param::{Init, ParamId, ParamStore, Parameter};
pub use tensor::{grad_enabled, no_grad, BackwardFn, Tensor};
