//! Dense numerics for the convolutional models: matrices, text convolution,
//! pooling, dropout, softmax cross-entropy, SGD and finite-difference gradient
//! checks. Everything runs in 64-bit floats.

mod gradcheck;
mod matrix;
mod ops;

pub use gradcheck::{check_gradients, GradCheckReport};
pub use matrix::Matrix;
pub(crate) use matrix::matmul_bt;
pub use ops::{
    clip_global_norm, conv1d, dot, dropout, dropout_mask, max_over_time, rowwise_max, sgd_step,
    sigmoid, softmax_xent, Activation, ConvFilter, Mode, SoftmaxXent,
};
