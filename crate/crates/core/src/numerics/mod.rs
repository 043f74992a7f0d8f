//! Dense tensors, reverse-mode differentiation, Adam and gradient checking.

mod adam;
mod gradcheck;
pub mod ops;
mod params;
mod tape;
mod tensor;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use gradcheck::{grad_check, BlockError, GradCheckReport};
pub use ops::{
    concat, cosine_similarity, elementwise, group_sum, l2_normalize, matmul, mean_rows, softmax,
    softmax_slice, transpose, BinaryOp, ElementwiseOp, UnaryOp,
};
pub use params::{Gradients, Param, ParamId, ParamStore};
pub use tape::{Tape, Var};
pub use tensor::Tensor;
