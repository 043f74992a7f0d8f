//! Attention-based fusion of region features with description or word
//! features into a `2·d_g` multimodal item representation.
//!
//! Each mechanism has a tape-level form (`*_on`) used for training and a
//! value-level form that runs the same code on a scratch tape.

mod coattention;
mod dot;
mod mfb;
mod stacked;

use alloc::vec::Vec;

use crate::numerics::{Tape, Tensor, Var};

pub use coattention::{
    attend_text, attend_text_on, fuse_coattention, fuse_coattention_on, CoAttentionParams,
    VisualConv,
};
pub use dot::{fuse_dot_product, fuse_dot_product_on};
pub use mfb::{mfb, mfb_on, MfbParams};
pub use stacked::{fuse_stacked, fuse_stacked_on, StackedAttentionParams, StackedHop};

/// Multimodal item representation with the attention weights that produced
/// it (one vector per hop; for co-attention the textual weights come first).
#[derive(Debug, Clone, PartialEq)]
pub struct FusedItem {
    pub vector: Tensor,
    pub attention: Vec<Tensor>,
}

/// Tape handles for a fused representation and its attention weights.
#[derive(Debug, Clone)]
pub struct Fused {
    pub output: Var,
    pub attention: Vec<Var>,
}

impl Fused {
    pub(crate) fn read(&self, tape: &Tape) -> FusedItem {
        FusedItem {
            vector: tape.value(self.output).clone(),
            attention: self
                .attention
                .iter()
                .map(|&a| tape.value(a).clone())
                .collect(),
        }
    }
}
