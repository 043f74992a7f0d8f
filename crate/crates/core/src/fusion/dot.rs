use alloc::vec;

use super::{Fused, FusedItem};
use crate::error::Result;
use crate::numerics::{Tape, Tensor, Var};

/// Visual dot-product attention: `a_i = tanh(x_i)·tanh(t)`, `α = softmax(a)`,
/// `c = Σ α_i x_i`, output `[c; t]`.
pub fn fuse_dot_product_on(tape: &mut Tape, regions: Var, description: Var) -> Result<Fused> {
    let tx = tape.tanh(regions);
    let tt = tape.tanh(description);
    let scores = tape.matmul(tx, tt)?;
    let weights = tape.softmax(scores)?;
    let context = tape.matmul(weights, regions)?;
    let output = tape.concat(&[context, description])?;
    Ok(Fused {
        output,
        attention: vec![weights],
    })
}

/// `regions` is N×d_g, `description` the pooled d_g description vector.
pub fn fuse_dot_product(regions: &Tensor, description: &Tensor) -> Result<FusedItem> {
    let mut tape = Tape::new();
    let x = tape.constant(regions.clone());
    let t = tape.constant(description.clone());
    Ok(fuse_dot_product_on(&mut tape, x, t)?.read(&tape))
}
