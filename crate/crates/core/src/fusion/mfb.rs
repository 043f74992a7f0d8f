use alloc::format;

use rand_chacha::ChaCha8Rng;

use crate::embedding::uniform_init;
use crate::error::{Error, Result};
use crate::numerics::{ParamId, ParamStore, Tape, Tensor, Var};

/// Expand maps `U` (p·k×d_a) and `V` (p·k×d_b) of a factorized bilinear pooling.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MfbParams {
    pub expand_x: ParamId,
    pub expand_y: ParamId,
}

impl MfbParams {
    pub fn init(
        store: &mut ParamStore,
        rng: &mut ChaCha8Rng,
        name: &str,
        out_dim: usize,
        factor: usize,
        x_dim: usize,
        y_dim: usize,
    ) -> Self {
        let wide = out_dim * factor;
        Self {
            expand_x: store.add(
                format!("{name}.expand_x"),
                uniform_init(rng, &[wide, x_dim], x_dim),
            ),
            expand_y: store.add(
                format!("{name}.expand_y"),
                uniform_init(rng, &[wide, y_dim], y_dim),
            ),
        }
    }

    pub fn out_dim(&self, store: &ParamStore, factor: usize) -> usize {
        store.get(self.expand_x).rows() / factor
    }
}

/// `z = (Ux) ⊙ (Vy)`, sum-pooled over groups of `factor`, then signed square
/// root and L2 normalization. `x` may be a d_a×N matrix whose columns are
/// merged independently with the same `y`.
pub fn mfb_on(
    tape: &mut Tape,
    store: &ParamStore,
    params: &MfbParams,
    factor: usize,
    x: Var,
    y: Var,
) -> Result<Var> {
    if factor == 0 {
        return Err(Error::domain("mfb", "factor must be at least 1"));
    }
    if tape.value(y).rank() != 1 {
        return Err(Error::domain("mfb", "second operand must be a vector"));
    }
    let u = tape.param(store, params.expand_x);
    let v = tape.param(store, params.expand_y);
    let ux = tape.matmul(u, x)?;
    let vy = tape.matmul(v, y)?;
    let z = tape.mul(ux, vy)?;
    let pooled = tape.group_sum(z, factor)?;
    let rooted = tape.signed_sqrt(pooled);
    Ok(tape.l2_normalize(rooted))
}

pub fn mfb(
    x: &Tensor,
    y: &Tensor,
    params: &MfbParams,
    factor: usize,
    store: &ParamStore,
) -> Result<Tensor> {
    let mut tape = Tape::new();
    let xv = tape.constant(x.clone());
    let yv = tape.constant(y.clone());
    let out = mfb_on(&mut tape, store, params, factor, xv, yv)?;
    Ok(tape.value(out).clone())
}
