use alloc::format;
use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;

use super::mfb::{mfb_on, MfbParams};
use super::{Fused, FusedItem};
use crate::embedding::uniform_init;
use crate::error::{Error, Result};
use crate::numerics::{ParamId, ParamStore, Tape, Tensor, Var};

/// Two-layer kernel-1 convolution producing one score per position:
/// `w₂ · relu(W₁ x + b₁)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VisualConv {
    pub conv1: ParamId,
    pub bias1: ParamId,
    pub conv2: ParamId,
}

impl VisualConv {
    fn init(
        store: &mut ParamStore,
        rng: &mut ChaCha8Rng,
        name: &str,
        in_dim: usize,
        hidden: usize,
    ) -> Self {
        Self {
            conv1: store.add(
                format!("{name}.conv1"),
                uniform_init(rng, &[hidden, in_dim], in_dim),
            ),
            bias1: store.add(
                format!("{name}.bias1"),
                uniform_init(rng, &[hidden], in_dim),
            ),
            conv2: store.add(
                format!("{name}.conv2"),
                uniform_init(rng, &[hidden], hidden),
            ),
        }
    }

    /// `features` holds one position per column.
    fn scores(&self, tape: &mut Tape, store: &ParamStore, features: Var) -> Result<Var> {
        let w1 = tape.param(store, self.conv1);
        let b1 = tape.param(store, self.bias1);
        let w2 = tape.param(store, self.conv2);
        let h = tape.matmul(w1, features)?;
        let h = tape.add(h, b1)?;
        let h = tape.relu(h);
        tape.matmul(w2, h)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoAttentionParams {
    /// d_g→d_g→1 over word positions.
    pub text: VisualConv,
    /// One 2d_g→d_g→1 stack per hop over merged region positions.
    pub hops: Vec<VisualConv>,
    /// Merges each region with the textual context, p·2d_g expansion.
    pub region_mfb: MfbParams,
    /// Merges the visual context `c^v` with the textual context.
    pub final_mfb: MfbParams,
    /// `W_f`, 2d_g×R·2d_g.
    pub fuse: ParamId,
    pub factor: usize,
}

impl CoAttentionParams {
    pub fn init(
        store: &mut ParamStore,
        rng: &mut ChaCha8Rng,
        hops: usize,
        factor: usize,
        common_dim: usize,
    ) -> Result<Self> {
        if hops == 0 || factor == 0 {
            return Err(Error::Config(
                "co-attention needs at least one hop and factor ≥ 1".into(),
            ));
        }
        let d = common_dim;
        let text = VisualConv::init(store, rng, "coatt.text", d, d);
        let hops_v = (0..hops)
            .map(|r| VisualConv::init(store, rng, &format!("coatt.hop{r}"), 2 * d, d))
            .collect();
        let region_mfb = MfbParams::init(store, rng, "coatt.region_mfb", 2 * d, factor, d, d);
        let final_mfb = MfbParams::init(store, rng, "coatt.final_mfb", 2 * d, factor, 2 * d, d);
        let fuse = store.add(
            "coatt.fuse",
            uniform_init(rng, &[2 * d, hops * 2 * d], hops * 2 * d),
        );
        Ok(Self {
            text,
            hops: hops_v,
            region_mfb,
            final_mfb,
            fuse,
            factor,
        })
    }
}

/// Textual attention independent of the regions; returns `(c^t, α^t)`.
pub fn attend_text_on(
    tape: &mut Tape,
    store: &ParamStore,
    params: &CoAttentionParams,
    words: Var,
) -> Result<(Var, Var)> {
    let cols = tape.transpose(words);
    let scores = params.text.scores(tape, store, cols)?;
    let weights = tape.softmax(scores)?;
    let context = tape.matmul(weights, words)?;
    Ok((context, weights))
}

pub fn attend_text(
    words: &Tensor,
    params: &CoAttentionParams,
    store: &ParamStore,
) -> Result<Tensor> {
    let mut tape = Tape::new();
    let y = tape.constant(words.clone());
    let (c, _) = attend_text_on(&mut tape, store, params, y)?;
    Ok(tape.value(c).clone())
}

/// Co-attention over regions (N×d_g) and words (M×d_g). Attention outputs
/// are the textual weights followed by one visual weight vector per hop.
pub fn fuse_coattention_on(
    tape: &mut Tape,
    store: &ParamStore,
    params: &CoAttentionParams,
    regions: Var,
    words: Var,
) -> Result<Fused> {
    let (text_context, text_weights) = attend_text_on(tape, store, params, words)?;
    let region_cols = tape.transpose(regions);
    // 2d_g×N, one merged feature per region column
    let merged = mfb_on(
        tape,
        store,
        &params.region_mfb,
        params.factor,
        region_cols,
        text_context,
    )?;
    let mut attention = Vec::with_capacity(params.hops.len() + 1);
    attention.push(text_weights);
    let mut contexts = Vec::with_capacity(params.hops.len());
    for hop in &params.hops {
        let scores = hop.scores(tape, store, merged)?;
        let weights = tape.softmax(scores)?;
        contexts.push(tape.matmul(merged, weights)?);
        attention.push(weights);
    }
    let stacked = tape.concat(&contexts)?;
    let w_f = tape.param(store, params.fuse);
    let visual_context = tape.matmul(w_f, stacked)?;
    let output = mfb_on(
        tape,
        store,
        &params.final_mfb,
        params.factor,
        visual_context,
        text_context,
    )?;
    Ok(Fused { output, attention })
}

pub fn fuse_coattention(
    regions: &Tensor,
    words: &Tensor,
    params: &CoAttentionParams,
    store: &ParamStore,
) -> Result<FusedItem> {
    let mut tape = Tape::new();
    let x = tape.constant(regions.clone());
    let y = tape.constant(words.clone());
    Ok(fuse_coattention_on(&mut tape, store, params, x, y)?.read(&tape))
}
