use alloc::format;
use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;

use super::{Fused, FusedItem};
use crate::embedding::uniform_init;
use crate::error::{Error, Result};
use crate::numerics::{ParamId, ParamStore, Tape, Tensor, Var};

/// Parameters of one attention hop.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StackedHop {
    /// `W_v`, h×d_g
    pub visual: ParamId,
    /// `W_t`, h×d_g
    pub query: ParamId,
    /// `w_p`, length h
    pub score: ParamId,
    /// `b_s`, length h
    pub bias: ParamId,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StackedAttentionParams {
    pub hops: Vec<StackedHop>,
}

impl StackedAttentionParams {
    pub fn init(
        store: &mut ParamStore,
        rng: &mut ChaCha8Rng,
        hops: usize,
        common_dim: usize,
        hidden_dim: usize,
    ) -> Result<Self> {
        if hops == 0 {
            return Err(Error::Config(
                "stacked attention needs at least one hop".into(),
            ));
        }
        let hops = (0..hops)
            .map(|r| StackedHop {
                visual: store.add(
                    format!("stacked.{r}.visual"),
                    uniform_init(rng, &[hidden_dim, common_dim], common_dim),
                ),
                query: store.add(
                    format!("stacked.{r}.query"),
                    uniform_init(rng, &[hidden_dim, common_dim], common_dim),
                ),
                score: store.add(
                    format!("stacked.{r}.score"),
                    uniform_init(rng, &[hidden_dim], hidden_dim),
                ),
                bias: store.add(
                    format!("stacked.{r}.bias"),
                    uniform_init(rng, &[hidden_dim], common_dim),
                ),
            })
            .collect();
        Ok(Self { hops })
    }
}

/// Stacked visual attention. The query starts at the description `t`; hop
/// `r` scores regions with `w_p·tanh(W_v Xᵀ ⊕ (W_t q + b_s))`, attends, and
/// adds the context to the query. Output `[q_R; t]`.
pub fn fuse_stacked_on(
    tape: &mut Tape,
    store: &ParamStore,
    params: &StackedAttentionParams,
    regions: Var,
    description: Var,
) -> Result<Fused> {
    let regions_t = tape.transpose(regions);
    let mut query = description;
    let mut attention = Vec::with_capacity(params.hops.len());
    for hop in &params.hops {
        let w_v = tape.param(store, hop.visual);
        let w_t = tape.param(store, hop.query);
        let w_p = tape.param(store, hop.score);
        let b_s = tape.param(store, hop.bias);
        let visual = tape.matmul(w_v, regions_t)?; // h×N
        let q = tape.matmul(w_t, query)?;
        let q = tape.add(q, b_s)?;
        let joint = tape.add(visual, q)?;
        let joint = tape.tanh(joint);
        let scores = tape.matmul(w_p, joint)?; // N
        let weights = tape.softmax(scores)?;
        let context = tape.matmul(weights, regions)?;
        query = tape.add(query, context)?;
        attention.push(weights);
    }
    let output = tape.concat(&[query, description])?;
    Ok(Fused { output, attention })
}

pub fn fuse_stacked(
    regions: &Tensor,
    description: &Tensor,
    params: &StackedAttentionParams,
    store: &ParamStore,
) -> Result<FusedItem> {
    let mut tape = Tape::new();
    let x = tape.constant(regions.clone());
    let t = tape.constant(description.clone());
    Ok(fuse_stacked_on(&mut tape, store, params, x, t)?.read(&tape))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use rand::SeedableRng;

    #[test]
    fn zero_weights_give_uniform_attention() {
        let mut store = ParamStore::new();
        let hop = StackedHop {
            visual: store.add("v", Tensor::zeros(&[4, 3])),
            query: store.add("q", Tensor::zeros(&[4, 3])),
            score: store.add("p", Tensor::vector(vec![0.3, -0.1, 0.2, 0.9])),
            bias: store.add("b", Tensor::zeros(&[4])),
        };
        let params = StackedAttentionParams { hops: vec![hop] };
        let x = Tensor::matrix(2, 3, vec![1.0, 2.0, 3.0, -1.0, 0.0, 1.0]).unwrap();
        let t = Tensor::vector(vec![0.5, 0.5, 0.5]);
        let fused = fuse_stacked(&x, &t, &params, &store).unwrap();
        assert_eq!(fused.attention[0].data(), &[0.5, 0.5]);
        assert_eq!(fused.vector.data(), &[0.5, 1.5, 2.5, 0.5, 0.5, 0.5]);
    }

    #[test]
    fn init_shapes_and_zero_hops() {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let p = StackedAttentionParams::init(&mut store, &mut rng, 2, 3, 5).unwrap();
        assert_eq!(p.hops.len(), 2);
        assert_eq!(store.get(p.hops[1].visual).shape(), &[5, 3]);
        assert!(StackedAttentionParams::init(&mut store, &mut rng, 0, 3, 5).is_err());
    }
}
