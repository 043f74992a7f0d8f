//! Independent reference implementations written with plain loops over
//! slices, plus small fixtures shared by the integration suites.
#![allow(dead_code)]

use std::collections::BTreeSet;

use outfitfuse_core::dataset::{
    Dataset, Dims, FitbQuestion, Item, ItemId, Outfit, Split, TypePair, TypeVocab,
};
use outfitfuse_core::fusion::{CoAttentionParams, StackedAttentionParams};
use outfitfuse_core::model::{FusionKind, Model, ModelConfig};
use outfitfuse_core::numerics::{ParamStore, Tensor};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn random_tensor(rng: &mut ChaCha8Rng, shape: &[usize], scale: f64) -> Tensor {
    Tensor::from_fn(shape, |_| rng.random_range(-scale..scale))
}

pub fn naive_matmul(a: &[f64], m: usize, k: usize, b: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        for j in 0..n {
            let mut acc = 0.0;
            for p in 0..k {
                acc += a[i * k + p] * b[p * n + j];
            }
            out[i * n + j] = acc;
        }
    }
    out
}

/// `W x` for a row-major matrix `w` and a plain vector.
pub fn mat_vec(w: &Tensor, x: &[f64]) -> Vec<f64> {
    let (rows, cols) = (w.rows(), w.cols());
    assert_eq!(cols, x.len());
    (0..rows)
        .map(|r| (0..cols).map(|c| w.data()[r * cols + c] * x[c]).sum())
        .collect()
}

pub fn softmax_direct(a: &[f64]) -> Vec<f64> {
    let e: Vec<f64> = a.iter().map(|v| v.exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|v| v / s).collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    dot(a, b) / (dot(a, a).sqrt() * dot(b, b).sqrt())
}

pub fn weighted_rows(rows: &[Vec<f64>], weights: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; rows[0].len()];
    for (row, w) in rows.iter().zip(weights) {
        for (o, v) in out.iter_mut().zip(row) {
            *o += w * v;
        }
    }
    out
}

pub fn rows_of(t: &Tensor) -> Vec<Vec<f64>> {
    (0..t.rows()).map(|r| t.row(r).to_vec()).collect()
}

pub fn triplet(a: &[f64], p: &[f64], n: &[f64], m: f64) -> f64 {
    (cosine(a, n) - cosine(a, p) + m).max(0.0)
}

/// Expand, multiply, sum groups of `p`, signed sqrt, L2 normalize.
pub fn mfb_oracle(x: &[f64], y: &[f64], u: &Tensor, v: &Tensor, p: usize) -> Vec<f64> {
    let ux = mat_vec(u, x);
    let vy = mat_vec(v, y);
    let out_dim = ux.len() / p;
    let mut s = vec![0.0; out_dim];
    for k in 0..out_dim {
        for q in 0..p {
            s[k] += ux[k * p + q] * vy[k * p + q];
        }
    }
    let r: Vec<f64> = s.iter().map(|v| v.signum() * v.abs().sqrt()).collect();
    let norm = dot(&r, &r).sqrt();
    if norm < 1e-12 {
        vec![0.0; out_dim]
    } else {
        r.iter().map(|v| v / norm).collect()
    }
}

pub fn stacked_oracle(
    x: &Tensor,
    t: &[f64],
    params: &StackedAttentionParams,
    store: &ParamStore,
) -> (Vec<f64>, Vec<Vec<f64>>) {
    let rows = rows_of(x);
    let mut q = t.to_vec();
    let mut weights = Vec::new();
    for hop in &params.hops {
        let wv = store.get(hop.visual);
        let wt = store.get(hop.query);
        let wp = store.get(hop.score).data();
        let bs = store.get(hop.bias).data();
        let query: Vec<f64> = mat_vec(wt, &q).iter().zip(bs).map(|(a, b)| a + b).collect();
        let scores: Vec<f64> = rows
            .iter()
            .map(|x_i| {
                let v = mat_vec(wv, x_i);
                v.iter()
                    .zip(&query)
                    .zip(wp)
                    .map(|((vi, qi), w)| w * (vi + qi).tanh())
                    .sum()
            })
            .collect();
        let alpha = softmax_direct(&scores);
        let c = weighted_rows(&rows, &alpha);
        for (qi, ci) in q.iter_mut().zip(&c) {
            *qi += ci;
        }
        weights.push(alpha);
    }
    let mut out = q;
    out.extend_from_slice(t);
    (out, weights)
}

fn conv_scores(rows: &[Vec<f64>], w1: &Tensor, b1: &[f64], w2: &[f64]) -> Vec<f64> {
    rows.iter()
        .map(|r| {
            let h = mat_vec(w1, r);
            h.iter()
                .zip(b1)
                .zip(w2)
                .map(|((hi, bi), wi)| wi * (hi + bi).max(0.0))
                .sum()
        })
        .collect()
}

pub type CoAttentionTrace = (Vec<f64>, Vec<f64>, Vec<(Vec<f64>, Vec<f64>)>);

/// Returns the fused vector, the textual context, and per hop the visual
/// weights and context.
pub fn coattention_oracle(
    x: &Tensor,
    y: &Tensor,
    params: &CoAttentionParams,
    store: &ParamStore,
) -> CoAttentionTrace {
    let words = rows_of(y);
    let a_t = conv_scores(
        &words,
        store.get(params.text.conv1),
        store.get(params.text.bias1).data(),
        store.get(params.text.conv2).data(),
    );
    let c_t = weighted_rows(&words, &softmax_direct(&a_t));
    let merged: Vec<Vec<f64>> = rows_of(x)
        .iter()
        .map(|x_i| {
            mfb_oracle(
                x_i,
                &c_t,
                store.get(params.region_mfb.expand_x),
                store.get(params.region_mfb.expand_y),
                params.factor,
            )
        })
        .collect();
    let mut hops = Vec::new();
    let mut stacked = Vec::new();
    for hop in &params.hops {
        let a = conv_scores(
            &merged,
            store.get(hop.conv1),
            store.get(hop.bias1).data(),
            store.get(hop.conv2).data(),
        );
        let alpha = softmax_direct(&a);
        let c = weighted_rows(&merged, &alpha);
        stacked.extend_from_slice(&c);
        hops.push((alpha, c));
    }
    let c_v = mat_vec(store.get(params.fuse), &stacked);
    let out = mfb_oracle(
        &c_v,
        &c_t,
        store.get(params.final_mfb.expand_x),
        store.get(params.final_mfb.expand_y),
        params.factor,
    );
    (out, c_t, hops)
}

/// Mann–Whitney statistic by comparing every positive with every negative.
pub fn auc_oracle(scored: &[(f64, bool)]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for p in scored.iter().filter(|s| s.1) {
        for n in scored.iter().filter(|s| !s.1) {
            pairs += 1.0;
            if p.0 > n.0 {
                wins += 1.0;
            } else if p.0 == n.0 {
                wins += 0.5;
            }
        }
    }
    wins / pairs
}

/// Candidate with the highest summed pair score, scanning all 4×|partial| pairs.
pub fn fitb_oracle(q: &FitbQuestion, model: &Model, ds: &Dataset) -> (usize, [f64; 4]) {
    let mut totals = [0.0; 4];
    for (c, &cand) in q.candidates.iter().enumerate() {
        for &p in &q.partial {
            if let Some(s) = model.pair_score(ds.item(cand), ds.item(p)).unwrap() {
                totals[c] += s;
            }
        }
    }
    let mut best = 0;
    for c in 1..4 {
        if totals[c] > totals[best] {
            best = c;
        }
    }
    (best, totals)
}

pub fn small_config(kind: FusionKind, d: usize) -> ModelConfig {
    ModelConfig {
        fusion: kind,
        common_dim: d,
        compat_dim: d,
        hidden_dim: d,
        hops: 2,
        factor: 2,
    }
}

pub fn random_item(rng: &mut ChaCha8Rng, name: String, kind: usize, dims: Dims) -> Item {
    Item {
        name,
        kind,
        regions: random_tensor(rng, &[dims.regions, dims.region_dim], 1.0),
        words: Some(random_tensor(rng, &[dims.words, dims.word_dim], 1.0)),
        description: Some("text".into()),
    }
}

/// `types` types, `items_per_type` random items each, and training outfits
/// pairing consecutive types so every adjacent pair is trained.
pub fn random_dataset(
    rng: &mut ChaCha8Rng,
    dims: Dims,
    types: usize,
    items_per_type: usize,
) -> Dataset {
    let vocab = TypeVocab::new((0..types).map(|t| format!("t{t}"))).unwrap();
    let mut items = Vec::new();
    for t in 0..types {
        for i in 0..items_per_type {
            items.push(random_item(rng, format!("t{t}_{i}"), t, dims));
        }
    }
    let mut outfits = Vec::new();
    for i in 0..items_per_type {
        for t in 0..types - 1 {
            outfits.push(Outfit {
                name: format!("o{t}_{i}"),
                items: vec![
                    ItemId(t * items_per_type + i),
                    ItemId((t + 1) * items_per_type + i),
                ],
                split: Split::Train,
            });
        }
    }
    Dataset::new(vocab, dims, items, outfits).unwrap()
}

pub fn all_pairs(types: usize) -> BTreeSet<TypePair> {
    let mut s = BTreeSet::new();
    for a in 0..types {
        for b in a..types {
            s.insert(TypePair::new(a, b));
        }
    }
    s
}

fn project_rows(t: &Tensor, w: &Tensor) -> Tensor {
    Tensor::from_rows(&rows_of(t).iter().map(|r| mat_vec(w, r)).collect::<Vec<_>>()).unwrap()
}

fn mean_of_rows(t: &Tensor) -> Vec<f64> {
    let rows = rows_of(t);
    weighted_rows(&rows, &vec![1.0 / rows.len() as f64; rows.len()])
}

/// Item representation recomputed from the raw features and the model's
/// parameter values.
pub fn representation_oracle(model: &Model, item: &Item) -> Vec<f64> {
    use outfitfuse_core::model::FusionParams;
    let store = &model.store;
    let x = project_rows(&item.regions, store.get(model.layout.projector.image));
    let y = project_rows(
        item.words.as_ref().unwrap(),
        store.get(model.layout.projector.text),
    );
    let t = mean_of_rows(&y);
    match (&model.config().fusion, &model.layout.fusion) {
        (FusionKind::Baseline, _) => mean_of_rows(&x),
        (FusionKind::DotProduct, _) => {
            let rows = rows_of(&x);
            let tt: Vec<f64> = t.iter().map(|v| v.tanh()).collect();
            let scores: Vec<f64> = rows
                .iter()
                .map(|r| r.iter().zip(&tt).map(|(a, b)| a.tanh() * b).sum())
                .collect();
            let mut out = weighted_rows(&rows, &softmax_direct(&scores));
            out.extend_from_slice(&t);
            out
        }
        (FusionKind::Stacked, FusionParams::Stacked(p)) => stacked_oracle(&x, &t, p, store).0,
        (FusionKind::CoAttention, FusionParams::CoAttention(p)) => {
            coattention_oracle(&x, &y, p, store).0
        }
        _ => unreachable!(),
    }
}

pub fn pair_score_oracle(model: &Model, a: &Item, b: &Item) -> Option<f64> {
    let w = model.store.get(model.layout.spaces.get(a.kind, b.kind)?);
    Some(cosine(
        &mat_vec(w, &representation_oracle(model, a)),
        &mat_vec(w, &representation_oracle(model, b)),
    ))
}

pub fn tiny_dims() -> Dims {
    Dims {
        regions: 4,
        words: 3,
        region_dim: 6,
        word_dim: 5,
    }
}
