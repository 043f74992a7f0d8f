//! Type-pair compatibility spaces, pairwise scoring and the training losses.
//!
//! Loss functions take embeddings that are already in the common space (or
//! fused), ordered as `[anchor, positive, negative]`.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;

use crate::dataset::{TypeId, TypePair};
use crate::embedding::uniform_init;
use crate::error::{Error, Result};
use crate::numerics::{self, ParamId, ParamStore, Tape, Tensor, Var};

/// `λ1` (visual similarity), `λ2` (textual similarity), `λ3` (visual-semantic)
/// and the triplet margin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub vsim: f64,
    pub tsim: f64,
    pub vse: f64,
    pub margin: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            vsim: 5e-5,
            tsim: 5e-5,
            vse: 5e-3,
            margin: 0.2,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        if !(self.margin > 0.0 && self.margin.is_finite()) {
            return Err(Error::Config(format!(
                "margin must be positive, got {}",
                self.margin
            )));
        }
        for (name, v) in [("vsim", self.vsim), ("tsim", self.tsim), ("vse", self.vse)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!(
                    "loss weight {name} must be non-negative, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// One `W_c` (d_c×d_in) per unordered type pair seen in training.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TypePairSpaces {
    spaces: BTreeMap<TypePair, ParamId>,
}

impl TypePairSpaces {
    pub fn init(
        store: &mut ParamStore,
        rng: &mut ChaCha8Rng,
        pairs: impl IntoIterator<Item = TypePair>,
        compat_dim: usize,
        input_dim: usize,
    ) -> Self {
        let spaces = pairs
            .into_iter()
            .map(|p| {
                let name = format!("space.{}.{}", p.low(), p.high());
                (
                    p,
                    store.add(name, uniform_init(rng, &[compat_dim, input_dim], input_dim)),
                )
            })
            .collect();
        Self { spaces }
    }

    pub fn from_map(spaces: BTreeMap<TypePair, ParamId>) -> Self {
        Self { spaces }
    }

    pub fn get(&self, a: TypeId, b: TypeId) -> Option<ParamId> {
        self.spaces.get(&TypePair::new(a, b)).copied()
    }

    pub fn contains(&self, pair: &TypePair) -> bool {
        self.spaces.contains_key(pair)
    }

    pub fn pairs(&self) -> impl Iterator<Item = TypePair> + '_ {
        self.spaces.keys().copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (TypePair, ParamId)> + '_ {
        self.spaces.iter().map(|(&p, &id)| (p, id))
    }

    pub fn len(&self) -> usize {
        self.spaces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spaces.is_empty()
    }

    fn require(&self, a: TypeId, b: TypeId) -> Result<ParamId> {
        self.get(a, b)
            .ok_or(Error::UnseenTypePair(a.min(b), a.max(b)))
    }
}

/// `max(0, f(a, n) − f(a, p) + m)` with cosine `f`.
pub fn triplet_loss(
    anchor: &Tensor,
    positive: &Tensor,
    negative: &Tensor,
    margin: f64,
) -> Result<f64> {
    let pos = numerics::cosine_similarity(anchor, positive)?;
    let neg = numerics::cosine_similarity(anchor, negative)?;
    let gap = neg - pos + margin;
    Ok(if gap > 0.0 || gap.is_nan() { gap } else { 0.0 })
}

pub fn triplet_loss_on(
    tape: &mut Tape,
    anchor: Var,
    positive: Var,
    negative: Var,
    margin: f64,
) -> Result<Var> {
    let pos = tape.cosine(anchor, positive)?;
    let neg = tape.cosine(anchor, negative)?;
    let gap = tape.sub(neg, pos)?;
    let shifted = tape.add_const(gap, margin);
    Ok(tape.hinge(shifted))
}

/// Each image against its own description and the two other descriptions,
/// averaged per image and then over the three images.
pub fn loss_vse(images: [&Tensor; 3], texts: [&Tensor; 3], margin: f64) -> Result<f64> {
    let mut total = 0.0;
    for i in 0..3 {
        let mut own = 0.0;
        for j in (0..3).filter(|&j| j != i) {
            own += triplet_loss(images[i], texts[i], texts[j], margin)?;
        }
        total += own / 2.0;
    }
    Ok(total / 3.0)
}

pub fn loss_vse_on(tape: &mut Tape, images: [Var; 3], texts: [Var; 3], margin: f64) -> Result<Var> {
    let mut terms = Vec::with_capacity(6);
    for i in 0..3 {
        for j in (0..3).filter(|&j| j != i) {
            terms.push(triplet_loss_on(
                tape, images[i], texts[i], texts[j], margin,
            )?);
        }
    }
    mean_of(tape, &terms)
}

/// The two items of type v should be closer to each other than to the anchor.
pub fn loss_vsim(images: [&Tensor; 3], margin: f64) -> Result<f64> {
    let [anchor, pos, neg] = images;
    let a = triplet_loss(pos, neg, anchor, margin)?;
    let b = triplet_loss(neg, pos, anchor, margin)?;
    Ok((a + b) / 2.0)
}

pub fn loss_vsim_on(tape: &mut Tape, images: [Var; 3], margin: f64) -> Result<Var> {
    let [anchor, pos, neg] = images;
    let a = triplet_loss_on(tape, pos, neg, anchor, margin)?;
    let b = triplet_loss_on(tape, neg, pos, anchor, margin)?;
    mean_of(tape, &[a, b])
}

/// Same form as [`loss_vsim`], applied to description embeddings.
pub fn loss_tsim(texts: [&Tensor; 3], margin: f64) -> Result<f64> {
    loss_vsim(texts, margin)
}

pub fn loss_tsim_on(tape: &mut Tape, texts: [Var; 3], margin: f64) -> Result<Var> {
    loss_vsim_on(tape, texts, margin)
}

/// Triplet loss after projecting all three representations into the space
/// of the anchor/positive type pair.
pub fn loss_comp(
    reps: [&Tensor; 3],
    types: (TypeId, TypeId),
    spaces: &TypePairSpaces,
    store: &ParamStore,
    margin: f64,
) -> Result<f64> {
    let w = store.get(spaces.require(types.0, types.1)?);
    let [a, p, n] = reps;
    triplet_loss(
        &numerics::matmul(w, a)?,
        &numerics::matmul(w, p)?,
        &numerics::matmul(w, n)?,
        margin,
    )
}

pub fn loss_comp_on(
    tape: &mut Tape,
    store: &ParamStore,
    reps: [Var; 3],
    types: (TypeId, TypeId),
    spaces: &TypePairSpaces,
    margin: f64,
) -> Result<Var> {
    let w = tape.param(store, spaces.require(types.0, types.1)?);
    let [a, p, n] = reps;
    let a = tape.matmul(w, a)?;
    let p = tape.matmul(w, p)?;
    let n = tape.matmul(w, n)?;
    triplet_loss_on(tape, a, p, n, margin)
}

/// The four loss terms of one triplet (or their batch means).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossTerms<T> {
    pub comp: T,
    pub vsim: T,
    pub tsim: T,
    pub vse: T,
}

pub fn total_loss(terms: &LossTerms<f64>, weights: &LossWeights) -> f64 {
    terms.comp + weights.vsim * terms.vsim + weights.tsim * terms.tsim + weights.vse * terms.vse
}

pub fn total_loss_on(
    tape: &mut Tape,
    terms: &LossTerms<Var>,
    weights: &LossWeights,
) -> Result<Var> {
    let vsim = tape.scale(terms.vsim, weights.vsim);
    let tsim = tape.scale(terms.tsim, weights.tsim);
    let vse = tape.scale(terms.vse, weights.vse);
    let sum = tape.add(terms.comp, vsim)?;
    let sum = tape.add(sum, tsim)?;
    tape.add(sum, vse)
}

/// Cosine of the two representations in their type pair's space, or `None`
/// when the pair has no trained space.
pub fn pair_score(
    a: (TypeId, &Tensor),
    b: (TypeId, &Tensor),
    spaces: &TypePairSpaces,
    store: &ParamStore,
) -> Result<Option<f64>> {
    let Some(id) = spaces.get(a.0, b.0) else {
        return Ok(None);
    };
    let w = store.get(id);
    let pa = numerics::matmul(w, a.1)?;
    let pb = numerics::matmul(w, b.1)?;
    numerics::cosine_similarity(&pa, &pb).map(Some)
}

fn mean_of(tape: &mut Tape, terms: &[Var]) -> Result<Var> {
    let mut acc = terms[0];
    for &t in &terms[1..] {
        acc = tape.add(acc, t)?;
    }
    Ok(tape.scale(acc, 1.0 / terms.len() as f64))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: &[f64]) -> Tensor {
        Tensor::vector(x.to_vec())
    }

    #[test]
    fn triplet_cases() {
        let a = v(&[1.0, 0.0]);
        assert_eq!(
            triplet_loss(&a, &v(&[0.0, 1.0]), &v(&[0.0, 1.0]), 0.2).unwrap(),
            0.2
        );
        assert_eq!(
            triplet_loss(&a, &v(&[2.0, 0.0]), &v(&[-1.0, 0.0]), 0.2).unwrap(),
            0.0
        );
        assert!(triplet_loss(&a, &v(&[0.0, 0.0]), &v(&[1.0, 1.0]), 0.2).is_err());
    }

    #[test]
    fn identical_texts_give_margin() {
        let t = v(&[0.3, 0.4]);
        let imgs = [v(&[1.0, 0.0]), v(&[0.0, 1.0]), v(&[1.0, 1.0])];
        let loss = loss_vse([&imgs[0], &imgs[1], &imgs[2]], [&t, &t, &t], 0.2).unwrap();
        assert!((loss - 0.2).abs() < 1e-15);
    }

    #[test]
    fn vsim_is_symmetric_in_positive_and_negative() {
        let (a, p, n) = (
            v(&[1.0, 2.0, 0.5]),
            v(&[-0.3, 1.0, 2.0]),
            v(&[0.7, -1.0, 0.2]),
        );
        let x = loss_vsim([&a, &p, &n], 0.2).unwrap();
        let y = loss_vsim([&a, &n, &p], 0.2).unwrap();
        assert_eq!(x, y);
        assert_eq!(loss_tsim([&a, &p, &n], 0.2).unwrap(), x);
    }

    #[test]
    fn comp_requires_trained_pair() {
        let mut store = ParamStore::new();
        let id = store.add("w", Tensor::identity(2));
        let spaces = TypePairSpaces::from_map([(TypePair::new(1, 0), id)].into_iter().collect());
        let a = v(&[1.0, 0.0]);
        let n = v(&[0.0, 1.0]);
        assert_eq!(
            loss_comp([&a, &a, &n], (0, 1), &spaces, &store, 0.2).unwrap(),
            0.0
        );
        assert_eq!(
            loss_comp([&a, &n, &n], (1, 0), &spaces, &store, 0.2).unwrap(),
            0.2
        );
        assert!(matches!(
            loss_comp([&a, &a, &n], (0, 2), &spaces, &store, 0.2),
            Err(Error::UnseenTypePair(0, 2))
        ));
        assert_eq!(pair_score((0, &a), (2, &a), &spaces, &store).unwrap(), None);
        assert_eq!(
            pair_score((1, &a), (0, &a), &spaces, &store).unwrap(),
            Some(1.0)
        );
        assert_eq!(
            pair_score((1, &a), (0, &n), &spaces, &store).unwrap(),
            Some(0.0)
        );
    }

    #[test]
    fn total_with_unit_terms() {
        let terms = LossTerms {
            comp: 1.0,
            vsim: 1.0,
            tsim: 1.0,
            vse: 1.0,
        };
        assert!((total_loss(&terms, &LossWeights::default()) - 1.0051).abs() < 1e-15);
        let zero = LossWeights {
            vsim: 0.0,
            tsim: 0.0,
            vse: 0.0,
            margin: 0.2,
        };
        assert_eq!(total_loss(&LossTerms { comp: 0.7, ..terms }, &zero), 0.7);
    }

    #[test]
    fn tape_forms_match_values() {
        let imgs = [
            v(&[1.0, 2.0, 0.5]),
            v(&[-0.3, 1.0, 2.0]),
            v(&[0.7, -1.0, 0.2]),
        ];
        let txts = [
            v(&[0.1, 0.0, 1.0]),
            v(&[1.0, 1.0, -1.0]),
            v(&[0.0, 2.0, 0.3]),
        ];
        let mut tape = Tape::new();
        let iv = imgs.clone().map(|t| tape.constant(t));
        let tv = txts.clone().map(|t| tape.constant(t));
        let vse = loss_vse_on(&mut tape, iv, tv, 0.2).unwrap();
        let vsim = loss_vsim_on(&mut tape, iv, 0.2).unwrap();
        let expect_vse = loss_vse(
            [&imgs[0], &imgs[1], &imgs[2]],
            [&txts[0], &txts[1], &txts[2]],
            0.2,
        )
        .unwrap();
        let expect_vsim = loss_vsim([&imgs[0], &imgs[1], &imgs[2]], 0.2).unwrap();
        assert!((tape.value(vse).item() - expect_vse).abs() < 1e-15);
        assert!((tape.value(vsim).item() - expect_vsim).abs() < 1e-15);
    }

    #[test]
    fn weights_validation() {
        assert!(LossWeights::default().validate().is_ok());
        assert!(LossWeights {
            margin: 0.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(LossWeights {
            vse: -1.0,
            ..Default::default()
        }
        .validate()
        .is_err());
    }
}
