//! Constrained negative sampling, the ADAM training loop and multi-run
//! ensembles.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::compatibility::{LossTerms, LossWeights};
use crate::dataset::{Dataset, EvalQuestion, ItemId, Split, TypeId};
use crate::error::{Error, Result};
use crate::evaluation::model_fc_auc;
use crate::model::{Model, ModelConfig};
use crate::numerics::{AdamConfig, AdamState, Gradients, Tape};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub model: ModelConfig,
    pub weights: LossWeights,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub runs: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            model: ModelConfig::default(),
            weights: LossWeights::default(),
            epochs: 10,
            learning_rate: 5e-5,
            batch_size: 128,
            seed: 0,
            runs: 5,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.weights.validate()?;
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be positive".into()));
        }
        if self.runs == 0 {
            return Err(Error::Config("runs must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TripletSpec {
    pub anchor: ItemId,
    pub anchor_type: TypeId,
    pub positive: ItemId,
    pub negative: ItemId,
    /// Type of both the positive and the negative.
    pub pair_type: TypeId,
}

/// Co-occurrence structure of the training split that sampling draws from.
#[derive(Debug, Clone)]
pub struct TripletSampler {
    pairs: Vec<(ItemId, ItemId)>,
    by_type: BTreeMap<TypeId, Vec<ItemId>>,
    cooccur: BTreeMap<ItemId, BTreeSet<ItemId>>,
    kinds: Vec<TypeId>,
}

/// One epoch of triplets and the number of anchor/positive pairs without an
/// eligible negative.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampledEpoch {
    pub triplets: Vec<TripletSpec>,
    pub skipped: usize,
}

const REJECTION_TRIES: usize = 32;

impl TripletSampler {
    pub fn new(dataset: &Dataset) -> Result<Self> {
        let mut pairs = BTreeSet::new();
        let mut pool = BTreeSet::new();
        for outfit in dataset.outfits_in(Split::Train) {
            let described: Vec<ItemId> = outfit
                .items
                .iter()
                .copied()
                .filter(|&id| dataset.item(id).is_described())
                .collect();
            for &a in &described {
                pool.insert(a);
                for &b in &described {
                    if a != b {
                        pairs.insert((a, b));
                    }
                }
            }
        }
        if pairs.is_empty() {
            return Err(Error::data(
                "training split",
                "no outfit has two described items",
            ));
        }
        let mut by_type: BTreeMap<TypeId, Vec<ItemId>> = BTreeMap::new();
        for id in pool {
            by_type.entry(dataset.item(id).kind).or_default().push(id);
        }
        Ok(Self {
            pairs: pairs.into_iter().collect(),
            by_type,
            cooccur: dataset.training_cooccurrence(),
            kinds: dataset.items().iter().map(|i| i.kind).collect(),
        })
    }

    /// Ordered anchor/positive pairs, one triplet each per epoch.
    pub fn pairs(&self) -> &[(ItemId, ItemId)] {
        &self.pairs
    }

    pub fn is_eligible(&self, anchor: ItemId, negative: ItemId) -> bool {
        negative != anchor
            && !self
                .cooccur
                .get(&anchor)
                .is_some_and(|s| s.contains(&negative))
    }

    /// Same-type candidates for negatives of `positive`.
    pub fn pool(&self, kind: TypeId) -> &[ItemId] {
        self.by_type.get(&kind).map(Vec::as_slice).unwrap_or(&[])
    }

    /// A uniform draw from the eligible negatives, or `None` if there are none.
    pub fn negative(&self, anchor: ItemId, kind: TypeId, rng: &mut ChaCha8Rng) -> Option<ItemId> {
        let pool = self.pool(kind);
        if pool.is_empty() {
            return None;
        }
        for _ in 0..REJECTION_TRIES {
            let c = pool[rng.random_range(0..pool.len())];
            if self.is_eligible(anchor, c) {
                return Some(c);
            }
        }
        let eligible: Vec<ItemId> = pool
            .iter()
            .copied()
            .filter(|&c| self.is_eligible(anchor, c))
            .collect();
        (!eligible.is_empty()).then(|| eligible[rng.random_range(0..eligible.len())])
    }

    /// Shuffled triplets for one epoch.
    pub fn sample(&self, rng: &mut ChaCha8Rng) -> SampledEpoch {
        let mut triplets = Vec::with_capacity(self.pairs.len());
        let mut skipped = 0;
        for &(anchor, positive) in &self.pairs {
            let kind = self.kinds[positive.0];
            match self.negative(anchor, kind, rng) {
                Some(negative) => triplets.push(TripletSpec {
                    anchor,
                    anchor_type: self.kinds[anchor.0],
                    positive,
                    negative,
                    pair_type: kind,
                }),
                None => skipped += 1,
            }
        }
        if skipped > 0 {
            log::debug!("{skipped} anchor/positive pairs had no eligible negative");
        }
        triplets.shuffle(rng);
        SampledEpoch { triplets, skipped }
    }
}

/// One epoch of triplets from the training split.
pub fn sample_triplets(dataset: &Dataset, rng: &mut ChaCha8Rng) -> Result<SampledEpoch> {
    Ok(TripletSampler::new(dataset)?.sample(rng))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub run: usize,
    pub epoch: usize,
    pub steps: usize,
    pub triplets: usize,
    pub skipped: usize,
    /// Mean weighted loss over the epoch's triplets.
    pub loss: f64,
    pub terms: LossTerms<f64>,
    pub valid_auc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trained {
    pub model: Model,
    pub history: Vec<EpochRecord>,
    /// Batch loss before each ADAM step.
    pub step_losses: Vec<f64>,
}

/// Mean objective and parameter gradients over a batch of triplets.
pub fn batch_gradients(
    model: &Model,
    dataset: &Dataset,
    batch: &[TripletSpec],
    weights: &LossWeights,
) -> Result<(f64, LossTerms<f64>, Gradients)> {
    let scale = 1.0 / batch.len() as f64;
    let mut grads = Gradients::new();
    let mut loss = 0.0;
    let mut terms = LossTerms {
        comp: 0.0,
        vsim: 0.0,
        tsim: 0.0,
        vse: 0.0,
    };
    for t in batch {
        let items = [
            dataset.item(t.anchor),
            dataset.item(t.positive),
            dataset.item(t.negative),
        ];
        let mut tape = Tape::new();
        let (total, tv) = model
            .layout
            .objective_on(&mut tape, &model.store, items, weights)?;
        loss += scale * tape.value(total).item();
        terms.comp += scale * tape.value(tv.comp).item();
        terms.vsim += scale * tape.value(tv.vsim).item();
        terms.tsim += scale * tape.value(tv.tsim).item();
        terms.vse += scale * tape.value(tv.vse).item();
        let mut g = tape.backward(total)?;
        g.scale(scale);
        for (id, grad) in g.iter() {
            grads.accumulate(id, grad.clone());
        }
    }
    Ok((loss, terms, grads.complete(&model.store)))
}

fn sampler_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    rng
}

/// Trains one model with `config.seed`; `valid` questions give the logged
/// per-epoch FC AUC.
pub fn train(dataset: &Dataset, valid: &[EvalQuestion], config: &TrainConfig) -> Result<Trained> {
    train_run(dataset, valid, config, 0, config.seed)
}

fn train_run(
    dataset: &Dataset,
    valid: &[EvalQuestion],
    config: &TrainConfig,
    run: usize,
    seed: u64,
) -> Result<Trained> {
    config.validate()?;
    let sampler = TripletSampler::new(dataset)?;
    let mut model = Model::init(
        config.model,
        dataset.dims(),
        &dataset.training_type_pairs(),
        seed,
    )?;
    let mut adam = AdamState::new(
        AdamConfig {
            learning_rate: config.learning_rate,
            ..AdamConfig::default()
        },
        &model.store,
    );
    let mut rng = sampler_rng(seed);
    let mut history = Vec::with_capacity(config.epochs);
    let mut step_losses = Vec::new();
    for epoch in 0..config.epochs {
        let sampled = sampler.sample(&mut rng);
        let mut loss_sum = 0.0;
        let mut term_sums = [0.0; 4];
        let mut steps = 0;
        for batch in sampled.triplets.chunks(config.batch_size) {
            let (loss, terms, grads) = batch_gradients(&model, dataset, batch, &config.weights)?;
            let step = step_losses.len();
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss {
                    step: step as u64,
                    comp: terms.comp,
                    vsim: terms.vsim,
                    tsim: terms.tsim,
                    vse: terms.vse,
                });
            }
            step_losses.push(loss);
            let n = batch.len() as f64;
            loss_sum += loss * n;
            for (s, v) in term_sums
                .iter_mut()
                .zip([terms.comp, terms.vsim, terms.tsim, terms.vse])
            {
                *s += v * n;
            }
            adam.step(&mut model.store, &grads)?;
            steps += 1;
        }
        let count = sampled.triplets.len().max(1) as f64;
        let valid_auc = if valid.is_empty() {
            None
        } else {
            match model_fc_auc(&model, dataset, valid) {
                Ok(v) => Some(v),
                Err(Error::UndefinedMetric(_)) => None,
                Err(e) => return Err(e),
            }
        };
        let record = EpochRecord {
            run,
            epoch: epoch + 1,
            steps,
            triplets: sampled.triplets.len(),
            skipped: sampled.skipped,
            loss: loss_sum / count,
            terms: LossTerms {
                comp: term_sums[0] / count,
                vsim: term_sums[1] / count,
                tsim: term_sums[2] / count,
                vse: term_sums[3] / count,
            },
            valid_auc,
        };
        log::info!(
            "run {} epoch {} loss {:.6} valid_auc {:?}",
            run,
            record.epoch,
            record.loss,
            record.valid_auc
        );
        history.push(record);
    }
    Ok(Trained {
        model,
        history,
        step_losses,
    })
}

/// `config.runs` independent trainings seeded `seed, seed+1, …`.
pub fn train_ensemble(
    dataset: &Dataset,
    valid: &[EvalQuestion],
    config: &TrainConfig,
) -> Result<Vec<Trained>> {
    config.validate()?;
    (0..config.runs)
        .map(|r| {
            train_run(
                dataset,
                valid,
                config,
                r,
                config.seed.wrapping_add(r as u64),
            )
        })
        .collect()
}
