//! Deterministic synthetic outfits with a planted, localized style signal.
//!
//! Every outfit draws a style. All of its items copy the same style pattern
//! into exactly `signal_rows` of their region rows and word rows; every other
//! row is i.i.d. Gaussian noise. Averaging all rows dilutes the pattern by
//! `signal_rows / regions`, while attention over rows can recover it.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{
    vocab, Dataset, Dims, EvalQuestion, FcQuestion, FitbQuestion, Item, ItemId, Outfit, Questions,
    Split, TypeId, TypeVocab,
};
use crate::error::{Error, Result};
use crate::numerics::Tensor;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub types: usize,
    pub styles: usize,
    pub train_outfits: usize,
    pub valid_outfits: usize,
    pub test_outfits: usize,
    pub min_outfit_size: usize,
    pub max_outfit_size: usize,
    pub regions: usize,
    pub words: usize,
    pub region_dim: usize,
    pub word_dim: usize,
    /// Rows per modality carrying the style pattern (k).
    pub signal_rows: usize,
    /// RMS per coordinate of a planted row; noise rows have RMS `noise`.
    pub amplitude: f64,
    pub noise: f64,
    /// Per-outfit perturbation of the style prototype, relative to its norm.
    pub style_jitter: f64,
    /// Probability that an item has no description (and no word features).
    pub undescribed_fraction: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            types: 8,
            styles: 8,
            train_outfits: 600,
            valid_outfits: 100,
            test_outfits: 1000,
            min_outfit_size: 3,
            max_outfit_size: 4,
            regions: 8,
            words: 6,
            region_dim: 32,
            word_dim: 32,
            signal_rows: 2,
            amplitude: 1.0,
            noise: 1.0,
            style_jitter: 0.2,
            undescribed_fraction: 0.0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("types", self.types),
            ("train_outfits", self.train_outfits),
            ("regions", self.regions),
            ("words", self.words),
            ("region_dim", self.region_dim),
            ("word_dim", self.word_dim),
            ("signal_rows", self.signal_rows),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Spec(format!("{name} must be positive")));
        }
        if self.styles < 2 {
            return Err(Error::Spec("at least two styles are required".into()));
        }
        if self.signal_rows > self.regions || self.signal_rows > self.words {
            return Err(Error::Spec(format!(
                "signal_rows {} exceeds regions {} or words {}",
                self.signal_rows, self.regions, self.words
            )));
        }
        if self.min_outfit_size < 2
            || self.min_outfit_size > self.max_outfit_size
            || self.max_outfit_size > self.types
        {
            return Err(Error::Spec(format!(
                "outfit sizes must satisfy 2 <= {} <= {} <= types ({})",
                self.min_outfit_size, self.max_outfit_size, self.types
            )));
        }
        let finite_nonneg = [
            ("amplitude", self.amplitude),
            ("noise", self.noise),
            ("style_jitter", self.style_jitter),
        ];
        if let Some((name, _)) = finite_nonneg
            .iter()
            .find(|(_, v)| !(v.is_finite() && *v >= 0.0))
        {
            return Err(Error::Spec(format!(
                "{name} must be finite and non-negative"
            )));
        }
        if !(0.0..=1.0).contains(&self.undescribed_fraction) {
            return Err(Error::Spec(
                "undescribed_fraction must lie in [0, 1]".into(),
            ));
        }
        Ok(())
    }

    pub fn total_outfits(&self) -> usize {
        self.train_outfits + self.valid_outfits + self.test_outfits
    }
}

/// Rows of an item that carry the planted pattern.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlantedRows {
    pub regions: Vec<usize>,
    pub words: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    pub dataset: Dataset,
    pub questions: Questions,
    /// Style drawn by each outfit, indexed like `dataset.outfits()`.
    pub outfit_styles: Vec<usize>,
    /// Planted rows of each item, indexed like `dataset.items()`.
    pub planted: Vec<PlantedRows>,
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Gaussian direction rescaled so its per-coordinate RMS is 1.
fn unit_rms(mut v: Vec<f64>) -> Vec<f64> {
    let norm = libm::sqrt(v.iter().map(|x| x * x).sum::<f64>());
    let target = libm::sqrt(v.len() as f64);
    if norm > 0.0 {
        for x in &mut v {
            *x *= target / norm;
        }
    }
    v
}

fn to_f32_precision(v: f64) -> f64 {
    v as f32 as f64
}

fn feature_matrix(
    rng: &mut ChaCha8Rng,
    rows: usize,
    cols: usize,
    noise: f64,
    pattern: &[f64],
    amplitude: f64,
    k: usize,
) -> (Tensor, Vec<usize>) {
    let mut data: Vec<f64> = (0..rows * cols).map(|_| noise * gaussian(rng)).collect();
    let mut planted = rand::seq::index::sample(rng, rows, k).into_vec();
    planted.sort_unstable();
    for &r in &planted {
        for c in 0..cols {
            data[r * cols + c] = amplitude * pattern[c];
        }
    }
    for v in &mut data {
        *v = to_f32_precision(*v);
    }
    (
        Tensor::matrix(rows, cols, data).expect("positive dims"),
        planted,
    )
}

/// Builds a dataset and its validation/test questions. A pure function of
/// `(spec, seed)`.
pub fn generate_synthetic(spec: &SyntheticSpec, seed: u64) -> Result<SyntheticData> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let names: Vec<String> = if spec.types <= vocab::POLYVORE_68K.len() {
        vocab::POLYVORE_68K[..spec.types]
            .iter()
            .map(|s| String::from(*s))
            .collect()
    } else if spec.types <= vocab::POLYVORE_21K.len() {
        vocab::POLYVORE_21K[..spec.types]
            .iter()
            .map(|s| String::from(*s))
            .collect()
    } else {
        (0..spec.types).map(|i| format!("type{i}")).collect()
    };
    let vocab = TypeVocab::new(names)?;

    let image_protos: Vec<Vec<f64>> = (0..spec.styles)
        .map(|_| unit_rms((0..spec.region_dim).map(|_| gaussian(&mut rng)).collect()))
        .collect();
    let text_protos: Vec<Vec<f64>> = (0..spec.styles)
        .map(|_| unit_rms((0..spec.word_dim).map(|_| gaussian(&mut rng)).collect()))
        .collect();

    let mut items = Vec::new();
    let mut planted = Vec::new();
    let mut outfits = Vec::new();
    let mut outfit_styles = Vec::new();
    let all_types: Vec<TypeId> = (0..spec.types).collect();

    for o in 0..spec.total_outfits() {
        let split = if o < spec.train_outfits {
            Split::Train
        } else if o < spec.train_outfits + spec.valid_outfits {
            Split::Valid
        } else {
            Split::Test
        };
        let style = rng.random_range(0..spec.styles);
        let size = rng.random_range(spec.min_outfit_size..=spec.max_outfit_size);
        let mut kinds: Vec<TypeId> = all_types.choose_multiple(&mut rng, size).copied().collect();
        kinds.sort_unstable();

        let jitter = |proto: &[f64], rng: &mut ChaCha8Rng| -> Vec<f64> {
            unit_rms(
                proto
                    .iter()
                    .map(|p| p + spec.style_jitter * gaussian(rng))
                    .collect(),
            )
        };
        let image_pattern = jitter(&image_protos[style], &mut rng);
        let text_pattern = jitter(&text_protos[style], &mut rng);

        let mut members = Vec::with_capacity(size);
        for kind in kinds {
            let idx = items.len();
            let (regions, region_rows) = feature_matrix(
                &mut rng,
                spec.regions,
                spec.region_dim,
                spec.noise,
                &image_pattern,
                spec.amplitude,
                spec.signal_rows,
            );
            let described = rng.random::<f64>() >= spec.undescribed_fraction;
            let (words, word_rows) = if described {
                let (w, rows) = feature_matrix(
                    &mut rng,
                    spec.words,
                    spec.word_dim,
                    spec.noise,
                    &text_pattern,
                    spec.amplitude,
                    spec.signal_rows,
                );
                (Some(w), rows)
            } else {
                (None, Vec::new())
            };
            items.push(Item {
                name: format!("item{idx}"),
                kind,
                regions,
                words,
                description: described.then(|| format!("synthetic item {idx}")),
            });
            planted.push(PlantedRows {
                regions: region_rows,
                words: word_rows,
            });
            members.push(ItemId(idx));
        }
        outfits.push(Outfit {
            name: format!("outfit{o}"),
            items: members,
            split,
        });
        outfit_styles.push(style);
    }

    let dims = Dims {
        regions: spec.regions,
        words: spec.words,
        region_dim: spec.region_dim,
        word_dim: spec.word_dim,
    };
    let dataset = Dataset::new(vocab, dims, items, outfits)?;

    let valid = split_questions(&dataset, &outfit_styles, Split::Valid, false, &mut rng)?;
    let test = split_questions(&dataset, &outfit_styles, Split::Test, true, &mut rng)?;

    Ok(SyntheticData {
        dataset,
        questions: Questions { valid, test },
        outfit_styles,
        planted,
    })
}

/// One positive and one negative FC question per outfit of the split, plus
/// one FITB question per outfit when `with_fitb` is set.
fn split_questions(
    dataset: &Dataset,
    styles: &[usize],
    split: Split,
    with_fitb: bool,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<EvalQuestion>> {
    // type -> (item, style of its outfit)
    let mut pool: BTreeMap<TypeId, Vec<(ItemId, usize)>> = BTreeMap::new();
    for (o, outfit) in dataset.outfits().iter().enumerate() {
        if outfit.split != split {
            continue;
        }
        for &id in &outfit.items {
            pool.entry(dataset.item(id).kind)
                .or_default()
                .push((id, styles[o]));
        }
    }

    let mut questions = Vec::new();
    for outfit in dataset.outfits() {
        if outfit.split != split {
            continue;
        }
        questions.push(EvalQuestion::Fc(FcQuestion {
            items: outfit.items.clone(),
            compatible: true,
        }));

        let mut negative = Vec::with_capacity(outfit.items.len());
        for _attempt in 0..64 {
            negative.clear();
            let mut drawn_styles = Vec::new();
            for &id in &outfit.items {
                let candidates = &pool[&dataset.item(id).kind];
                let &(pick, style) = candidates.choose(rng).expect("type has at least this item");
                negative.push(pick);
                drawn_styles.push(style);
            }
            if drawn_styles.iter().any(|&s| s != drawn_styles[0]) {
                break;
            }
        }
        questions.push(EvalQuestion::Fc(FcQuestion {
            items: negative,
            compatible: false,
        }));
    }

    if with_fitb {
        for (o, outfit) in dataset.outfits().iter().enumerate() {
            if outfit.split != split {
                continue;
            }
            let blank = rng.random_range(0..outfit.items.len());
            let truth = outfit.items[blank];
            let kind = dataset.item(truth).kind;
            let pool_for_type = &pool[&kind];
            let mut eligible: Vec<ItemId> = pool_for_type
                .iter()
                .filter(|(id, s)| *s != styles[o] && *id != truth)
                .map(|(id, _)| *id)
                .collect();
            if eligible.len() < 3 {
                eligible = pool_for_type
                    .iter()
                    .map(|(id, _)| *id)
                    .filter(|id| !outfit.items.contains(id))
                    .collect();
            }
            if eligible.len() < 3 {
                return Err(Error::Spec(format!(
                    "not enough '{}' items in the {} split for fill-in-the-blank distractors",
                    dataset.vocab().name(kind),
                    split.as_str()
                )));
            }
            let mut candidates: Vec<ItemId> = eligible.choose_multiple(rng, 3).copied().collect();
            candidates.push(truth);
            candidates.shuffle(rng);
            let answer = candidates
                .iter()
                .position(|&c| c == truth)
                .expect("truth present");
            let partial = outfit
                .items
                .iter()
                .copied()
                .filter(|&id| id != truth)
                .collect();
            questions.push(EvalQuestion::Fitb(FitbQuestion {
                partial,
                candidates: [candidates[0], candidates[1], candidates[2], candidates[3]],
                answer,
            }));
        }
    }
    Ok(questions)
}
