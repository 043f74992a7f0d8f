//! Items, outfits, type vocabularies and evaluation questions.

mod filter;
mod synthetic;
pub mod vocab;

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::numerics::Tensor;

pub use filter::{filter_questions, scored_pairs, FilterOutcome, FilteredQuestion};
pub use synthetic::{generate_synthetic, SyntheticData, SyntheticSpec};

/// Index of an item type in a dataset's vocabulary.
pub type TypeId = usize;

/// Index of an item in [`Dataset::items`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ItemId(pub usize);

/// Unordered pair of item types, stored with the smaller id first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TypePair {
    low: TypeId,
    high: TypeId,
}

impl TypePair {
    pub fn new(a: TypeId, b: TypeId) -> Self {
        Self {
            low: a.min(b),
            high: a.max(b),
        }
    }

    pub fn low(&self) -> TypeId {
        self.low
    }

    pub fn high(&self) -> TypeId {
        self.high
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ItemType {
    pub id: TypeId,
    pub name: String,
}

/// Ordered list of unique type names; a type's id is its position.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TypeVocab {
    names: Vec<String>,
}

impl TypeVocab {
    pub fn new<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Result<Self> {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        let mut seen = BTreeSet::new();
        for n in &names {
            if !seen.insert(n.as_str()) {
                return Err(Error::data("types", format!("duplicate type name '{n}'")));
            }
        }
        Ok(Self { names })
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn name(&self, id: TypeId) -> &str {
        &self.names[id]
    }

    pub fn id(&self, name: &str) -> Option<TypeId> {
        self.names.iter().position(|n| n == name)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn get(&self, id: TypeId) -> Option<ItemType> {
        self.names.get(id).map(|name| ItemType {
            id,
            name: name.clone(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl Split {
    pub fn as_str(&self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "train" => Some(Split::Train),
            "valid" => Some(Split::Valid),
            "test" => Some(Split::Test),
            _ => None,
        }
    }
}

/// Feature geometry shared by every item of a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dims {
    /// Region rows per image (N).
    pub regions: usize,
    /// Word rows per description (M).
    pub words: usize,
    /// Region feature width (d_i).
    pub region_dim: usize,
    /// Word feature width (d_t).
    pub word_dim: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Item {
    pub name: String,
    pub kind: TypeId,
    /// N×d_i region features.
    pub regions: Tensor,
    /// M×d_t word features; absent exactly when the description is.
    pub words: Option<Tensor>,
    pub description: Option<String>,
}

impl Item {
    pub fn is_described(&self) -> bool {
        self.words.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outfit {
    pub name: String,
    pub items: Vec<ItemId>,
    pub split: Split,
}

/// A validated, immutable collection of typed items and outfits.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    vocab: TypeVocab,
    dims: Dims,
    items: Vec<Item>,
    outfits: Vec<Outfit>,
}

impl Dataset {
    pub fn new(
        vocab: TypeVocab,
        dims: Dims,
        items: Vec<Item>,
        outfits: Vec<Outfit>,
    ) -> Result<Self> {
        if dims.regions == 0 || dims.region_dim == 0 || dims.word_dim == 0 || dims.words == 0 {
            return Err(Error::data("dims", "all extents must be positive"));
        }
        let mut names = BTreeSet::new();
        for item in &items {
            let loc = || format!("item '{}'", item.name);
            if !names.insert(item.name.as_str()) {
                return Err(Error::data(loc(), "duplicate item id"));
            }
            if item.kind >= vocab.len() {
                return Err(Error::data(
                    loc(),
                    format!("type id {} outside vocabulary", item.kind),
                ));
            }
            if item.regions.shape() != [dims.regions, dims.region_dim] {
                return Err(Error::data(
                    loc(),
                    format!(
                        "regions shape {:?}, expected [{}, {}]",
                        item.regions.shape(),
                        dims.regions,
                        dims.region_dim
                    ),
                ));
            }
            if !item.regions.is_finite() {
                return Err(Error::data(loc(), "non-finite region feature"));
            }
            match (&item.words, &item.description) {
                (Some(words), Some(_)) => {
                    if words.shape() != [dims.words, dims.word_dim] {
                        return Err(Error::data(
                            loc(),
                            format!(
                                "words shape {:?}, expected [{}, {}]",
                                words.shape(),
                                dims.words,
                                dims.word_dim
                            ),
                        ));
                    }
                    if !words.is_finite() {
                        return Err(Error::data(loc(), "non-finite word feature"));
                    }
                }
                (None, None) => {}
                _ => {
                    return Err(Error::data(
                        loc(),
                        "word features must be present exactly when a description is",
                    ))
                }
            }
        }
        for outfit in &outfits {
            let loc = || format!("outfit '{}'", outfit.name);
            if outfit.items.len() < 2 {
                return Err(Error::data(loc(), "an outfit needs at least two items"));
            }
            let distinct: BTreeSet<_> = outfit.items.iter().collect();
            if distinct.len() != outfit.items.len() {
                return Err(Error::data(loc(), "repeated item"));
            }
            if let Some(bad) = outfit.items.iter().find(|id| id.0 >= items.len()) {
                return Err(Error::data(
                    loc(),
                    format!("dangling item reference {}", bad.0),
                ));
            }
        }
        Ok(Self {
            vocab,
            dims,
            items,
            outfits,
        })
    }

    pub fn vocab(&self) -> &TypeVocab {
        &self.vocab
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn items(&self) -> &[Item] {
        &self.items
    }

    pub fn item(&self, id: ItemId) -> &Item {
        &self.items[id.0]
    }

    pub fn item_id(&self, name: &str) -> Option<ItemId> {
        self.items.iter().position(|i| i.name == name).map(ItemId)
    }

    pub fn outfits(&self) -> &[Outfit] {
        &self.outfits
    }

    pub fn outfits_in(&self, split: Split) -> impl Iterator<Item = &Outfit> {
        self.outfits.iter().filter(move |o| o.split == split)
    }

    /// Unordered type pairs that co-occur among described items of training
    /// outfits; these are the pairs a model learns compatibility spaces for.
    pub fn training_type_pairs(&self) -> BTreeSet<TypePair> {
        let mut pairs = BTreeSet::new();
        for outfit in self.outfits_in(Split::Train) {
            let described: Vec<&Item> = outfit
                .items
                .iter()
                .map(|&id| self.item(id))
                .filter(|i| i.is_described())
                .collect();
            for (i, a) in described.iter().enumerate() {
                for b in &described[i + 1..] {
                    pairs.insert(TypePair::new(a.kind, b.kind));
                }
            }
        }
        pairs
    }

    /// For every item, the set of items it shares a training outfit with.
    pub fn training_cooccurrence(&self) -> BTreeMap<ItemId, BTreeSet<ItemId>> {
        let mut index: BTreeMap<ItemId, BTreeSet<ItemId>> = BTreeMap::new();
        for outfit in self.outfits_in(Split::Train) {
            for &a in &outfit.items {
                let entry = index.entry(a).or_default();
                entry.extend(outfit.items.iter().copied().filter(|&b| b != a));
            }
        }
        index
    }
}

/// Fashion-compatibility question: is this outfit human-composed?
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FcQuestion {
    pub items: Vec<ItemId>,
    pub compatible: bool,
}

/// Fill-in-the-blank question: pick the candidate that completes the outfit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FitbQuestion {
    pub partial: Vec<ItemId>,
    pub candidates: [ItemId; 4],
    pub answer: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EvalQuestion {
    Fc(FcQuestion),
    Fitb(FitbQuestion),
}

impl EvalQuestion {
    /// Every item the question references.
    pub fn items(&self) -> Vec<ItemId> {
        match self {
            EvalQuestion::Fc(q) => q.items.clone(),
            EvalQuestion::Fitb(q) => q
                .partial
                .iter()
                .chain(q.candidates.iter())
                .copied()
                .collect(),
        }
    }

    pub fn validate(&self, dataset: &Dataset) -> Result<()> {
        let loc = "question";
        if let EvalQuestion::Fitb(q) = self {
            if q.answer >= 4 {
                return Err(Error::data(
                    loc,
                    format!("answer index {} outside 0..3", q.answer),
                ));
            }
            if q.partial.is_empty() {
                return Err(Error::data(loc, "fill-in-the-blank needs a partial outfit"));
            }
        }
        if let EvalQuestion::Fc(q) = self {
            if q.items.len() < 2 {
                return Err(Error::data(loc, "outfit question needs at least two items"));
            }
        }
        if let Some(bad) = self.items().iter().find(|id| id.0 >= dataset.items().len()) {
            return Err(Error::data(
                loc,
                format!("dangling item reference {}", bad.0),
            ));
        }
        Ok(())
    }
}

/// Validation and test question sets of a dataset.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Questions {
    pub valid: Vec<EvalQuestion>,
    pub test: Vec<EvalQuestion>,
}
