use alloc::collections::BTreeSet;
use alloc::vec::Vec;

use super::{Dataset, EvalQuestion, ItemId, TypePair};

/// A question that survived filtering, with the item pairs scoring must skip
/// because their type pair has no trained compatibility space.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FilteredQuestion {
    pub question: EvalQuestion,
    pub skipped_pairs: Vec<(ItemId, ItemId)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FilterOutcome {
    pub kept: Vec<FilteredQuestion>,
    /// Questions dropped because an item lacks a description.
    pub discarded: usize,
}

/// Pairs a question scores: all unordered pairs of an FC outfit, or every
/// candidate against every remaining item of a FITB outfit.
pub fn scored_pairs(question: &EvalQuestion) -> Vec<(ItemId, ItemId)> {
    match question {
        EvalQuestion::Fc(q) => {
            let mut pairs = Vec::new();
            for (i, &a) in q.items.iter().enumerate() {
                for &b in &q.items[i + 1..] {
                    pairs.push((a, b));
                }
            }
            pairs
        }
        EvalQuestion::Fitb(q) => q
            .candidates
            .iter()
            .flat_map(|&c| q.partial.iter().map(move |&p| (c, p)))
            .collect(),
    }
}

/// Drops questions that reference an item without a description, and marks
/// pairs whose type combination was never seen in training.
pub fn filter_questions(
    questions: &[EvalQuestion],
    dataset: &Dataset,
    trained_pairs: &BTreeSet<TypePair>,
) -> FilterOutcome {
    let mut outcome = FilterOutcome::default();
    for q in questions {
        if q.items().iter().any(|&id| !dataset.item(id).is_described()) {
            outcome.discarded += 1;
            continue;
        }
        let skipped_pairs = scored_pairs(q)
            .into_iter()
            .filter(|&(a, b)| {
                let pair = TypePair::new(dataset.item(a).kind, dataset.item(b).kind);
                !trained_pairs.contains(&pair)
            })
            .collect();
        outcome.kept.push(FilteredQuestion {
            question: q.clone(),
            skipped_pairs,
        });
    }
    outcome
}
