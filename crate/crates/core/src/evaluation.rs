//! Outfit scoring, FC AUC, FITB answering, voting across runs and the
//! metrics report.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::dataset::{filter_questions, Dataset, EvalQuestion, FitbQuestion, ItemId, TypePair};
use crate::error::{Error, Result};
use crate::model::Model;
use crate::numerics::Tensor;

/// Item representations of one model, computed once per item.
pub struct Scorer<'a> {
    model: &'a Model,
    dataset: &'a Dataset,
    cache: BTreeMap<ItemId, Tensor>,
}

impl<'a> Scorer<'a> {
    pub fn new(model: &'a Model, dataset: &'a Dataset) -> Self {
        Self {
            model,
            dataset,
            cache: BTreeMap::new(),
        }
    }

    fn ensure(&mut self, id: ItemId) -> Result<()> {
        if !self.cache.contains_key(&id) {
            let rep = self.model.represent(self.dataset.item(id))?;
            self.cache.insert(id, rep);
        }
        Ok(())
    }

    /// `None` when the pair's types have no trained space.
    pub fn pair_score(&mut self, a: ItemId, b: ItemId) -> Result<Option<f64>> {
        let (ka, kb) = (self.dataset.item(a).kind, self.dataset.item(b).kind);
        if self.model.layout.spaces.get(ka, kb).is_none() {
            return Ok(None);
        }
        self.ensure(a)?;
        self.ensure(b)?;
        self.model
            .score_representations((ka, &self.cache[&a]), (kb, &self.cache[&b]))
    }
}

/// Mean pair score over the unordered scorable pairs, `None` if there are none.
pub fn outfit_score(items: &[ItemId], scorer: &mut Scorer<'_>) -> Result<Option<f64>> {
    let mut sum = 0.0;
    let mut n = 0usize;
    for (i, &a) in items.iter().enumerate() {
        for &b in &items[i + 1..] {
            if let Some(s) = scorer.pair_score(a, b)? {
                sum += s;
                n += 1;
            }
        }
    }
    Ok((n > 0).then(|| sum / n as f64))
}

/// Area under the ROC curve of `(score, is_positive)` with midrank ties.
pub fn fc_auc(scored: &[(f64, bool)]) -> Result<f64> {
    let positives = scored.iter().filter(|s| s.1).count();
    let negatives = scored.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::UndefinedMetric(format!(
            "AUC needs both classes, got {positives} positive and {negatives} negative"
        )));
    }
    if scored.iter().any(|s| !s.0.is_finite()) {
        return Err(Error::domain("fc_auc", "non-finite score"));
    }
    let mut order: Vec<usize> = (0..scored.len()).collect();
    order.sort_by(|&a, &b| scored[a].0.total_cmp(&scored[b].0));
    let mut positive_rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scored[order[j + 1]].0 == scored[order[i]].0 {
            j += 1;
        }
        // ranks are 1-based, ties share their average
        let midrank = (i + j) as f64 / 2.0 + 1.0;
        positive_rank_sum += midrank * order[i..=j].iter().filter(|&&k| scored[k].1).count() as f64;
        i = j + 1;
    }
    let p = positives as f64;
    Ok((positive_rank_sum - p * (p + 1.0) / 2.0) / (p * negatives as f64))
}

/// Chosen candidate and each candidate's summed score against the partial outfit.
#[derive(Debug, Clone, PartialEq)]
pub struct FitbAnswer {
    pub index: usize,
    pub scores: [f64; 4],
}

/// Index of the largest score, lowest index on ties.
pub fn choose(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

/// `None` when no candidate has a scorable pair.
pub fn fitb_answer(question: &FitbQuestion, scorer: &mut Scorer<'_>) -> Result<Option<FitbAnswer>> {
    let mut scores = [0.0; 4];
    let mut any = false;
    for (c, &cand) in question.candidates.iter().enumerate() {
        for &p in &question.partial {
            if let Some(s) = scorer.pair_score(cand, p)? {
                scores[c] += s;
                any = true;
            }
        }
    }
    Ok(any.then(|| FitbAnswer {
        index: choose(&scores),
        scores,
    }))
}

/// Majority over the runs' choices; ties go to the highest summed candidate
/// score across runs, then to the lowest index.
pub fn vote(answers: &[FitbAnswer]) -> Result<usize> {
    if answers.is_empty() {
        return Err(Error::domain("vote", "no runs to vote over"));
    }
    let mut counts = [0usize; 4];
    let mut totals = [0.0; 4];
    for a in answers {
        counts[a.index] += 1;
        for (t, s) in totals.iter_mut().zip(a.scores) {
            *t += s;
        }
    }
    let top = *counts.iter().max().unwrap_or(&0);
    let mut best: Option<usize> = None;
    for i in (0..4).filter(|&i| counts[i] == top) {
        match best {
            Some(b) if totals[i] <= totals[b] => {}
            _ => best = Some(i),
        }
    }
    Ok(best.unwrap_or(0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct QuestionCounts {
    pub total: usize,
    pub answered: usize,
    /// Dropped because an item has no description.
    pub discarded: usize,
    /// No trained type pair to score.
    pub unanswerable: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunMetrics {
    pub fc_auc: Option<f64>,
    pub fitb_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub runs: Vec<RunMetrics>,
    pub mean_fc_auc: Option<f64>,
    pub mean_fitb_accuracy: Option<f64>,
    pub voted_fitb_accuracy: Option<f64>,
    pub fc: QuestionCounts,
    pub fitb: QuestionCounts,
    /// Item pairs skipped for lacking a trained space, over kept questions.
    pub skipped_pairs: usize,
}

impl MetricsReport {
    /// Names of metrics that could not be computed.
    pub fn undefined_metrics(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (name, v) in [
            ("mean_fc_auc", self.mean_fc_auc),
            ("mean_fitb_accuracy", self.mean_fitb_accuracy),
            ("voted_fitb_accuracy", self.voted_fitb_accuracy),
        ] {
            if v.is_none() {
                out.push(String::from(name));
            }
        }
        out
    }
}

fn mean(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let vals: Option<Vec<f64>> = values.collect();
    let vals = vals?;
    (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
}

/// FC AUC of one model over a question set; questions whose outfit has no
/// scorable pair are left out.
pub fn model_fc_auc(model: &Model, dataset: &Dataset, questions: &[EvalQuestion]) -> Result<f64> {
    let mut scorer = Scorer::new(model, dataset);
    let mut scored = Vec::new();
    for q in questions {
        if let EvalQuestion::Fc(fc) = q {
            if fc.items.iter().any(|&id| !dataset.item(id).is_described()) {
                continue;
            }
            if let Some(s) = outfit_score(&fc.items, &mut scorer)? {
                scored.push((s, fc.compatible));
            }
        }
    }
    fc_auc(&scored)
}

/// Per-run and mean FC AUC and FITB accuracy, plus voted FITB accuracy.
pub fn evaluate(
    dataset: &Dataset,
    questions: &[EvalQuestion],
    models: &[Model],
) -> Result<MetricsReport> {
    let first = models
        .first()
        .ok_or_else(|| Error::domain("evaluate", "no models given"))?;
    let trained: BTreeSet<TypePair> = first.layout.spaces.pairs().collect();
    if models
        .iter()
        .any(|m| !m.layout.spaces.pairs().eq(trained.iter().copied()))
    {
        return Err(Error::Consistency(
            "models disagree on trained type pairs".into(),
        ));
    }
    for q in questions {
        q.validate(dataset)?;
    }
    let filtered = filter_questions(questions, dataset, &trained);
    let mut fc = QuestionCounts::default();
    let mut fitb = QuestionCounts::default();
    for q in questions {
        match q {
            EvalQuestion::Fc(_) => fc.total += 1,
            EvalQuestion::Fitb(_) => fitb.total += 1,
        }
    }
    let kept_fc = filtered
        .kept
        .iter()
        .filter(|k| matches!(k.question, EvalQuestion::Fc(_)))
        .count();
    fc.discarded = fc.total - kept_fc;
    fitb.discarded = fitb.total - (filtered.kept.len() - kept_fc);
    let skipped_pairs = filtered.kept.iter().map(|k| k.skipped_pairs.len()).sum();

    let answerable: Vec<bool> = filtered
        .kept
        .iter()
        .map(|k| k.skipped_pairs.len() < crate::dataset::scored_pairs(&k.question).len())
        .collect();
    for (k, &ok) in filtered.kept.iter().zip(&answerable) {
        let counts = match k.question {
            EvalQuestion::Fc(_) => &mut fc,
            EvalQuestion::Fitb(_) => &mut fitb,
        };
        if ok {
            counts.answered += 1;
        } else {
            counts.unanswerable += 1;
        }
    }

    let mut runs = Vec::with_capacity(models.len());
    let mut per_question_answers: Vec<Vec<FitbAnswer>> = Vec::new();
    for model in models {
        let mut scorer = Scorer::new(model, dataset);
        let mut scored = Vec::new();
        let mut correct = 0usize;
        let mut asked = 0usize;
        let mut fitb_slot = 0usize;
        for (k, &ok) in filtered.kept.iter().zip(&answerable) {
            if !ok {
                continue;
            }
            match &k.question {
                EvalQuestion::Fc(q) => {
                    if let Some(s) = outfit_score(&q.items, &mut scorer)? {
                        scored.push((s, q.compatible));
                    }
                }
                EvalQuestion::Fitb(q) => {
                    if let Some(ans) = fitb_answer(q, &mut scorer)? {
                        asked += 1;
                        if ans.index == q.answer {
                            correct += 1;
                        }
                        if per_question_answers.len() <= fitb_slot {
                            per_question_answers.push(Vec::with_capacity(models.len()));
                        }
                        per_question_answers[fitb_slot].push(ans);
                        fitb_slot += 1;
                    }
                }
            }
        }
        let fc_auc = match fc_auc(&scored) {
            Ok(v) => Some(v),
            Err(Error::UndefinedMetric(_)) => None,
            Err(e) => return Err(e),
        };
        runs.push(RunMetrics {
            fc_auc,
            fitb_accuracy: (asked > 0).then(|| correct as f64 / asked as f64),
        });
    }

    let fitb_truth: Vec<usize> = filtered
        .kept
        .iter()
        .zip(&answerable)
        .filter_map(|(k, &ok)| match (&k.question, ok) {
            (EvalQuestion::Fitb(q), true) => Some(q.answer),
            _ => None,
        })
        .collect();
    let mut voted_correct = 0usize;
    for (answers, &truth) in per_question_answers.iter().zip(&fitb_truth) {
        if vote(answers)? == truth {
            voted_correct += 1;
        }
    }
    let voted_fitb_accuracy =
        (!fitb_truth.is_empty()).then(|| voted_correct as f64 / fitb_truth.len() as f64);

    Ok(MetricsReport {
        mean_fc_auc: mean(runs.iter().map(|r| r.fc_auc)),
        mean_fitb_accuracy: mean(runs.iter().map(|r| r.fitb_accuracy)),
        voted_fitb_accuracy,
        runs,
        fc,
        fitb,
        skipped_pairs,
    })
}
