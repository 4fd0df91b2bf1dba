//! Evaluation harness: end-to-end daily-dosage scoring against expert
//! ground truth, and strict entity-level scoring.
//!
//! End-to-end counting rules: a prediction is correct when it returns the
//! same minimum and maximum daily dosage value and unit of measurement as
//! the ground truth, per ingredient for combination drugs. A value where the
//! ground truth has none is a false positive; a missing value where the
//! ground truth has one is a false negative; a differing value counts as
//! both. Null reasons are diagnostics and are not scored.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::dosage::{DosageOutcome, IngredientDose, Resolution};
use crate::extract::CompoundKind;
use crate::lexicon::Lexicon;
use crate::scalar::Scalar;

/// Expert ground truth for one order.
#[derive(Debug, Clone, PartialEq)]
pub enum GtOutcome<S> {
    Value(Vec<IngredientDose<S>>),
    /// "No daily dosage", with the expert's reason label when recorded.
    Null {
        reason: Option<String>,
    },
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("prediction/ground-truth key sets differ; missing: {missing:?}, extra: {extra:?}")]
    KeyMismatch {
        missing: Vec<String>,
        extra: Vec<String>,
    },
}

/// Confusion counts plus derived metrics. `precision`/`recall`/`f1`/
/// `accuracy` are exact in the scalar type.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport<S> {
    pub n_correct: usize,
    pub n_incorrect: usize,
    pub n_missed: usize,
    pub n_spurious: usize,
    pub n_both_null: usize,
    pub precision: S,
    pub recall: S,
    pub f1: S,
    pub accuracy: S,
    pub entity_level: Option<EntityLevel<S>>,
}

impl<S: Scalar> EvalReport<S> {
    /// Derive metrics from the five confusion cells.
    /// TP = correct; FP = incorrect + spurious; FN = incorrect + missed;
    /// accuracy = (TP + both-null) / N. Degenerate ratios report 0.
    pub fn from_counts(
        n_correct: usize,
        n_incorrect: usize,
        n_missed: usize,
        n_spurious: usize,
        n_both_null: usize,
    ) -> Self {
        let ratio = |num: usize, den: usize| {
            if den == 0 {
                S::zero()
            } else {
                S::from_int(num as i64) / S::from_int(den as i64)
            }
        };
        let tp = n_correct;
        let fp = n_incorrect + n_spurious;
        let fn_ = n_incorrect + n_missed;
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let two = S::from_int(2);
        let pr_sum = precision.clone() + recall.clone();
        let f1 = if pr_sum == S::zero() {
            S::zero()
        } else {
            two * precision.clone() * recall.clone() / pr_sum
        };
        let n = n_correct + n_incorrect + n_missed + n_spurious + n_both_null;
        let accuracy = ratio(tp + n_both_null, n);
        EvalReport {
            n_correct,
            n_incorrect,
            n_missed,
            n_spurious,
            n_both_null,
            precision,
            recall,
            f1,
            accuracy,
            entity_level: None,
        }
    }

    pub fn total(&self) -> usize {
        self.n_correct + self.n_incorrect + self.n_missed + self.n_spurious + self.n_both_null
    }
}

/// Canonical comparable shape of one dosage value list, or `None` when the
/// outcome counts as "not extracted". Form-count fallbacks (unit `form:*`)
/// only compare against form-based ground truth.
fn comparable<S: Scalar>(doses: &[IngredientDose<S>], lexicon: &Lexicon<S>) -> Vec<(S, S, String)> {
    doses
        .iter()
        .map(|d| match lexicon.unit_entry(&d.unit) {
            Some((canonical, scale)) => (
                d.min_per_day.clone() * scale.clone(),
                d.max_per_day.clone() * scale.clone(),
                canonical.to_string(),
            ),
            None => (
                d.min_per_day.clone(),
                d.max_per_day.clone(),
                d.unit.trim().to_lowercase(),
            ),
        })
        .collect()
}

fn values_match<S: Scalar>(
    pred: &[IngredientDose<S>],
    gt: &[IngredientDose<S>],
    lexicon: &Lexicon<S>,
) -> bool {
    let pred = comparable(pred, lexicon);
    let gt = comparable(gt, lexicon);
    pred.len() == gt.len()
        && pred
            .iter()
            .zip(&gt)
            .all(|(p, g)| p.0 == g.0 && p.1 == g.1 && p.2 == g.2)
}

fn is_form_count<S>(doses: &[IngredientDose<S>]) -> bool {
    doses.iter().any(|d| d.unit.starts_with("form:"))
}

/// Score predictions against ground truth keyed by order id. The key sets
/// must coincide.
pub fn score_end_to_end<S: Scalar>(
    predictions: &BTreeMap<String, DosageOutcome<S>>,
    ground_truth: &BTreeMap<String, GtOutcome<S>>,
    lexicon: &Lexicon<S>,
) -> Result<EvalReport<S>, EvalError> {
    let missing: Vec<String> = ground_truth
        .keys()
        .filter(|k| !predictions.contains_key(*k))
        .cloned()
        .collect();
    let extra: Vec<String> = predictions
        .keys()
        .filter(|k| !ground_truth.contains_key(*k))
        .cloned()
        .collect();
    if !missing.is_empty() || !extra.is_empty() {
        return Err(EvalError::KeyMismatch { missing, extra });
    }
    let mut correct = 0;
    let mut incorrect = 0;
    let mut missed = 0;
    let mut spurious = 0;
    let mut both_null = 0;
    for (id, gt) in ground_truth {
        let pred = &predictions[id];
        // A form-count fallback only stands as a value when the ground truth
        // is itself form-based; otherwise it counts as "not extracted".
        let pred_value = match &pred.resolution {
            Resolution::Value(v) => {
                let gt_form_based = matches!(gt, GtOutcome::Value(g) if is_form_count(g));
                if is_form_count(&v.per_ingredient) && !gt_form_based {
                    None
                } else {
                    Some(&v.per_ingredient)
                }
            }
            Resolution::Null(_) => None,
        };
        match (pred_value, gt) {
            (Some(p), GtOutcome::Value(g)) => {
                if values_match(p, g, lexicon) {
                    correct += 1;
                } else {
                    incorrect += 1;
                }
            }
            (Some(_), GtOutcome::Null { .. }) => spurious += 1,
            (None, GtOutcome::Value(_)) => missed += 1,
            (None, GtOutcome::Null { .. }) => both_null += 1,
        }
    }
    Ok(EvalReport::from_counts(
        correct, incorrect, missed, spurious, both_null,
    ))
}

// ---------------------------------------------------------------------------
// Strict entity-level scoring
// ---------------------------------------------------------------------------

/// A (kind, start, end) annotation for strict span scoring.
pub type SpanAnnotation = (CompoundKind, usize, usize);

#[derive(Debug, Clone, PartialEq)]
pub struct EntityScore<S> {
    pub kind: CompoundKind,
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub precision: S,
    pub recall: S,
    pub f1: S,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EntityLevel<S> {
    pub per_kind: Vec<EntityScore<S>>,
}

/// Strict evaluation: a predicted entity counts only when both its span and
/// kind exactly match a gold annotation. Degenerate ratios report 0.
pub fn score_entities<S: Scalar>(
    predicted: &[SpanAnnotation],
    gold: &[SpanAnnotation],
) -> EntityLevel<S> {
    let kinds = [
        CompoundKind::DosagePerAdministration,
        CompoundKind::AdministrationFrequency,
    ];
    let per_kind = kinds
        .iter()
        .map(|&kind| {
            let mut gold_spans: Vec<(usize, usize)> = gold
                .iter()
                .filter(|(k, _, _)| *k == kind)
                .map(|&(_, s, e)| (s, e))
                .collect();
            let pred_spans: Vec<(usize, usize)> = predicted
                .iter()
                .filter(|(k, _, _)| *k == kind)
                .map(|&(_, s, e)| (s, e))
                .collect();
            let n_pred = pred_spans.len();
            let n_gold = gold_spans.len();
            let mut tp = 0;
            for span in pred_spans {
                if let Some(pos) = gold_spans.iter().position(|&g| g == span) {
                    gold_spans.swap_remove(pos);
                    tp += 1;
                }
            }
            let ratio = |num: usize, den: usize| {
                if den == 0 {
                    S::zero()
                } else {
                    S::from_int(num as i64) / S::from_int(den as i64)
                }
            };
            let precision = ratio(tp, n_pred);
            let recall = ratio(tp, n_gold);
            let pr_sum = precision.clone() + recall.clone();
            let f1 = if pr_sum == S::zero() {
                S::zero()
            } else {
                S::from_int(2) * precision.clone() * recall.clone() / pr_sum
            };
            EntityScore {
                kind,
                tp,
                fp: n_pred - tp,
                fn_: n_gold - tp,
                precision,
                recall,
                f1,
            }
        })
        .collect();
    EntityLevel { per_kind }
}
