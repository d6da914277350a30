use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{f1_score, EvalError, PredictionRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

impl Confusion {
    pub fn positives(&self) -> usize {
        self.tp + self.fn_
    }

    pub fn negatives(&self) -> usize {
        self.tn + self.fp
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ClassificationMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub auc: f64,
    pub confusion: Confusion,
}

/// Area under the ROC curve as the Mann-Whitney statistic: over every
/// (positive, negative) pair a win scores 1, a tie 1/2. Counted in half
/// units so the numerator stays an exact integer. Returns 0.5 when either
/// class is empty.
pub fn roc_auc(labels: &[bool], scores: &[f64]) -> f64 {
    assert_eq!(labels.len(), scores.len(), "labels and scores must align");
    let mut negatives: Vec<f64> = labels
        .iter()
        .zip(scores)
        .filter(|(l, _)| !**l)
        .map(|(_, s)| *s)
        .collect();
    negatives.sort_by(f64::total_cmp);
    let n_neg = negatives.len() as u64;
    let mut n_pos = 0u64;
    let mut half_wins = 0u64;
    for (_, &score) in labels.iter().zip(scores).filter(|(l, _)| **l) {
        n_pos += 1;
        let below = negatives.partition_point(|&n| n < score) as u64;
        let not_above = negatives.partition_point(|&n| n <= score) as u64;
        half_wins += 2 * below + (not_above - below);
    }
    if n_pos == 0 || n_neg == 0 {
        return 0.5;
    }
    half_wins as f64 / (2 * n_pos * n_neg) as f64
}

pub fn classification_metrics(
    preds: &[PredictionRecord],
    gts: &BTreeMap<String, bool>,
) -> Result<ClassificationMetrics, EvalError> {
    let mut by_id: BTreeMap<&str, &PredictionRecord> = BTreeMap::new();
    let mut duplicates = BTreeSet::new();
    for pred in preds {
        if by_id.insert(pred.conversation_id.as_str(), pred).is_some() {
            duplicates.insert(pred.conversation_id.clone());
        }
    }
    if !duplicates.is_empty() {
        return Err(EvalError::DuplicatePredictions(
            duplicates.into_iter().collect(),
        ));
    }
    let missing: Vec<String> = gts
        .keys()
        .filter(|id| !by_id.contains_key(id.as_str()))
        .cloned()
        .collect();
    if !missing.is_empty() {
        return Err(EvalError::MissingPredictions(missing));
    }
    let unexpected: Vec<String> = by_id
        .keys()
        .filter(|id| !gts.contains_key(**id))
        .map(|id| id.to_string())
        .collect();
    if !unexpected.is_empty() {
        return Err(EvalError::UnknownConversations(unexpected));
    }

    let mut confusion = Confusion::default();
    let mut labels = Vec::with_capacity(gts.len());
    let mut scores = Vec::with_capacity(gts.len());
    for (id, &truth) in gts {
        let pred = by_id[id.as_str()];
        let score = pred.effective_score();
        if !(0.0..=1.0).contains(&score) {
            return Err(EvalError::InvalidScore {
                conversation_id: id.clone(),
                score,
            });
        }
        match (truth, pred.has_tp) {
            (true, true) => confusion.tp += 1,
            (true, false) => confusion.fn_ += 1,
            (false, true) => confusion.fp += 1,
            (false, false) => confusion.tn += 1,
        }
        labels.push(truth);
        scores.push(score);
    }

    let precision = ratio(confusion.tp, confusion.tp + confusion.fp);
    let recall = ratio(confusion.tp, confusion.positives());
    Ok(ClassificationMetrics {
        precision,
        recall,
        f1: f1_score(precision, recall),
        auc: roc_auc(&labels, &scores),
        confusion,
    })
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mtp_data::Timestamp;

    fn pred(id: &str, has_tp: bool) -> PredictionRecord {
        PredictionRecord {
            conversation_id: id.into(),
            has_tp,
            timestamps: if has_tp {
                vec![Timestamp::ZERO]
            } else {
                vec![]
            },
            score: None,
        }
    }

    fn gts(labels: &[bool]) -> BTreeMap<String, bool> {
        labels
            .iter()
            .enumerate()
            .map(|(i, l)| (format!("c{i}"), *l))
            .collect()
    }

    #[test]
    fn perfect_predictions() {
        let g = gts(&[true, false, true, false]);
        let p: Vec<_> = g.iter().map(|(id, l)| pred(id, *l)).collect();
        let m = classification_metrics(&p, &g).unwrap();
        assert_eq!((m.precision, m.recall, m.f1, m.auc), (1.0, 1.0, 1.0, 1.0));
    }

    #[test]
    fn hand_enumerated_example() {
        // positives score {1,1,0} vs the negative's 1: 0.5 + 0.5 + 0 over 3 pairs
        let g = gts(&[true, true, true, false]);
        let p = vec![
            pred("c0", true),
            pred("c1", true),
            pred("c2", false),
            pred("c3", true),
        ];
        let m = classification_metrics(&p, &g).unwrap();
        assert_eq!(m.precision, 2.0 / 3.0);
        assert_eq!(m.recall, 2.0 / 3.0);
        assert!((m.f1 - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(m.auc, 1.0 / 3.0);
        assert_eq!(
            m.confusion,
            Confusion {
                tp: 2,
                fp: 1,
                fn_: 1,
                tn: 0
            }
        );
    }

    #[test]
    fn all_positive_on_class_counts_of_full_split() {
        let labels: Vec<bool> = (0..340).map(|i| i < 214).collect();
        let g = gts(&labels);
        let p: Vec<_> = g.keys().map(|id| pred(id, true)).collect();
        let m = classification_metrics(&p, &g).unwrap();
        assert_eq!(m.recall, 1.0);
        assert_eq!(m.precision, 214.0 / 340.0);
        assert_eq!(m.auc, 0.5);
    }

    #[test]
    fn coverage_errors_list_ids() {
        let g = gts(&[true, false]);
        let err = classification_metrics(&[pred("c0", true)], &g).unwrap_err();
        assert!(matches!(err, EvalError::MissingPredictions(ids) if ids == vec!["c1"]));
        let err =
            classification_metrics(&[pred("c0", true), pred("c0", true), pred("c1", false)], &g)
                .unwrap_err();
        assert!(matches!(err, EvalError::DuplicatePredictions(ids) if ids == vec!["c0"]));
    }

    #[test]
    fn graded_scores() {
        // pos {0.9, 0.4}, neg {0.5, 0.1}: wins 0.9>0.5, 0.9>0.1, 0.4>0.1 => 3/4
        let auc = roc_auc(&[true, true, false, false], &[0.9, 0.4, 0.5, 0.1]);
        assert_eq!(auc, 0.75);
    }
}
