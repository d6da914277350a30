use serde::{Deserialize, Serialize};

use super::{f1_score, EvalError};
use crate::mtp_data::Timestamp;

pub const DEFAULT_DELTA_T_S: f64 = 20.0;

/// How predictions are paired with ground truths inside the window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Matching {
    /// A ground truth is found if any prediction lies within the window; a
    /// prediction is correct if any ground truth does. One prediction may
    /// satisfy several ground truths.
    #[default]
    Exists,
    /// Pairs are matched one-to-one, closest first.
    Greedy,
}

/// Predicted and ground-truth turning-point times for one conversation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConversationPoints {
    pub preds: Vec<Timestamp>,
    pub gts: Vec<Timestamp>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DetectionCounts {
    pub matched_gt: usize,
    pub total_gt: usize,
    pub matched_pred: usize,
    pub total_pred: usize,
}

impl DetectionCounts {
    fn add(&mut self, other: DetectionCounts) {
        self.matched_gt += other.matched_gt;
        self.total_gt += other.total_gt;
        self.matched_pred += other.matched_pred;
        self.total_pred += other.total_pred;
    }

    pub fn precision(&self) -> f64 {
        if self.total_pred == 0 {
            0.0
        } else {
            self.matched_pred as f64 / self.total_pred as f64
        }
    }

    pub fn recall(&self) -> f64 {
        if self.total_gt == 0 {
            0.0
        } else {
            self.matched_gt as f64 / self.total_gt as f64
        }
    }
}

/// Pooled (micro) precision/recall/F1 plus per-conversation (macro) means.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DetectionMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub counts: DetectionCounts,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
}

/// Which predictions and ground truths of one conversation were matched.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PointMatches {
    pub gt_matched: Vec<bool>,
    pub pred_matched: Vec<bool>,
}

impl PointMatches {
    pub fn counts(&self) -> DetectionCounts {
        DetectionCounts {
            matched_gt: self.gt_matched.iter().filter(|m| **m).count(),
            total_gt: self.gt_matched.len(),
            matched_pred: self.pred_matched.iter().filter(|m| **m).count(),
            total_pred: self.pred_matched.len(),
        }
    }
}

fn within(a: Timestamp, b: Timestamp, delta_t: f64) -> bool {
    (a.seconds() - b.seconds()).abs() <= delta_t
}

pub fn match_points(points: &ConversationPoints, delta_t: f64, matching: Matching) -> PointMatches {
    match matching {
        Matching::Exists => PointMatches {
            gt_matched: points
                .gts
                .iter()
                .map(|g| points.preds.iter().any(|p| within(*p, *g, delta_t)))
                .collect(),
            pred_matched: points
                .preds
                .iter()
                .map(|p| points.gts.iter().any(|g| within(*p, *g, delta_t)))
                .collect(),
        },
        Matching::Greedy => {
            let mut pairs = Vec::new();
            for (pi, p) in points.preds.iter().enumerate() {
                for (gi, g) in points.gts.iter().enumerate() {
                    let d = (p.seconds() - g.seconds()).abs();
                    if d <= delta_t {
                        pairs.push((d, pi, gi));
                    }
                }
            }
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
            let mut out = PointMatches {
                gt_matched: vec![false; points.gts.len()],
                pred_matched: vec![false; points.preds.len()],
            };
            for (_, pi, gi) in pairs {
                if !out.pred_matched[pi] && !out.gt_matched[gi] {
                    out.pred_matched[pi] = true;
                    out.gt_matched[gi] = true;
                }
            }
            out
        }
    }
}

pub fn check_window(delta_t: f64) -> Result<(), EvalError> {
    if delta_t > 0.0 && delta_t.is_finite() {
        Ok(())
    } else {
        Err(EvalError::InvalidWindow(delta_t))
    }
}

/// Scores the positive set only: every conversation must carry at least one
/// ground-truth point.
pub fn detection_metrics(
    items: &[ConversationPoints],
    delta_t: f64,
    matching: Matching,
) -> Result<DetectionMetrics, EvalError> {
    check_window(delta_t)?;
    if let Some(idx) = items.iter().position(|i| i.gts.is_empty()) {
        return Err(EvalError::NoGroundTruth(idx));
    }
    let mut pooled = DetectionCounts::default();
    let (mut sum_p, mut sum_r, mut sum_f) = (0.0, 0.0, 0.0);
    for item in items {
        let counts = match_points(item, delta_t, matching).counts();
        let (p, r) = (counts.precision(), counts.recall());
        sum_p += p;
        sum_r += r;
        sum_f += f1_score(p, r);
        pooled.add(counts);
    }
    let n = items.len().max(1) as f64;
    let (precision, recall) = (pooled.precision(), pooled.recall());
    Ok(DetectionMetrics {
        precision,
        recall,
        f1: f1_score(precision, recall),
        counts: pooled,
        macro_precision: sum_p / n,
        macro_recall: sum_r / n,
        macro_f1: sum_f / n,
    })
}
