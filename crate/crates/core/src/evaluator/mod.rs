//! Classification and timestamp-detection scoring against consensus labels.

mod classification;
mod detection;
mod report;

use std::collections::{BTreeMap, BTreeSet};
use std::io::BufRead;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use classification::{classification_metrics, roc_auc, ClassificationMetrics, Confusion};
pub use detection::{
    check_window, detection_metrics, match_points, ConversationPoints, DetectionCounts,
    DetectionMetrics, Matching, PointMatches, DEFAULT_DELTA_T_S,
};
pub use report::{render_report, Report, RunMetrics, AUC_FOOTER};

use crate::mtp_data::{DatasetRecord, Timestamp};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("missing predictions for {0:?}")]
    MissingPredictions(Vec<String>),
    #[error("duplicate predictions for {0:?}")]
    DuplicatePredictions(Vec<String>),
    #[error("predictions for conversations not in the dataset: {0:?}")]
    UnknownConversations(Vec<String>),
    #[error("score {score} for {conversation_id} is outside [0, 1]")]
    InvalidScore { conversation_id: String, score: f64 },
    #[error("conversation at position {0} has no ground-truth turning point")]
    NoGroundTruth(usize),
    #[error("matching window must be positive, got {0}")]
    InvalidWindow(f64),
    #[error("submission line {line}: {message}")]
    Submission { line: usize, message: String },
}

pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}

/// One conversation's prediction, from a pipeline run or an external submission.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictionRecord {
    pub conversation_id: String,
    pub has_tp: bool,
    #[serde(default)]
    pub timestamps: Vec<Timestamp>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
}

impl PredictionRecord {
    pub fn effective_score(&self) -> f64 {
        self.score.unwrap_or(if self.has_tp { 1.0 } else { 0.0 })
    }

    /// Timestamps that count for detection: none when the record says no TP.
    pub fn detection_points(&self) -> &[Timestamp] {
        if self.has_tp {
            &self.timestamps
        } else {
            &[]
        }
    }
}

/// Reads a line-delimited submission. Records claiming no turning point but
/// listing timestamps are accepted with a warning.
pub fn read_submission<R: BufRead>(
    reader: R,
) -> Result<(Vec<PredictionRecord>, Vec<String>), EvalError> {
    let mut records = Vec::new();
    let mut warnings = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| EvalError::Submission {
            line: idx + 1,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let record: PredictionRecord =
            serde_json::from_str(&line).map_err(|e| EvalError::Submission {
                line: idx + 1,
                message: e.to_string(),
            })?;
        if !record.has_tp && !record.timestamps.is_empty() {
            warnings.push(format!(
                "line {}: {} has has_tp=false but lists timestamps; they are ignored",
                idx + 1,
                record.conversation_id
            ));
        }
        records.push(record);
    }
    Ok((records, warnings))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConversationDiagnostic {
    pub conversation_id: String,
    pub gt_has_tp: bool,
    pub pred_has_tp: bool,
    pub gt_timestamps: Vec<Timestamp>,
    pub pred_timestamps: Vec<Timestamp>,
    /// Present for conversations in the positive set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matches: Option<PointMatches>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunEvaluation {
    pub delta_t: f64,
    pub matching: Matching,
    pub metrics: RunMetrics,
    pub diagnostics: Vec<ConversationDiagnostic>,
}

/// Classification over every conversation, detection over those whose
/// consensus holds at least one turning point.
pub fn evaluate_run(
    predictions: &[PredictionRecord],
    dataset: &[DatasetRecord],
    delta_t: f64,
    matching: Matching,
) -> Result<RunEvaluation, EvalError> {
    check_window(delta_t)?;
    let gts: BTreeMap<String, bool> = dataset
        .iter()
        .map(|r| (r.id().to_string(), r.has_turning_point()))
        .collect();
    let covered: BTreeSet<&str> = predictions
        .iter()
        .map(|p| p.conversation_id.as_str())
        .collect();
    let missing: Vec<String> = gts
        .keys()
        .filter(|id| !covered.contains(id.as_str()))
        .cloned()
        .collect();
    if !missing.is_empty() {
        return Err(EvalError::MissingPredictions(missing));
    }
    let classification = classification_metrics(predictions, &gts)?;

    let by_id: BTreeMap<&str, &PredictionRecord> = predictions
        .iter()
        .map(|p| (p.conversation_id.as_str(), p))
        .collect();
    let mut positives = Vec::new();
    let mut diagnostics = Vec::with_capacity(dataset.len());
    for record in dataset {
        let pred = by_id[record.id()];
        let gt_timestamps: Vec<Timestamp> = record
            .consensus_points()
            .iter()
            .map(|tp| tp.location_s)
            .collect();
        let points = ConversationPoints {
            preds: pred.detection_points().to_vec(),
            gts: gt_timestamps.clone(),
        };
        let matches = (!gt_timestamps.is_empty()).then(|| match_points(&points, delta_t, matching));
        if !gt_timestamps.is_empty() {
            positives.push(points);
        }
        diagnostics.push(ConversationDiagnostic {
            conversation_id: record.id().to_string(),
            gt_has_tp: record.has_turning_point(),
            pred_has_tp: pred.has_tp,
            gt_timestamps,
            pred_timestamps: pred.timestamps.clone(),
            matches,
        });
    }
    let detection = detection_metrics(&positives, delta_t, matching)?;
    Ok(RunEvaluation {
        delta_t,
        matching,
        metrics: RunMetrics {
            classification,
            detection,
        },
        diagnostics,
    })
}
