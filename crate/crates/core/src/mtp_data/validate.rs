use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;

use super::types::{AnnotationRecord, Conversation, DatasetRecord, TurningPoint};

/// Allowed overrun of an utterance end past the conversation duration.
pub const DURATION_SLACK_S: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub path: String,
    pub rule: &'static str,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {} ({})", self.path, self.rule, self.detail)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn rules(&self) -> Vec<&'static str> {
        self.violations.iter().map(|v| v.rule).collect()
    }

    fn push(&mut self, path: impl Into<String>, rule: &'static str, detail: impl Into<String>) {
        self.violations.push(Violation {
            path: path.into(),
            rule,
            detail: detail.into(),
        });
    }

    fn extend(&mut self, other: ValidationReport) {
        self.violations.extend(other.violations);
    }
}

pub fn validate_conversation(conv: &Conversation) -> ValidationReport {
    let mut report = ValidationReport::default();
    let prefix = format!("conversation[{}]", conv.id);

    if conv.id.trim().is_empty() {
        report.push(&prefix, "empty_id", "conversation id is blank");
    }

    for (idx, utt) in conv.utterances.iter().enumerate() {
        let path = format!("{prefix}.utterances[{idx}]");
        if utt.start_s > utt.end_s {
            report.push(
                &path,
                "start_after_end",
                format!("start {} > end {}", utt.start_s, utt.end_s),
            );
        }
        if utt.transcript.trim().is_empty() {
            report.push(&path, "empty_transcript", "transcript is blank");
        }
        if utt.end_s.seconds() > conv.duration_s.seconds() + DURATION_SLACK_S {
            report.push(
                &path,
                "end_after_duration",
                format!("end {} exceeds duration {}", utt.end_s, conv.duration_s),
            );
        }
    }

    let mut seen = BTreeSet::new();
    let mut duplicated = false;
    for utt in &conv.utterances {
        if !seen.insert(utt.ordinal) {
            duplicated = true;
            report.push(
                format!("{prefix}.utterances"),
                "duplicate_ordinal",
                format!("ordinal {} appears more than once", utt.ordinal),
            );
        }
    }
    let m = conv.utterances.len() as u32;
    if !duplicated && !seen.iter().copied().eq(1..=m) {
        report.push(
            format!("{prefix}.utterances"),
            "non_contiguous_ordinals",
            format!("ordinals {:?} are not 1..={m}", seen),
        );
    }

    let mut by_ordinal: Vec<_> = conv.utterances.iter().collect();
    by_ordinal.sort_by_key(|u| u.ordinal);
    for pair in by_ordinal.windows(2) {
        if pair[1].start_s < pair[0].start_s {
            report.push(
                format!("{prefix}.utterances"),
                "start_not_monotonic",
                format!(
                    "utterance {} starts before utterance {}",
                    pair[1].ordinal, pair[0].ordinal
                ),
            );
        }
    }

    report
}

pub fn validate_turning_point(
    tp: &TurningPoint,
    conv: &Conversation,
    path: &str,
) -> ValidationReport {
    let mut report = ValidationReport::default();
    let duration = conv.duration_s;
    if tp.cause.trim().is_empty() {
        report.push(path, "empty_cause", "turning point cause is blank");
    }
    if tp.location_s > duration {
        report.push(
            path,
            "tp_after_duration",
            format!("location {} exceeds duration {duration}", tp.location_s),
        );
    }
    let feelings = tp.pre_feelings.iter().chain(&tp.post_feelings);
    for feeling in feelings {
        if feeling.ts > duration {
            report.push(
                path,
                "evidence_after_duration",
                format!(
                    "{} at {} exceeds duration {duration}",
                    feeling.label, feeling.ts
                ),
            );
        }
    }
    for state in tp.pre_dbp.iter().chain(&tp.post_dbp) {
        if state.evidence_ts > duration {
            report.push(
                path,
                "evidence_after_duration",
                format!(
                    "evidence at {} exceeds duration {duration}",
                    state.evidence_ts
                ),
            );
        }
    }
    report
}

pub fn validate_annotation(record: &AnnotationRecord, conv: &Conversation) -> ValidationReport {
    let mut report = ValidationReport::default();
    let path = format!(
        "conversation[{}].annotations[{}]",
        conv.id, record.annotator_id
    );
    if !record.conversation_id.is_empty() && record.conversation_id != conv.id {
        report.push(
            &path,
            "annotation_conversation_mismatch",
            format!("record names conversation {}", record.conversation_id),
        );
    }
    if record.turning_points.is_empty()
        && record
            .no_tp_explanation
            .as_deref()
            .is_none_or(|e| e.trim().is_empty())
    {
        report.push(
            &path,
            "missing_no_tp_explanation",
            "no turning points and no explanation",
        );
    }
    for (idx, tp) in record.turning_points.iter().enumerate() {
        report.extend(validate_turning_point(
            tp,
            conv,
            &format!("{path}.turning_points[{idx}]"),
        ));
    }
    report
}

/// Conversation invariants plus every annotation and consensus turning point.
pub fn validate_record(record: &DatasetRecord) -> ValidationReport {
    let conv = &record.conversation;
    let mut report = validate_conversation(conv);
    let mut annotators = BTreeSet::new();
    for annotation in &record.annotations {
        if !annotators.insert(annotation.annotator_id.as_str()) {
            report.push(
                format!("conversation[{}].annotations", conv.id),
                "duplicate_annotator",
                format!("annotator {} appears twice", annotation.annotator_id),
            );
        }
        report.extend(validate_annotation(annotation, conv));
    }
    for (idx, tp) in record.consensus_points().iter().enumerate() {
        let path = format!("conversation[{}].consensus.turning_points[{idx}]", conv.id);
        report.extend(validate_turning_point(tp, conv, &path));
    }
    report
}
