//! Two-of-three vote merging of annotator turning points.
//!
//! Every annotator record plus the judge is one participant. Turning points
//! from different participants that fall within `delta_merge` seconds of a
//! cluster's first (earliest) point are considered the same event. A cluster
//! survives when a strict majority of participants endorse it; survivors carry
//! the union of all endorsers' evidence.

use std::cmp::Ordering;
use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::timestamp::Timestamp;
use super::types::{AnnotationRecord, EvidencedState, Feeling, TurningPoint};

pub const DEFAULT_DELTA_MERGE_S: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConsensusError {
    #[error("records reference different conversations: {0:?}")]
    MixedConversations(Vec<String>),
    #[error("consensus needs at least two annotation records, got {0}")]
    TooFewRecords(usize),
    #[error("annotator `{0}` contributed more than one record")]
    DuplicateAnnotator(String),
    #[error("merge window must be positive, got {0}")]
    InvalidWindow(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterDecision {
    /// Earliest proposed location in the cluster.
    pub anchor_s: Timestamp,
    pub location_s: Timestamp,
    pub endorsers: Vec<String>,
    pub votes: usize,
    pub kept: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsensusResult {
    pub conversation_id: String,
    pub participants: Vec<String>,
    pub votes_required: usize,
    pub turning_points: Vec<TurningPoint>,
    pub decisions: Vec<ClusterDecision>,
    /// Every participant proposed something but no two agreed.
    pub deleted: bool,
}

struct Proposal<'a> {
    participant: &'a str,
    tp: &'a TurningPoint,
}

fn proposal_order(a: &Proposal, b: &Proposal) -> Ordering {
    a.tp.location_s
        .seconds()
        .total_cmp(&b.tp.location_s.seconds())
        .then_with(|| a.participant.cmp(b.participant))
        .then_with(|| a.tp.cause.cmp(&b.tp.cause))
        .then_with(|| {
            // final tie-break on full content so ordering never depends on input order
            let ja = serde_json::to_string(a.tp).unwrap_or_default();
            let jb = serde_json::to_string(b.tp).unwrap_or_default();
            ja.cmp(&jb)
        })
}

pub fn consensus_merge(
    records: &[AnnotationRecord],
    judge_id: &str,
    delta_merge: f64,
) -> Result<ConsensusResult, ConsensusError> {
    if !(delta_merge > 0.0 && delta_merge.is_finite()) {
        return Err(ConsensusError::InvalidWindow(delta_merge));
    }
    if records.len() < 2 {
        return Err(ConsensusError::TooFewRecords(records.len()));
    }
    let conversations: BTreeSet<&str> =
        records.iter().map(|r| r.conversation_id.as_str()).collect();
    if conversations.len() > 1 {
        return Err(ConsensusError::MixedConversations(
            conversations.into_iter().map(String::from).collect(),
        ));
    }
    let conversation_id = records[0].conversation_id.clone();

    let mut participants = BTreeSet::new();
    for record in records {
        if !participants.insert(record.annotator_id.as_str()) {
            return Err(ConsensusError::DuplicateAnnotator(
                record.annotator_id.clone(),
            ));
        }
    }
    // the judge votes even when it filed no record of its own
    participants.insert(judge_id);
    let votes_required = participants.len() / 2 + 1;

    let mut proposals: Vec<Proposal> = records
        .iter()
        .flat_map(|r| {
            r.turning_points.iter().map(move |tp| Proposal {
                participant: r.annotator_id.as_str(),
                tp,
            })
        })
        .collect();
    proposals.sort_by(proposal_order);

    let mut clusters: Vec<Vec<&Proposal>> = Vec::new();
    for proposal in &proposals {
        let location = proposal.tp.location_s.seconds();
        let slot = clusters.iter_mut().find(|members| {
            let anchor = members[0].tp.location_s.seconds();
            location - anchor <= delta_merge
                && members
                    .iter()
                    .all(|m| m.participant != proposal.participant)
        });
        match slot {
            Some(members) => members.push(proposal),
            None => clusters.push(vec![proposal]),
        }
    }

    let mut decisions = Vec::with_capacity(clusters.len());
    let mut kept = Vec::new();
    for members in &clusters {
        let votes = members.len();
        let is_kept = votes >= votes_required;
        let (location, tp) = merge_cluster(members, judge_id);
        decisions.push(ClusterDecision {
            anchor_s: members[0].tp.location_s,
            location_s: location,
            endorsers: members.iter().map(|m| m.participant.to_string()).collect(),
            votes,
            kept: is_kept,
        });
        if is_kept {
            kept.push(tp);
        }
    }

    let proposers: BTreeSet<&str> = proposals.iter().map(|p| p.participant).collect();
    let deleted = proposers.len() == participants.len() && clusters.iter().all(|c| c.len() < 2);
    if deleted {
        kept.clear();
    }

    Ok(ConsensusResult {
        conversation_id,
        participants: participants.into_iter().map(String::from).collect(),
        votes_required,
        turning_points: kept,
        decisions,
        deleted,
    })
}

fn merge_cluster(members: &[&Proposal], judge_id: &str) -> (Timestamp, TurningPoint) {
    let annotators: Vec<&&Proposal> = members
        .iter()
        .filter(|m| m.participant != judge_id)
        .collect();
    let source: Vec<&&Proposal> = if annotators.is_empty() {
        members.iter().collect()
    } else {
        annotators
    };
    let mean = source
        .iter()
        .map(|m| m.tp.location_s.seconds())
        .sum::<f64>()
        / source.len() as f64;
    let location = Timestamp::from_secs(mean);

    let lead = source[0].tp;
    let mut merged = TurningPoint::new(location, lead.cause.clone());
    merged.explanation = source.iter().find_map(|m| m.tp.explanation.clone());
    merged.type_tag = members.iter().find_map(|m| m.tp.type_tag);
    merged.pre_feelings = union_feelings(members.iter().flat_map(|m| &m.tp.pre_feelings));
    merged.post_feelings = union_feelings(members.iter().flat_map(|m| &m.tp.post_feelings));
    merged.pre_dbp = union_states(members.iter().flat_map(|m| &m.tp.pre_dbp));
    merged.post_dbp = union_states(members.iter().flat_map(|m| &m.tp.post_dbp));
    (location, merged)
}

fn union_feelings<'a>(items: impl Iterator<Item = &'a Feeling>) -> Vec<Feeling> {
    let mut out: Vec<Feeling> = items.cloned().collect();
    out.sort_by(|a, b| {
        a.ts.seconds()
            .total_cmp(&b.ts.seconds())
            .then(a.label.cmp(&b.label))
    });
    out.dedup();
    out
}

fn union_states<'a>(items: impl Iterator<Item = &'a EvidencedState>) -> Vec<EvidencedState> {
    let mut out: Vec<EvidencedState> = items.cloned().collect();
    out.sort_by(|a, b| {
        a.evidence_ts
            .seconds()
            .total_cmp(&b.evidence_ts.seconds())
            .then_with(|| a.description.cmp(&b.description))
    });
    out.dedup();
    out
}
