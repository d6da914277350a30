use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::emotion::EmotionLabel;
use super::timestamp::Timestamp;

pub const UNKNOWN_SPEAKER: &str = "UNKNOWN";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Utterance {
    /// 1-based position within the conversation.
    pub ordinal: u32,
    pub transcript: String,
    pub speaker: String,
    pub start_s: Timestamp,
    pub end_s: Timestamp,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub visual_description: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame_ref: Option<PathBuf>,
}

impl Utterance {
    pub fn word_count(&self) -> usize {
        self.transcript.split_whitespace().count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EpisodeRef {
    pub season: u32,
    pub episode: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conversation {
    pub id: String,
    pub scene_tag: String,
    #[serde(flatten)]
    pub source: EpisodeRef,
    pub duration_s: Timestamp,
    pub utterances: Vec<Utterance>,
}

impl Conversation {
    pub fn utterance(&self, ordinal: u32) -> Option<&Utterance> {
        self.utterances.iter().find(|u| u.ordinal == ordinal)
    }

    pub fn word_count(&self) -> usize {
        self.utterances.iter().map(Utterance::word_count).sum()
    }
}

/// A feeling label observed at a point in time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Feeling {
    pub label: EmotionLabel,
    pub ts: Timestamp,
}

/// A decision, behaviour or perspective with the moment that evidences it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidencedState {
    pub description: String,
    pub evidence_ts: Timestamp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TpType {
    EmotionalOutburst,
    DecisionChange,
    ExternalInfluence,
    PerspectiveShift,
    UncomfortableSituation,
}

impl TpType {
    pub const ALL: [TpType; 5] = [
        TpType::EmotionalOutburst,
        TpType::DecisionChange,
        TpType::ExternalInfluence,
        TpType::PerspectiveShift,
        TpType::UncomfortableSituation,
    ];

    /// Short gloss used when asking a model to categorise a cause.
    pub fn gloss(self) -> &'static str {
        match self {
            TpType::EmotionalOutburst => "someone loses control of their anger or emotions",
            TpType::DecisionChange => "the group abandons a plan and decides to do something else",
            TpType::ExternalInfluence => {
                "a newcomer or outside event changes how people feel or think"
            }
            TpType::PerspectiveShift => "people change their minds and start thinking differently",
            TpType::UncomfortableSituation => {
                "someone violates a social norm and makes others uncomfortable or upset"
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurningPoint {
    pub location_s: Timestamp,
    pub cause: String,
    #[serde(default)]
    pub pre_feelings: Vec<Feeling>,
    #[serde(default)]
    pub post_feelings: Vec<Feeling>,
    #[serde(default)]
    pub pre_dbp: Vec<EvidencedState>,
    #[serde(default)]
    pub post_dbp: Vec<EvidencedState>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub explanation: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub type_tag: Option<TpType>,
}

impl TurningPoint {
    pub fn new(location_s: Timestamp, cause: impl Into<String>) -> Self {
        Self {
            location_s,
            cause: cause.into(),
            pre_feelings: Vec::new(),
            post_feelings: Vec::new(),
            pre_dbp: Vec::new(),
            post_dbp: Vec::new(),
            explanation: None,
            type_tag: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub annotator_id: String,
    /// Implied by the enclosing dataset line; filled on load.
    #[serde(default, skip_serializing)]
    pub conversation_id: String,
    #[serde(default)]
    pub turning_points: Vec<TurningPoint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub no_tp_explanation: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Consensus {
    pub turning_points: Vec<TurningPoint>,
}

/// One line of a dataset file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    #[serde(flatten)]
    pub conversation: Conversation,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub annotations: Vec<AnnotationRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub consensus: Option<Consensus>,
}

impl DatasetRecord {
    pub fn id(&self) -> &str {
        &self.conversation.id
    }

    /// Consensus turning points, or an empty slice when no consensus exists.
    pub fn consensus_points(&self) -> &[TurningPoint] {
        self.consensus
            .as_ref()
            .map(|c| c.turning_points.as_slice())
            .unwrap_or(&[])
    }

    pub fn has_turning_point(&self) -> bool {
        !self.consensus_points().is_empty()
    }
}
