//! Conversations, turning-point annotations and the operations over them.

mod consensus;
mod emotion;
mod io;
mod stats;
mod timestamp;
mod types;
mod validate;

pub use consensus::{
    consensus_merge, ClusterDecision, ConsensusError, ConsensusResult, DEFAULT_DELTA_MERGE_S,
};
pub use emotion::{EmotionLabel, Polarity, UnknownEmotion};
pub use io::{
    parse_record, read_dataset, unknown_fields, write_dataset, DatasetError, LoadWarning,
    Strictness,
};
pub use stats::{dataset_stats, emotion_histogram, DatasetStats, EmotionHistogram};
pub use timestamp::{format_timestamp, parse_timestamp, Timestamp, TimestampError};
pub use types::{
    AnnotationRecord, Consensus, Conversation, DatasetRecord, EpisodeRef, EvidencedState, Feeling,
    TpType, TurningPoint, Utterance, UNKNOWN_SPEAKER,
};
pub use validate::{
    validate_annotation, validate_conversation, validate_record, validate_turning_point,
    ValidationReport, Violation, DURATION_SLACK_S,
};
