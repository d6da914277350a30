//! Building conversations from raw inputs: ASR alignments, speaker
//! attribution, scene clips and per-utterance frames.

mod asr;
mod clips;
mod frames;
mod speakers;

use std::path::PathBuf;

use thiserror::Error;

pub use asr::{conversation_from_utterances, ingest_asr_alignment, AsrSegment};
pub use clips::{clip_manifest, run_jobs, slug, ClipJob, SceneBoundary};
pub use frames::{attach_frames, frame_jobs, sample_frame_time, FrameJob, FrameMode, FramePolicy};
pub use speakers::{
    attribute_speakers, confirmation_prompt, AttributionDecision, AttributionEntry,
    AttributionReport, ScriptLine, DEFAULT_SIM_THRESHOLD,
};

use crate::gateway::GatewayError;

#[derive(Debug, Error)]
pub enum PreprocessError {
    #[error("segment {index}: {message}")]
    Ingest { index: usize, message: String },
    #[error("invalid input: {0}")]
    Input(String),
    #[error("scenes {first} and {second} overlap")]
    Overlap { first: String, second: String },
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("`{program}` failed for {output}: {status}")]
    Tool {
        program: String,
        output: PathBuf,
        status: String,
    },
}
