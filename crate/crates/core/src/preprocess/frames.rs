use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::mtp_data::{Conversation, Timestamp, Utterance};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameMode {
    #[default]
    RandomInUtterance,
    Midpoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FramePolicy {
    pub mode: FrameMode,
    #[serde(default)]
    pub seed: u64,
}

fn rng_for(seed: u64, conversation_id: &str, ordinal: u32) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update((conversation_id.len() as u64).to_le_bytes());
    h.update(conversation_id.as_bytes());
    h.update(ordinal.to_le_bytes());
    ChaCha8Rng::from_seed(h.finalize().into())
}

/// A time inside the utterance. Random picks depend only on
/// (seed, conversation id, ordinal), never on call order.
pub fn sample_frame_time(utt: &Utterance, policy: FramePolicy, conversation_id: &str) -> Timestamp {
    let (start, end) = (utt.start_s.seconds(), utt.end_s.seconds());
    if end <= start {
        return utt.start_s;
    }
    let t = match policy.mode {
        FrameMode::Midpoint => (start + end) / 2.0,
        FrameMode::RandomInUtterance => {
            rng_for(policy.seed, conversation_id, utt.ordinal).random_range(start..=end)
        }
    };
    Timestamp::from_secs(t.clamp(start, end))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameJob {
    pub conversation_id: String,
    pub ordinal: u32,
    /// Offset into the conversation clip.
    pub time_s: Timestamp,
    pub input: PathBuf,
    pub output: PathBuf,
}

impl FrameJob {
    pub fn ffmpeg_args(&self) -> Vec<String> {
        vec![
            "-y".into(),
            "-loglevel".into(),
            "error".into(),
            "-ss".into(),
            self.time_s.to_string(),
            "-i".into(),
            self.input.display().to_string(),
            "-frames:v".into(),
            "1".into(),
            self.output.display().to_string(),
        ]
    }
}

/// One frame per utterance, written to `<out_dir>/<conversation id>/utterance_NNN.jpg`.
pub fn frame_jobs(
    conv: &Conversation,
    clip: &Path,
    policy: FramePolicy,
    out_dir: &Path,
) -> Vec<FrameJob> {
    let dir = out_dir.join(super::slug(&conv.id));
    conv.utterances
        .iter()
        .map(|u| FrameJob {
            conversation_id: conv.id.clone(),
            ordinal: u.ordinal,
            time_s: sample_frame_time(u, policy, &conv.id),
            input: clip.to_path_buf(),
            output: dir.join(format!("utterance_{:03}.jpg", u.ordinal)),
        })
        .collect()
}

/// Sets `frame_ref` from jobs of this conversation, matched by ordinal.
pub fn attach_frames(conv: &mut Conversation, jobs: &[FrameJob]) {
    for job in jobs.iter().filter(|j| j.conversation_id == conv.id) {
        if let Some(u) = conv
            .utterances
            .iter_mut()
            .find(|u| u.ordinal == job.ordinal)
        {
            u.frame_ref = Some(job.output.clone());
        }
    }
}
