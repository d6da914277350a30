//! Per-utterance visual narrative: one frame described by a vision model,
//! then compressed by a text model.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::{ChatMessage, Gateway, GatewayError, ImageInput};
use crate::mtp_data::Conversation;

pub const DESCRIBE_PROMPT: &str = "Give me the short descriptions of the actions, facial expressions, postures, gestures, potential emotions (with valence and arousal)";
pub const DEFAULT_WORD_LIMIT: usize = 60;
pub const MIN_WORD_LIMIT: usize = 10;
pub const DEFAULT_FAILURE_CEILING: f64 = 0.5;

#[derive(Debug, Error)]
pub enum DescriberError {
    #[error("{path}: {message}")]
    Image { path: PathBuf, message: String },
    #[error("invalid input: {0}")]
    Input(String),
    #[error("model returned an empty description")]
    Empty,
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("{failed} of {total} utterances failed, above the allowed fraction {ceiling}")]
    TooManyFailures {
        failed: usize,
        total: usize,
        ceiling: f64,
    },
}

pub fn summarizer_prompt(raw: &str, word_limit: usize) -> String {
    format!(
        "Summarize the following scene description in at most {word_limit} words, keeping actions, facial expressions, and emotions: {raw}"
    )
}

/// MIME type from the leading bytes, for the formats vision endpoints accept.
pub fn sniff_image(bytes: &[u8]) -> Option<&'static str> {
    match bytes {
        [0x89, b'P', b'N', b'G', 0x0D, 0x0A, 0x1A, 0x0A, ..] => Some("image/png"),
        [0xFF, 0xD8, 0xFF, ..] => Some("image/jpeg"),
        [b'G', b'I', b'F', b'8', b'7' | b'9', b'a', ..] => Some("image/gif"),
        [b'R', b'I', b'F', b'F', _, _, _, _, b'W', b'E', b'B', b'P', ..] => Some("image/webp"),
        [b'B', b'M', ..] => Some("image/bmp"),
        _ => None,
    }
}

pub fn load_image(path: &Path) -> Result<ImageInput, DescriberError> {
    let err = |message: String| DescriberError::Image {
        path: path.to_path_buf(),
        message,
    };
    let bytes = std::fs::read(path).map_err(|e| err(e.to_string()))?;
    let mime =
        sniff_image(&bytes).ok_or_else(|| err("not a PNG, JPEG, GIF, WebP or BMP image".into()))?;
    Ok(ImageInput::new(mime, bytes))
}

/// Raw vision-model description of one frame.
pub fn describe_frame(path: &Path, vlm: &Gateway) -> Result<String, DescriberError> {
    let image = load_image(path)?;
    let text = vlm.chat(vec![ChatMessage::user(DESCRIBE_PROMPT).with_image(image)])?;
    let text = text.trim();
    if text.is_empty() {
        return Err(DescriberError::Empty);
    }
    Ok(text.to_string())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Summary {
    pub text: String,
    /// The model overshot the limit and the text was cut at a word boundary.
    pub truncated: bool,
}

pub fn truncate_words(text: &str, limit: usize) -> (String, bool) {
    let words: Vec<&str> = text.split_whitespace().collect();
    if words.len() <= limit {
        (text.trim().to_string(), false)
    } else {
        (words[..limit].join(" "), true)
    }
}

pub fn summarize_description(
    raw: &str,
    llm: &Gateway,
    word_limit: usize,
) -> Result<Summary, DescriberError> {
    if raw.trim().is_empty() {
        return Err(DescriberError::Input("nothing to summarize".into()));
    }
    if word_limit < MIN_WORD_LIMIT {
        return Err(DescriberError::Input(format!(
            "word limit must be at least {MIN_WORD_LIMIT}, got {word_limit}"
        )));
    }
    let answer = llm.chat(vec![ChatMessage::user(summarizer_prompt(
        raw.trim(),
        word_limit,
    ))])?;
    let (text, truncated) = truncate_words(&answer, word_limit);
    if truncated {
        log::warn!("summary cut to {word_limit} words");
    }
    Ok(Summary { text, truncated })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisualDescription {
    pub ordinal: u32,
    pub raw: String,
    pub summary: String,
    pub frame_ref: PathBuf,
    pub word_limit: usize,
    pub truncated: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DescribeOptions {
    pub word_limit: usize,
    /// Abort when more than this fraction of utterances fail.
    pub failure_ceiling: f64,
}

impl Default for DescribeOptions {
    fn default() -> Self {
        Self {
            word_limit: DEFAULT_WORD_LIMIT,
            failure_ceiling: DEFAULT_FAILURE_CEILING,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DescribedConversation {
    pub conversation: Conversation,
    pub descriptions: Vec<VisualDescription>,
    pub warnings: Vec<String>,
}

fn describe_one(
    frame: Option<&Path>,
    ordinal: u32,
    vlm: &Gateway,
    llm: &Gateway,
    word_limit: usize,
) -> Result<VisualDescription, DescriberError> {
    let frame =
        frame.ok_or_else(|| DescriberError::Input(format!("utterance_{ordinal} has no frame")))?;
    let raw = describe_frame(frame, vlm)?;
    let summary = summarize_description(&raw, llm, word_limit)?;
    Ok(VisualDescription {
        ordinal,
        raw,
        summary: summary.text,
        frame_ref: frame.to_path_buf(),
        word_limit,
        truncated: summary.truncated,
    })
}

/// Fills `visual_description` for every utterance. A failed utterance gets
/// an empty description and a warning unless failures exceed the ceiling.
pub fn describe_conversation(
    conv: &Conversation,
    vlm: &Gateway,
    llm: &Gateway,
    options: DescribeOptions,
) -> Result<DescribedConversation, DescriberError> {
    if options.word_limit < MIN_WORD_LIMIT {
        return Err(DescriberError::Input(format!(
            "word limit must be at least {MIN_WORD_LIMIT}, got {}",
            options.word_limit
        )));
    }
    if !(0.0..=1.0).contains(&options.failure_ceiling) {
        return Err(DescriberError::Input(format!(
            "failure ceiling must be in [0, 1], got {}",
            options.failure_ceiling
        )));
    }
    let results = crate::par_map(&conv.utterances, |u| {
        describe_one(
            u.frame_ref.as_deref(),
            u.ordinal,
            vlm,
            llm,
            options.word_limit,
        )
    });

    let mut out = conv.clone();
    let mut descriptions = Vec::new();
    let mut warnings = Vec::new();
    for (u, result) in out.utterances.iter_mut().zip(results) {
        match result {
            Ok(d) => {
                if d.truncated {
                    warnings.push(format!(
                        "utterance_{}: summary cut to {} words",
                        d.ordinal, d.word_limit
                    ));
                }
                u.visual_description = Some(d.summary.clone());
                descriptions.push(d);
            }
            Err(e) => {
                warnings.push(format!(
                    "utterance_{}: {e}; leaving the description empty",
                    u.ordinal
                ));
                u.visual_description = Some(String::new());
            }
        }
    }
    let total = conv.utterances.len();
    let failed = total - descriptions.len();
    if total > 0 && failed as f64 / total as f64 > options.failure_ceiling {
        return Err(DescriberError::TooManyFailures {
            failed,
            total,
            ceiling: options.failure_ceiling,
        });
    }
    Ok(DescribedConversation {
        conversation: out,
        descriptions,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::gateway::{MockBackend, MockFixture, MockRule, RequestKind, ResponseCache};
    use crate::mtp_data::{EpisodeRef, Timestamp, Utterance};

    const PNG: &[u8] = &[0x89, b'P', b'N', b'G', 0x0D, 0x0A, 0x1A, 0x0A, 0, 0, 0, 13];

    fn rules() -> Vec<MockRule> {
        vec![
            MockRule {
                kind: Some(RequestKind::VisionChat),
                contains: vec![DESCRIBE_PROMPT.into()],
                regex: None,
                response: Some("A man shrugging, palms up; confused, neutral valence, medium arousal.".into()),
                fail: None,
            },
            MockRule {
                kind: Some(RequestKind::Chat),
                contains: vec![],
                regex: Some(r"in at most \d+ words, keeping actions, facial expressions, and emotions: (?s)(.*)".into()),
                response: Some("Summary: $1".into()),
                fail: None,
            },
        ]
    }

    fn backend(rules: Vec<MockRule>) -> Arc<MockBackend> {
        Arc::new(
            MockBackend::new(MockFixture {
                rules,
                ..MockFixture::default()
            })
            .unwrap(),
        )
    }

    fn frames(dir: &Path, n: usize) -> Vec<PathBuf> {
        (1..=n)
            .map(|i| {
                let p = dir.join(format!("f{i}.png"));
                let mut bytes = PNG.to_vec();
                bytes.push(i as u8);
                std::fs::write(&p, bytes).unwrap();
                p
            })
            .collect()
    }

    fn conv(frames: &[Option<PathBuf>]) -> Conversation {
        Conversation {
            id: "c".into(),
            scene_tag: "s".into(),
            source: EpisodeRef {
                season: 1,
                episode: 1,
            },
            duration_s: Timestamp::from_secs(30.0),
            utterances: frames
                .iter()
                .zip(1u32..)
                .map(|(f, i)| Utterance {
                    ordinal: i,
                    transcript: "x".into(),
                    speaker: "A".into(),
                    start_s: Timestamp::from_secs(i as f64),
                    end_s: Timestamp::from_secs(i as f64 + 0.5),
                    visual_description: None,
                    frame_ref: f.clone(),
                })
                .collect(),
        }
    }

    #[test]
    fn sniffing() {
        assert_eq!(sniff_image(PNG), Some("image/png"));
        assert_eq!(sniff_image(&[0xFF, 0xD8, 0xFF, 0xE0]), Some("image/jpeg"));
        assert_eq!(sniff_image(b"GIF89a.."), Some("image/gif"));
        assert_eq!(sniff_image(b"RIFF\0\0\0\0WEBPVP8 "), Some("image/webp"));
        assert_eq!(sniff_image(b"BM...."), Some("image/bmp"));
        assert_eq!(sniff_image(b"hello"), None);
        assert_eq!(sniff_image(b""), None);
    }

    #[test]
    fn frame_description_is_cached() {
        let dir = tempfile::tempdir().unwrap();
        let frame = &frames(dir.path(), 1)[0];
        let be = backend(rules());
        let cache = Arc::new(ResponseCache::open(dir.path().join("cache")).unwrap());
        let vlm = Gateway::new(be.clone(), "vlm").with_cache(cache.clone());
        let first = describe_frame(frame, &vlm).unwrap();
        assert!(first.starts_with("A man shrugging"));
        assert_eq!(be.calls(), 1);
        assert_eq!(describe_frame(frame, &vlm).unwrap(), first);
        assert_eq!(be.calls(), 1);
        assert_eq!(cache.len(), 1);
    }

    #[test]
    fn unreadable_frames_name_the_path() {
        let dir = tempfile::tempdir().unwrap();
        let vlm = Gateway::new(backend(rules()), "vlm");
        let missing = dir.path().join("nope.png");
        let err = describe_frame(&missing, &vlm).unwrap_err();
        assert!(err.to_string().contains("nope.png"));
        let text = dir.path().join("notes.png");
        std::fs::write(&text, "plain text").unwrap();
        assert!(matches!(
            describe_frame(&text, &vlm),
            Err(DescriberError::Image { .. })
        ));
    }

    #[test]
    fn summarizer_limits() {
        let llm = Gateway::new(backend(rules()), "llm");
        let s = summarize_description("He waves.", &llm, 60).unwrap();
        assert_eq!(
            s,
            Summary {
                text: "Summary: He waves.".into(),
                truncated: false
            }
        );

        let long = vec!["word"; 200].join(" ");
        let echo = Gateway::new(
            backend(vec![MockRule {
                kind: None,
                contains: vec![],
                regex: None,
                response: Some(long.clone()),
                fail: None,
            }]),
            "llm",
        );
        let s = summarize_description("x", &echo, 60).unwrap();
        assert!(s.truncated);
        assert_eq!(s.text.split_whitespace().count(), 60);

        assert!(matches!(
            summarize_description("  ", &llm, 60),
            Err(DescriberError::Input(_))
        ));
        assert!(matches!(
            summarize_description("x", &llm, 9),
            Err(DescriberError::Input(_))
        ));
    }

    #[test]
    fn conversation_degrades_then_aborts() {
        let dir = tempfile::tempdir().unwrap();
        let f = frames(dir.path(), 3);
        let gw = Gateway::new(backend(rules()), "m");

        let all = describe_conversation(
            &conv(&f.iter().cloned().map(Some).collect::<Vec<_>>()),
            &gw,
            &gw,
            DescribeOptions::default(),
        )
        .unwrap();
        assert_eq!(all.descriptions.len(), 3);
        assert!(all.conversation.utterances.iter().all(|u| u
            .visual_description
            .as_deref()
            .unwrap()
            .starts_with("Summary: A man")));
        assert!(all.warnings.is_empty());

        let one_bad = conv(&[
            Some(f[0].clone()),
            Some(dir.path().join("gone.png")),
            Some(f[2].clone()),
        ]);
        let out = describe_conversation(&one_bad, &gw, &gw, DescribeOptions::default()).unwrap();
        assert_eq!(out.descriptions.len(), 2);
        assert_eq!(
            out.conversation.utterances[1].visual_description.as_deref(),
            Some("")
        );
        assert_eq!(out.warnings.len(), 1);

        let two_bad = conv(&[Some(f[0].clone()), None, Some(dir.path().join("gone.png"))]);
        assert!(matches!(
            describe_conversation(&two_bad, &gw, &gw, DescribeOptions::default()),
            Err(DescriberError::TooManyFailures {
                failed: 2,
                total: 3,
                ..
            })
        ));
    }

    #[test]
    fn rerun_with_cache_makes_no_calls() {
        let dir = tempfile::tempdir().unwrap();
        let f = frames(dir.path(), 3);
        let be = backend(rules());
        let cache = Arc::new(ResponseCache::open(dir.path().join("cache")).unwrap());
        let gw = Gateway::new(be.clone(), "m").with_cache(cache);
        let c = conv(&f.into_iter().map(Some).collect::<Vec<_>>());
        let first = describe_conversation(&c, &gw, &gw, DescribeOptions::default()).unwrap();
        let calls = be.calls();
        // three frames; identical raw text summarised once
        assert_eq!(calls, 4);
        let second = describe_conversation(&c, &gw, &gw, DescribeOptions::default()).unwrap();
        assert_eq!(be.calls(), calls);
        assert_eq!(
            serde_json::to_string(&first.conversation).unwrap(),
            serde_json::to_string(&second.conversation).unwrap()
        );
    }
}
