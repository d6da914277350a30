use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::PreprocessError;
use crate::mtp_data::{Conversation, EpisodeRef, Timestamp, Utterance, UNKNOWN_SPEAKER};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsrSegment {
    pub start_s: Timestamp,
    pub end_s: Timestamp,
    pub text: String,
}

fn seconds(seg: &Value, field: &str, index: usize) -> Result<Timestamp, PreprocessError> {
    let err = |message: String| PreprocessError::Ingest { index, message };
    let value = seg
        .get(field)
        .ok_or_else(|| err(format!("missing `{field}`")))?;
    let secs = value
        .as_f64()
        .ok_or_else(|| err(format!("`{field}` is not a number: {value}")))?;
    Timestamp::new(secs).map_err(|e| err(format!("`{field}`: {e}")))
}

fn segment(seg: &Value, index: usize) -> Result<AsrSegment, PreprocessError> {
    let err = |message: &str| PreprocessError::Ingest {
        index,
        message: message.to_string(),
    };
    let start_s = seconds(seg, "start", index)?;
    let end_s = seconds(seg, "end", index)?;
    let text = seg
        .get("text")
        .ok_or_else(|| err("missing `text`"))?
        .as_str()
        .ok_or_else(|| err("`text` is not a string"))?
        .trim()
        .to_string();
    if text.is_empty() {
        return Err(err("empty `text`"));
    }
    if start_s > end_s {
        return Err(err("`start` is after `end`"));
    }
    Ok(AsrSegment {
        start_s,
        end_s,
        text,
    })
}

/// Reads a WhisperX-style `{"segments": [{"start", "end", "text"}]}` document.
/// Segments are ordered by start time and numbered from 1; speakers are
/// left as `UNKNOWN` for later attribution.
pub fn ingest_asr_alignment(doc: &Value) -> Result<Vec<Utterance>, PreprocessError> {
    let segments = doc
        .get("segments")
        .and_then(Value::as_array)
        .ok_or_else(|| {
            PreprocessError::Input("alignment document has no `segments` array".into())
        })?;
    let mut parsed = segments
        .iter()
        .enumerate()
        .map(|(i, s)| segment(s, i))
        .collect::<Result<Vec<_>, _>>()?;
    parsed.sort_by(|a, b| a.start_s.seconds().total_cmp(&b.start_s.seconds()));
    Ok(parsed
        .into_iter()
        .zip(1u32..)
        .map(|(seg, ordinal)| Utterance {
            ordinal,
            transcript: seg.text,
            speaker: UNKNOWN_SPEAKER.to_string(),
            start_s: seg.start_s,
            end_s: seg.end_s,
            visual_description: None,
            frame_ref: None,
        })
        .collect())
}

/// Wraps utterances into a conversation whose duration is the last end time.
pub fn conversation_from_utterances(
    id: impl Into<String>,
    scene_tag: impl Into<String>,
    source: EpisodeRef,
    utterances: Vec<Utterance>,
) -> Conversation {
    let duration = utterances
        .iter()
        .map(|u| u.end_s.seconds())
        .fold(0.0, f64::max);
    Conversation {
        id: id.into(),
        scene_tag: scene_tag.into(),
        source,
        duration_s: Timestamp::from_secs(duration),
        utterances,
    }
}

#[cfg(test)]
mod tests {
    use serde_json::json;

    use super::*;
    use crate::mtp_data::validate_conversation;

    #[test]
    fn ordered_segments() {
        let doc = json!({"segments": [
            {"start": 0.0, "end": 1.5, "text": " Hi. "},
            {"start": 2.0, "end": 3.0, "text": "Hello."},
            {"start": 3.5, "end": 5.0, "text": "Bye."}
        ]});
        let utts = ingest_asr_alignment(&doc).unwrap();
        assert_eq!(
            utts.iter().map(|u| u.ordinal).collect::<Vec<_>>(),
            vec![1, 2, 3]
        );
        assert_eq!(utts[0].transcript, "Hi.");
        assert!(utts.iter().all(|u| u.speaker == UNKNOWN_SPEAKER));
        let conv = conversation_from_utterances(
            "c",
            "s",
            EpisodeRef {
                season: 1,
                episode: 2,
            },
            utts,
        );
        assert_eq!(conv.duration_s.seconds(), 5.0);
        assert!(validate_conversation(&conv).is_clean());
    }

    #[test]
    fn out_of_order_is_sorted() {
        let doc = json!({"segments": [
            {"start": 4.0, "end": 5.0, "text": "second"},
            {"start": 1.0, "end": 4.5, "text": "first"}
        ]});
        let utts = ingest_asr_alignment(&doc).unwrap();
        assert_eq!(utts[0].transcript, "first");
        assert_eq!(utts[0].ordinal, 1);
        assert_eq!(utts[1].transcript, "second");
    }

    #[test]
    fn empty_and_broken() {
        assert!(ingest_asr_alignment(&json!({"segments": []}))
            .unwrap()
            .is_empty());
        assert!(matches!(
            ingest_asr_alignment(&json!({})),
            Err(PreprocessError::Input(_))
        ));
        let doc =
            json!({"segments": [{"start": 0, "end": 1, "text": "a"}, {"start": 2, "text": "b"}]});
        match ingest_asr_alignment(&doc) {
            Err(PreprocessError::Ingest { index: 1, message }) => assert!(message.contains("end")),
            other => panic!("unexpected {other:?}"),
        }
        let doc = json!({"segments": [{"start": 3, "end": 1, "text": "a"}]});
        assert!(matches!(
            ingest_asr_alignment(&doc),
            Err(PreprocessError::Ingest { index: 0, .. })
        ));
    }
}
