use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::PreprocessError;
use crate::gateway::{cosine_similarity, ChatMessage, Gateway};
use crate::mtp_data::{Utterance, UNKNOWN_SPEAKER};

pub const DEFAULT_SIM_THRESHOLD: f64 = 0.75;

/// A reference transcript line with its known speaker.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptLine {
    pub speaker: String,
    pub line: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttributionDecision {
    /// The model agreed with the retrieved speaker.
    Confirmed,
    /// The model named a different script speaker.
    Reassigned,
    /// The model's answer named no script speaker.
    Unrecognized,
    BelowThreshold,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionEntry {
    pub ordinal: u32,
    pub candidate_speaker: String,
    pub candidate_line: String,
    pub similarity: f64,
    pub decision: AttributionDecision,
    pub assigned: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_answer: Option<String>,
}

/// One entry per utterance; `UNKNOWN` assignments are left for manual refinement.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AttributionReport {
    pub threshold: f64,
    pub entries: Vec<AttributionEntry>,
}

impl AttributionReport {
    pub fn unresolved(&self) -> impl Iterator<Item = &AttributionEntry> {
        self.entries
            .iter()
            .filter(|e| e.assigned == UNKNOWN_SPEAKER)
    }
}

pub fn confirmation_prompt(
    transcript: &str,
    candidate_line: &str,
    candidate_speaker: &str,
) -> String {
    format!(
        "Transcript: {transcript}\nMost similar script line: {candidate_line}\nCandidate speaker: {candidate_speaker}\n\
         Who says the transcript? Answer with the speaker's name only."
    )
}

/// The script speaker named by `answer`: an exact (case-insensitive) match,
/// else the single speaker whose name appears as a word in the answer.
fn match_speaker<'a>(answer: &str, speakers: &BTreeSet<&'a str>) -> Option<&'a str> {
    let cleaned = answer
        .trim()
        .trim_matches(|c: char| c.is_ascii_punctuation() || c.is_whitespace());
    if let Some(s) = speakers.iter().find(|s| s.eq_ignore_ascii_case(cleaned)) {
        return Some(s);
    }
    let words: Vec<String> = answer
        .split(|c: char| !c.is_alphanumeric() && c != '\'' && c != '-')
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect();
    let mentioned: Vec<&str> = speakers
        .iter()
        .copied()
        .filter(|s| {
            let name: Vec<String> = s.split_whitespace().map(str::to_lowercase).collect();
            !name.is_empty() && words.windows(name.len()).any(|w| w == name.as_slice())
        })
        .collect();
    match mentioned.as_slice() {
        [only] => Some(only),
        _ => None,
    }
}

/// Top-1 cosine retrieval over the script followed by a model confirmation.
/// Speakers are only ever taken verbatim from the script.
pub fn attribute_speakers(
    utterances: &[Utterance],
    script: &[ScriptLine],
    embed: &Gateway,
    llm: &Gateway,
    sim_threshold: f64,
) -> Result<(Vec<Utterance>, AttributionReport), PreprocessError> {
    if script.is_empty() {
        return Err(PreprocessError::Input("script has no lines".into()));
    }
    if !(sim_threshold > 0.0 && sim_threshold <= 1.0) {
        return Err(PreprocessError::Input(format!(
            "similarity threshold must be in (0, 1], got {sim_threshold}"
        )));
    }
    if let Some(bad) = script
        .iter()
        .position(|l| l.speaker.trim().is_empty() || l.line.trim().is_empty())
    {
        return Err(PreprocessError::Input(format!(
            "script line {bad} has an empty field"
        )));
    }
    let mut report = AttributionReport {
        threshold: sim_threshold,
        entries: vec![],
    };
    if utterances.is_empty() {
        return Ok((vec![], report));
    }

    let speakers: BTreeSet<&str> = script.iter().map(|l| l.speaker.as_str()).collect();
    let line_vecs = embed.embed(&script.iter().map(|l| l.line.clone()).collect::<Vec<_>>())?;
    let utt_vecs = embed.embed(
        &utterances
            .iter()
            .map(|u| u.transcript.clone())
            .collect::<Vec<_>>(),
    )?;

    let mut best = Vec::with_capacity(utterances.len());
    for v in &utt_vecs {
        let mut top = (0usize, f64::NEG_INFINITY);
        for (i, lv) in line_vecs.iter().enumerate() {
            let sim =
                cosine_similarity(v, lv).map_err(|e| PreprocessError::Input(e.to_string()))?;
            if sim > top.1 {
                top = (i, sim);
            }
        }
        best.push(top);
    }

    let work: Vec<(&Utterance, (usize, f64))> = utterances.iter().zip(best).collect();
    let results = crate::par_map(
        &work,
        |(u, (idx, sim))| -> Result<AttributionEntry, PreprocessError> {
            let candidate = &script[*idx];
            let mut entry = AttributionEntry {
                ordinal: u.ordinal,
                candidate_speaker: candidate.speaker.clone(),
                candidate_line: candidate.line.clone(),
                similarity: *sim,
                decision: AttributionDecision::BelowThreshold,
                assigned: UNKNOWN_SPEAKER.to_string(),
                model_answer: None,
            };
            if *sim < sim_threshold {
                return Ok(entry);
            }
            let prompt = confirmation_prompt(&u.transcript, &candidate.line, &candidate.speaker);
            let answer = llm.chat(vec![ChatMessage::user(prompt)])?;
            match match_speaker(&answer, &speakers) {
                Some(s) => {
                    entry.decision = if s == candidate.speaker {
                        AttributionDecision::Confirmed
                    } else {
                        AttributionDecision::Reassigned
                    };
                    entry.assigned = s.to_string();
                }
                None => entry.decision = AttributionDecision::Unrecognized,
            }
            entry.model_answer = Some(answer);
            Ok(entry)
        },
    );

    let mut out = utterances.to_vec();
    for (u, entry) in out.iter_mut().zip(results) {
        let entry = entry?;
        u.speaker = entry.assigned.clone();
        report.entries.push(entry);
    }
    Ok((out, report))
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;
    use std::sync::Arc;

    use super::*;
    use crate::gateway::{MockBackend, MockFixture, MockRule};
    use crate::mtp_data::Timestamp;

    fn utt(ordinal: u32, text: &str) -> Utterance {
        Utterance {
            ordinal,
            transcript: text.into(),
            speaker: UNKNOWN_SPEAKER.into(),
            start_s: Timestamp::from_secs(ordinal as f64),
            end_s: Timestamp::from_secs(ordinal as f64 + 0.5),
            visual_description: None,
            frame_ref: None,
        }
    }

    fn line(speaker: &str, line: &str) -> ScriptLine {
        ScriptLine {
            speaker: speaker.into(),
            line: line.into(),
        }
    }

    fn gateway(embeddings: &[(&str, Vec<f64>)], rules: Vec<MockRule>) -> Gateway {
        let fixture = MockFixture {
            rules,
            embeddings: embeddings
                .iter()
                .map(|(k, v)| (k.to_string(), v.clone()))
                .collect::<BTreeMap<_, _>>(),
            ..MockFixture::default()
        };
        Gateway::new(Arc::new(MockBackend::new(fixture).unwrap()), "mock")
    }

    fn rule(contains: &str, response: &str) -> MockRule {
        MockRule {
            kind: None,
            contains: vec![contains.into()],
            regex: None,
            response: Some(response.into()),
            fail: None,
        }
    }

    #[test]
    fn exact_line_is_confirmed() {
        let script = vec![
            line("Penny", "Hi, I'm Penny."),
            line("Leonard", "I'm Leonard."),
        ];
        let gw = gateway(
            &[],
            vec![
                rule("Candidate speaker: Penny", "Penny"),
                rule("Candidate speaker: Leonard", "leonard."),
            ],
        );
        let (utts, report) = attribute_speakers(
            &[utt(1, "Hi, I'm Penny."), utt(2, "I'm Leonard.")],
            &script,
            &gw,
            &gw,
            0.75,
        )
        .unwrap();
        assert_eq!(utts[0].speaker, "Penny");
        assert_eq!(utts[1].speaker, "Leonard");
        assert!((report.entries[0].similarity - 1.0).abs() < 1e-12);
        assert_eq!(report.entries[1].decision, AttributionDecision::Confirmed);
    }

    #[test]
    fn hand_built_vectors_pick_the_aligned_line() {
        let script = vec![line("A", "first line"), line("B", "second line")];
        let gw = gateway(
            &[
                ("query", vec![1.0, 0.0, 0.0]),
                ("first line", vec![1.0, 0.0, 0.0]),
                ("second line", vec![0.0, 1.0, 0.0]),
                ("orthogonal", vec![0.0, 0.0, 1.0]),
            ],
            vec![rule("Candidate speaker: A", "It is A who says it")],
        );
        let (utts, report) = attribute_speakers(
            &[utt(1, "query"), utt(2, "orthogonal")],
            &script,
            &gw,
            &gw,
            0.75,
        )
        .unwrap();
        assert_eq!(report.entries[0].candidate_speaker, "A");
        assert_eq!(report.entries[0].similarity, 1.0);
        assert_eq!(utts[0].speaker, "A");
        assert_eq!(
            report.entries[1].decision,
            AttributionDecision::BelowThreshold
        );
        assert_eq!(utts[1].speaker, UNKNOWN_SPEAKER);
        assert_eq!(report.unresolved().count(), 1);
    }

    #[test]
    fn answers_outside_the_script_are_unknown() {
        let script = vec![line("Penny", "Hello there."), line("Sheldon", "Bazinga.")];
        let gw = gateway(
            &[],
            vec![
                rule("Candidate speaker: Penny", "Howard"),
                rule("Bazinga", "Penny"),
            ],
        );
        let (utts, report) = attribute_speakers(
            &[utt(1, "Hello there."), utt(2, "Bazinga.")],
            &script,
            &gw,
            &gw,
            0.5,
        )
        .unwrap();
        assert_eq!(utts[0].speaker, UNKNOWN_SPEAKER);
        assert_eq!(
            report.entries[0].decision,
            AttributionDecision::Unrecognized
        );
        assert_eq!(utts[1].speaker, "Penny");
        assert_eq!(report.entries[1].decision, AttributionDecision::Reassigned);
    }

    #[test]
    fn preconditions() {
        let gw = gateway(&[], vec![]);
        assert!(attribute_speakers(&[utt(1, "x")], &[], &gw, &gw, 0.5).is_err());
        assert!(attribute_speakers(&[utt(1, "x")], &[line("A", "x")], &gw, &gw, 0.0).is_err());
        assert!(attribute_speakers(&[utt(1, "x")], &[line("A", "x")], &gw, &gw, 1.5).is_err());
        assert!(attribute_speakers(&[utt(1, "x")], &[line("", "x")], &gw, &gw, 0.5).is_err());
    }

    #[test]
    fn speaker_matching() {
        let speakers: BTreeSet<&str> = ["Penny", "Mary Cooper", "Leonard"].into_iter().collect();
        assert_eq!(match_speaker(" penny! ", &speakers), Some("Penny"));
        assert_eq!(
            match_speaker("I think mary cooper says it", &speakers),
            Some("Mary Cooper")
        );
        assert_eq!(match_speaker("Penny or Leonard", &speakers), None);
        assert_eq!(match_speaker("Pennyworth", &speakers), None);
    }
}
