//! Prompt assembly, turning-point reasoning and conclusion parsing.

mod conclusion;
mod prompts;

use std::fmt::Write;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use conclusion::{extract_causes, parse_conclusion, ConclusionParseError, ParsedConclusion};
pub use prompts::{
    default_few_shot, FewShotExample, PromptBundle, CLASSIFICATION_INSTRUCTION,
    COMMANDING_INSTRUCTION, CONCLUSION_INSTRUCTION, DESCRIBING_INSTRUCTION, SYSTEM_CONTENT,
    TRACKING_INSTRUCTION,
};

use crate::evaluator::PredictionRecord;
use crate::gateway::{ChatMessage, Gateway, GatewayError};
use crate::mtp_data::{Conversation, Timestamp, TpType};

pub const DEFAULT_CONTEXT_TOKENS: usize = 120_000;

#[derive(Debug, Error)]
pub enum ReasonerError {
    #[error("prompt bundle: {0}")]
    Bundle(String),
    #[error("tracking requested but the prompt bundle has no tracking instruction")]
    MissingTracking,
    #[error("prompt needs ~{estimated} tokens, budget is {budget}")]
    ContextOverflow { estimated: usize, budget: usize },
    #[error("utterance_{ordinal} is outside 1..={m}")]
    OrdinalOutOfRange { ordinal: u32, m: usize },
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Conclusion(#[from] ConclusionParseError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptOptions {
    pub tracking: bool,
    pub few_shot: bool,
}

impl Default for PromptOptions {
    fn default() -> Self {
        Self {
            tracking: true,
            few_shot: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OverflowPolicy {
    Strict,
    #[default]
    TruncateVisuals,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReasonerOptions {
    pub tracking: bool,
    pub few_shot: bool,
    pub overflow: OverflowPolicy,
    pub context_tokens: usize,
    /// Fail on an unparseable conclusion instead of treating it as "no turning point".
    pub strict: bool,
    pub max_tps: Option<usize>,
    /// Ask a separate yes/no question for the classification label.
    pub classification_prompt: bool,
    pub categorize: bool,
    pub reproducible: bool,
}

impl Default for ReasonerOptions {
    fn default() -> Self {
        Self {
            tracking: true,
            few_shot: false,
            overflow: OverflowPolicy::default(),
            context_tokens: DEFAULT_CONTEXT_TOKENS,
            strict: false,
            max_tps: None,
            classification_prompt: false,
            categorize: false,
            reproducible: false,
        }
    }
}

impl ReasonerOptions {
    pub fn prompt(&self) -> PromptOptions {
        PromptOptions {
            tracking: self.tracking,
            few_shot: self.few_shot,
        }
    }
}

fn one_line(s: &str) -> String {
    s.split(['\n', '\r'])
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .collect::<Vec<_>>()
        .join(" ")
}

/// One block per utterance, blank-line separated:
///
/// ```text
/// utterance_1
/// speaker: Penny
/// transcript: Hi.
/// visual: She smiles
/// ```
pub fn render_conversation(conv: &Conversation) -> String {
    let mut out = String::new();
    for (i, u) in conv.utterances.iter().enumerate() {
        if i > 0 {
            out.push_str("\n\n");
        }
        let _ = write!(
            out,
            "utterance_{}\nspeaker: {}\ntranscript: {}",
            u.ordinal,
            one_line(&u.speaker),
            one_line(&u.transcript)
        );
        if let Some(visual) = u
            .visual_description
            .as_deref()
            .map(one_line)
            .filter(|v| !v.is_empty())
        {
            let _ = write!(out, "\nvisual: {visual}");
        }
    }
    out
}

fn user_turn(
    rendered: &str,
    options: PromptOptions,
    bundle: &PromptBundle,
) -> Result<String, ReasonerError> {
    let mut parts = vec![bundle.describing_instruction.as_str(), rendered];
    if options.tracking {
        parts.push(
            bundle
                .tracking_instruction
                .as_deref()
                .ok_or(ReasonerError::MissingTracking)?,
        );
    }
    parts.push(&bundle.commanding_instruction);
    Ok(parts.join("\n\n"))
}

/// System message, optional exemplar pairs, then the target conversation.
pub fn build_prompt(
    conv: &Conversation,
    options: PromptOptions,
    bundle: &PromptBundle,
) -> Result<Vec<ChatMessage>, ReasonerError> {
    let mut messages = vec![ChatMessage::system(&bundle.system_content)];
    if options.few_shot {
        for example in &bundle.few_shot {
            messages.push(ChatMessage::user(user_turn(
                &example.conversation,
                options,
                bundle,
            )?));
            messages.push(ChatMessage::assistant(&example.answer));
        }
    }
    messages.push(ChatMessage::user(user_turn(
        &render_conversation(conv),
        options,
        bundle,
    )?));
    Ok(messages)
}

/// Rough token count: four characters per token.
pub fn estimate_tokens(messages: &[ChatMessage]) -> usize {
    messages
        .iter()
        .map(|m| m.content.chars().count().div_ceil(4))
        .sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct FittedPrompt {
    pub messages: Vec<ChatMessage>,
    pub estimated_tokens: usize,
    /// Ordinals whose visual description was dropped to fit the budget.
    pub dropped_visuals: Vec<u32>,
}

/// Builds the prompt and applies the overflow policy. Visual descriptions are
/// dropped longest first (ties by ordinal) until the estimate fits.
pub fn fit_prompt(
    conv: &Conversation,
    options: &ReasonerOptions,
    bundle: &PromptBundle,
) -> Result<FittedPrompt, ReasonerError> {
    let budget = options.context_tokens;
    let mut messages = build_prompt(conv, options.prompt(), bundle)?;
    let mut estimated = estimate_tokens(&messages);
    if estimated <= budget {
        return Ok(FittedPrompt {
            messages,
            estimated_tokens: estimated,
            dropped_visuals: vec![],
        });
    }
    if options.overflow == OverflowPolicy::Strict {
        return Err(ReasonerError::ContextOverflow { estimated, budget });
    }

    let mut order: Vec<(usize, u32)> = conv
        .utterances
        .iter()
        .filter_map(|u| {
            let len = u
                .visual_description
                .as_deref()
                .map_or(0, |v| v.chars().count());
            (len > 0).then_some((len, u.ordinal))
        })
        .collect();
    order.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));

    let mut trimmed = conv.clone();
    let mut dropped = Vec::new();
    for (_, ordinal) in order {
        if let Some(u) = trimmed.utterances.iter_mut().find(|u| u.ordinal == ordinal) {
            u.visual_description = None;
        }
        dropped.push(ordinal);
        messages = build_prompt(&trimmed, options.prompt(), bundle)?;
        estimated = estimate_tokens(&messages);
        if estimated <= budget {
            return Ok(FittedPrompt {
                messages,
                estimated_tokens: estimated,
                dropped_visuals: dropped,
            });
        }
    }
    Err(ReasonerError::ContextOverflow { estimated, budget })
}

pub fn prompt_hash(messages: &[ChatMessage]) -> String {
    let bytes = serde_json::to_vec(messages).expect("messages serialize");
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub raw_reasoning: String,
    pub prompt_hash: String,
    pub warnings: Vec<String>,
}

/// Runs the reasoning prompt and returns the model's analysis verbatim.
pub fn detect(
    conv: &Conversation,
    llm: &Gateway,
    options: &ReasonerOptions,
    bundle: &PromptBundle,
) -> Result<Detection, ReasonerError> {
    let fitted = fit_prompt(conv, options, bundle)?;
    let mut warnings = Vec::new();
    if !fitted.dropped_visuals.is_empty() {
        warnings.push(format!(
            "context budget {}: dropped visual descriptions of utterances {:?}",
            options.context_tokens, fitted.dropped_visuals
        ));
    }
    let raw_reasoning = llm.chat(fitted.messages.clone())?;
    Ok(Detection {
        raw_reasoning,
        prompt_hash: prompt_hash(&fitted.messages),
        warnings,
    })
}

pub fn conclusion_messages(
    conv: &Conversation,
    raw_reasoning: &str,
    bundle: &PromptBundle,
) -> Vec<ChatMessage> {
    let user = format!(
        "{}\n\nPrediction:\n{}\n\n{}",
        render_conversation(conv),
        raw_reasoning.trim(),
        bundle.conclusion_instruction
    );
    vec![
        ChatMessage::system(&bundle.system_content),
        ChatMessage::user(user),
    ]
}

/// Asks for the starting utterance indices of the predicted turning points.
pub fn conclude(
    conv: &Conversation,
    raw_reasoning: &str,
    llm: &Gateway,
    bundle: &PromptBundle,
) -> Result<String, ReasonerError> {
    Ok(llm.chat(conclusion_messages(conv, raw_reasoning, bundle))?)
}

pub fn ordinals_to_timestamps(
    conv: &Conversation,
    ordinals: &[u32],
) -> Result<Vec<Timestamp>, ReasonerError> {
    ordinals
        .iter()
        .map(|&ordinal| {
            conv.utterance(ordinal)
                .map(|u| u.start_s)
                .ok_or(ReasonerError::OrdinalOutOfRange {
                    ordinal,
                    m: conv.utterances.len(),
                })
        })
        .collect()
}

/// `Some(true)` for an answer starting with "yes", `Some(false)` for "no".
pub fn parse_yes_no(answer: &str) -> Option<bool> {
    let word: String = answer
        .trim_start()
        .chars()
        .take_while(|c| c.is_alphabetic())
        .collect::<String>()
        .to_lowercase();
    match word.as_str() {
        "yes" => Some(true),
        "no" => Some(false),
        _ => None,
    }
}

pub fn classify(
    conv: &Conversation,
    llm: &Gateway,
    bundle: &PromptBundle,
) -> Result<String, ReasonerError> {
    let user = format!(
        "{}\n\n{}\n\n{}",
        bundle.describing_instruction,
        render_conversation(conv),
        bundle.classification_instruction
    );
    Ok(llm.chat(vec![
        ChatMessage::system(&bundle.system_content),
        ChatMessage::user(user),
    ])?)
}

fn type_key(s: &str) -> String {
    s.chars()
        .filter(|c| c.is_alphanumeric())
        .flat_map(char::to_lowercase)
        .collect()
}

fn type_name(t: TpType) -> String {
    serde_json::to_value(t)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_default()
}

/// Matches a model answer such as "Decision change" to a taxonomy entry.
pub fn parse_tp_type(answer: &str) -> Option<TpType> {
    let key = type_key(answer);
    TpType::ALL
        .into_iter()
        .filter(|t| key.contains(&type_key(&type_name(*t))))
        .min_by_key(|t| key.find(&type_key(&type_name(*t))))
}

pub fn categorize_cause(cause: &str, llm: &Gateway) -> Result<Option<TpType>, ReasonerError> {
    let mut prompt = String::from(
        "Classify the cause of this conversational turning point into exactly one category.\n",
    );
    for t in TpType::ALL {
        let _ = writeln!(prompt, "- {}: {}", type_name(t), t.gloss());
    }
    let _ = write!(
        prompt,
        "Cause: {}\nAnswer with the category name only.",
        one_line(cause)
    );
    Ok(parse_tp_type(&llm.chat(vec![ChatMessage::user(prompt)])?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionOutput {
    pub raw_reasoning: String,
    pub conclusion_raw: String,
    pub ordinals: Vec<u32>,
    pub timestamps: Vec<Timestamp>,
    pub has_tp: bool,
    pub causes: Vec<String>,
}

/// Everything needed to audit or replay one conversation's run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunArtifact {
    pub conversation_id: String,
    pub model_id: String,
    pub options: ReasonerOptions,
    pub prompt_hash: String,
    pub raw_reasoning: String,
    pub conclusion_raw: String,
    pub ordinals: Vec<u32>,
    pub timestamps: Vec<Timestamp>,
    pub has_tp: bool,
    pub causes: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub cause_types: Vec<Option<TpType>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classification_answer: Option<String>,
    pub warnings: Vec<String>,
    /// Unix seconds; absent in reproducible runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub created_at: Option<u64>,
}

impl RunArtifact {
    pub fn output(&self) -> DetectionOutput {
        DetectionOutput {
            raw_reasoning: self.raw_reasoning.clone(),
            conclusion_raw: self.conclusion_raw.clone(),
            ordinals: self.ordinals.clone(),
            timestamps: self.timestamps.clone(),
            has_tp: self.has_tp,
            causes: self.causes.clone(),
        }
    }

    /// The classification label follows the yes/no answer when one was
    /// asked and understood, otherwise the detection result.
    pub fn to_prediction(&self) -> PredictionRecord {
        let has_tp = self
            .classification_answer
            .as_deref()
            .and_then(parse_yes_no)
            .unwrap_or(self.has_tp);
        PredictionRecord {
            conversation_id: self.conversation_id.clone(),
            has_tp,
            timestamps: self.timestamps.clone(),
            score: None,
        }
    }
}

/// detect, conclude, parse, map to timestamps.
pub fn run_pipeline(
    conv: &Conversation,
    reasoner: &Gateway,
    concluder: &Gateway,
    options: &ReasonerOptions,
    bundle: &PromptBundle,
) -> Result<RunArtifact, ReasonerError> {
    let detection = detect(conv, reasoner, options, bundle)?;
    let mut warnings = detection.warnings;
    let conclusion_raw = conclude(conv, &detection.raw_reasoning, concluder, bundle)?;

    let mut ordinals = match parse_conclusion(&conclusion_raw, conv.utterances.len()) {
        Ok(parsed) => {
            warnings.extend(parsed.warnings);
            parsed.ordinals
        }
        Err(e) if !options.strict => {
            warnings.push(format!("{e}; treating as no turning point"));
            vec![]
        }
        Err(e) => return Err(e.into()),
    };
    if let Some(cap) = options.max_tps {
        if ordinals.len() > cap {
            warnings.push(format!(
                "keeping the first {cap} of {} predicted turning points",
                ordinals.len()
            ));
            ordinals.truncate(cap);
        }
    }
    let timestamps = ordinals_to_timestamps(conv, &ordinals)?;
    let causes = extract_causes(&detection.raw_reasoning, &ordinals);

    let cause_types = if options.categorize {
        causes
            .iter()
            .map(|c| {
                if c.is_empty() {
                    Ok(None)
                } else {
                    categorize_cause(c, reasoner)
                }
            })
            .collect::<Result<Vec<_>, _>>()?
    } else {
        vec![]
    };

    let classification_answer = if options.classification_prompt {
        let answer = classify(conv, reasoner, bundle)?;
        if parse_yes_no(&answer).is_none() {
            warnings.push(format!(
                "classification answer {:?} is neither yes nor no",
                one_line(&answer)
            ));
        }
        Some(answer)
    } else {
        None
    };

    let created_at = (!options.reproducible).then(|| {
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0)
    });

    Ok(RunArtifact {
        conversation_id: conv.id.clone(),
        model_id: reasoner.model_id().to_string(),
        options: options.clone(),
        prompt_hash: detection.prompt_hash,
        raw_reasoning: detection.raw_reasoning,
        conclusion_raw,
        has_tp: !ordinals.is_empty(),
        ordinals,
        timestamps,
        causes,
        cause_types,
        classification_answer,
        warnings,
        created_at,
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::gateway::{MockBackend, MockFixture, MockRule};
    use crate::mtp_data::{EpisodeRef, Utterance};

    fn utt(ordinal: u32, speaker: &str, text: &str, start: f64, visual: Option<&str>) -> Utterance {
        Utterance {
            ordinal,
            transcript: text.into(),
            speaker: speaker.into(),
            start_s: Timestamp::from_secs(start),
            end_s: Timestamp::from_secs(start + 4.0),
            visual_description: visual.map(str::to_string),
            frame_ref: None,
        }
    }

    fn conv() -> Conversation {
        Conversation {
            id: "c1".into(),
            scene_tag: "apartment".into(),
            source: EpisodeRef {
                season: 1,
                episode: 1,
            },
            duration_s: Timestamp::from_secs(60.0),
            utterances: vec![
                utt(1, "Penny", "Hi.", 0.0, Some("She smiles")),
                utt(2, "Sheldon", "You're in my spot.", 17.0, None),
                utt(3, "Penny", "Oh,\nsorry.", 30.0, Some("")),
            ],
        }
    }

    fn gateway(rules: Vec<MockRule>) -> (Gateway, Arc<MockBackend>) {
        let backend = Arc::new(
            MockBackend::new(MockFixture {
                rules,
                ..MockFixture::default()
            })
            .unwrap(),
        );
        (Gateway::new(backend.clone(), "mock-llm"), backend)
    }

    fn rule(contains: &[&str], response: &str) -> MockRule {
        MockRule {
            kind: None,
            contains: contains.iter().map(|s| s.to_string()).collect(),
            regex: None,
            response: Some(response.into()),
            fail: None,
        }
    }

    #[test]
    fn render_blocks() {
        let text = render_conversation(&conv());
        assert!(text.starts_with(
            "utterance_1\nspeaker: Penny\ntranscript: Hi.\nvisual: She smiles\n\nutterance_2"
        ));
        assert!(text.contains(
            "utterance_2\nspeaker: Sheldon\ntranscript: You're in my spot.\n\nutterance_3"
        ));
        assert!(text.ends_with("transcript: Oh, sorry."));
        assert_eq!(text, render_conversation(&conv()));
    }

    #[test]
    fn prompt_structure() {
        let bundle = PromptBundle::default();
        let plain = build_prompt(
            &conv(),
            PromptOptions {
                tracking: false,
                few_shot: false,
            },
            &bundle,
        )
        .unwrap();
        assert_eq!(plain.len(), 2);
        assert_eq!(plain[0].content, SYSTEM_CONTENT);
        assert!(plain[1].content.starts_with(DESCRIBING_INSTRUCTION));
        assert!(plain[1].content.ends_with(COMMANDING_INSTRUCTION));
        assert!(!plain[1].content.contains(TRACKING_INSTRUCTION));

        let tracked = build_prompt(
            &conv(),
            PromptOptions {
                tracking: true,
                few_shot: false,
            },
            &bundle,
        )
        .unwrap();
        let body = &tracked[1].content;
        let (conv_at, track_at, cmd_at) = (
            body.find("utterance_3").unwrap(),
            body.find(TRACKING_INSTRUCTION).unwrap(),
            body.find(COMMANDING_INSTRUCTION).unwrap(),
        );
        assert!(conv_at < track_at && track_at < cmd_at);

        let shots = build_prompt(
            &conv(),
            PromptOptions {
                tracking: false,
                few_shot: true,
            },
            &bundle,
        )
        .unwrap();
        assert_eq!(shots.len(), 6);
        assert!(shots[1].content.contains("Maya"));
        assert!(shots[4].content.contains("Raj"));
        assert!(shots[5].content.contains("Penny"));
    }

    #[test]
    fn tracking_without_text_is_an_error() {
        let bundle = PromptBundle {
            tracking_instruction: None,
            ..PromptBundle::default()
        };
        assert!(matches!(
            build_prompt(&conv(), PromptOptions::default(), &bundle),
            Err(ReasonerError::MissingTracking)
        ));
    }

    #[test]
    fn overflow_policies() {
        let mut big = conv();
        big.utterances[0].visual_description = Some("x".repeat(4000));
        big.utterances[1].visual_description = Some("y".repeat(2000));
        let bundle = PromptBundle::default();
        let base =
            estimate_tokens(&build_prompt(&conv(), PromptOptions::default(), &bundle).unwrap());
        let strict = ReasonerOptions {
            overflow: OverflowPolicy::Strict,
            context_tokens: base + 600,
            ..ReasonerOptions::default()
        };
        assert!(matches!(
            fit_prompt(&big, &strict, &bundle),
            Err(ReasonerError::ContextOverflow { .. })
        ));

        let truncate = ReasonerOptions {
            overflow: OverflowPolicy::TruncateVisuals,
            ..strict.clone()
        };
        let fitted = fit_prompt(&big, &truncate, &bundle).unwrap();
        assert_eq!(fitted.dropped_visuals, vec![1]);
        assert!(fitted.estimated_tokens <= base + 600);
        assert!(!fitted.messages[1].content.contains("xxxx"));
        assert!(fitted.messages[1].content.contains("yyyy"));

        let hopeless = ReasonerOptions {
            context_tokens: 10,
            ..truncate
        };
        assert!(matches!(
            fit_prompt(&big, &hopeless, &bundle),
            Err(ReasonerError::ContextOverflow { .. })
        ));
    }

    #[test]
    fn timestamps_lookup() {
        let c = conv();
        assert_eq!(
            ordinals_to_timestamps(&c, &[1]).unwrap(),
            vec![Timestamp::ZERO]
        );
        assert_eq!(
            ordinals_to_timestamps(&c, &[2]).unwrap(),
            vec![Timestamp::from_secs(17.0)]
        );
        assert!(ordinals_to_timestamps(&c, &[]).unwrap().is_empty());
        assert!(matches!(
            ordinals_to_timestamps(&c, &[4]),
            Err(ReasonerError::OrdinalOutOfRange { ordinal: 4, m: 3 })
        ));
    }

    #[test]
    fn pipeline_composition() {
        let (gw, backend) = gateway(vec![
            rule(&[CONCLUSION_INSTRUCTION], "utterances = [utterance_2]"),
            rule(
                &[COMMANDING_INSTRUCTION],
                "Tracker...\n- utterance_2: Sheldon claims the seat.",
            ),
        ]);
        let art = run_pipeline(
            &conv(),
            &gw,
            &gw,
            &ReasonerOptions::default(),
            &PromptBundle::default(),
        )
        .unwrap();
        assert!(art.has_tp);
        assert_eq!(art.ordinals, vec![2]);
        assert_eq!(art.timestamps, vec![Timestamp::from_secs(17.0)]);
        assert_eq!(
            art.causes,
            vec!["- utterance_2: Sheldon claims the seat.".to_string()]
        );
        assert_eq!(
            art.raw_reasoning,
            "Tracker...\n- utterance_2: Sheldon claims the seat."
        );
        assert_eq!(art.prompt_hash.len(), 64);
        assert_eq!(backend.calls(), 2);
        let pred = art.to_prediction();
        assert!(pred.has_tp);
    }

    #[test]
    fn pipeline_none_and_prose() {
        let bundle = PromptBundle::default();
        let (gw, _) = gateway(vec![
            rule(&[CONCLUSION_INSTRUCTION], "None"),
            rule(&[COMMANDING_INSTRUCTION], "Nothing happens."),
        ]);
        let art = run_pipeline(&conv(), &gw, &gw, &ReasonerOptions::default(), &bundle).unwrap();
        assert!(!art.has_tp && art.timestamps.is_empty() && art.warnings.is_empty());

        let (gw, _) = gateway(vec![
            rule(&[CONCLUSION_INSTRUCTION], "I am not sure what you mean."),
            rule(&[COMMANDING_INSTRUCTION], "Hmm."),
        ]);
        let art = run_pipeline(&conv(), &gw, &gw, &ReasonerOptions::default(), &bundle).unwrap();
        assert!(!art.has_tp);
        assert_eq!(art.warnings.len(), 1);
        let strict = ReasonerOptions {
            strict: true,
            ..ReasonerOptions::default()
        };
        assert!(matches!(
            run_pipeline(&conv(), &gw, &gw, &strict, &bundle),
            Err(ReasonerError::Conclusion(_))
        ));
    }

    #[test]
    fn cap_classification_and_categories() {
        let (gw, _) = gateway(vec![
            rule(
                &[CONCLUSION_INSTRUCTION],
                "utterances = [utterance_3, utterance_1, utterance_2]",
            ),
            rule(&["Classify the cause"], "Decision change."),
            rule(&[CLASSIFICATION_INSTRUCTION], "No."),
            rule(&[COMMANDING_INSTRUCTION], "utterance_3 Penny apologises"),
        ]);
        let options = ReasonerOptions {
            max_tps: Some(2),
            classification_prompt: true,
            categorize: true,
            reproducible: true,
            ..ReasonerOptions::default()
        };
        let art = run_pipeline(&conv(), &gw, &gw, &options, &PromptBundle::default()).unwrap();
        assert_eq!(art.ordinals, vec![3, 1]);
        assert_eq!(art.cause_types, vec![Some(TpType::DecisionChange), None]);
        assert_eq!(art.classification_answer.as_deref(), Some("No."));
        assert!(art.created_at.is_none());
        assert!(art.has_tp);
        assert!(!art.to_prediction().has_tp);
        let json = serde_json::to_string(&art).unwrap();
        assert_eq!(serde_json::from_str::<RunArtifact>(&json).unwrap(), art);
    }

    #[test]
    fn yes_no_and_types() {
        assert_eq!(parse_yes_no(" Yes, there is."), Some(true));
        assert_eq!(parse_yes_no("no"), Some(false));
        assert_eq!(parse_yes_no("Nope"), None);
        assert_eq!(
            parse_tp_type("emotional_outburst"),
            Some(TpType::EmotionalOutburst)
        );
        assert_eq!(
            parse_tp_type("It is a Perspective Shift"),
            Some(TpType::PerspectiveShift)
        );
        assert_eq!(parse_tp_type("unclear"), None);
    }
}
