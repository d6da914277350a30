use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ReasonerError;

pub const SYSTEM_CONTENT: &str = "You are a trained chatbot that can find turning points in conversations. A turning point in a conversation is an identifiable event that leads to an unexpected and significant transformation in the subjective personal states (including decisions, behaviors, perspectives, and feelings) of at least one speaker during the given conversation.";

pub const DESCRIBING_INSTRUCTION: &str =
    "Read this conversation. Each utterance includes the transcripts and visual descriptions.";

pub const TRACKING_INSTRUCTION: &str = "Utilize a tracker for each person in the conversation. For each speaker, provide a concise list of their feelings, behaviors (based on the context and actions), decisions, and any perspective changes (include those with clear evidence from the conversation). Limit the list to a maximum of 256 words.";

pub const COMMANDING_INSTRUCTION: &str = "Identify the turning point events based on the initial conversation and track results if there are any. Begin by finding the turning point for each person.";

pub const CONCLUSION_INSTRUCTION: &str = "For each found turning point in the prediction, find the starting utterance index only. Return a list of n utterance start indices corresponding to a turning point in the prediction. Follow strictly this format in your response: e.g. utterances = [utterance_5, utterance_25]. Return None if there is no turning point found. Limit the response to 50 words.";

pub const CLASSIFICATION_INSTRUCTION: &str =
    "Does this conversation contain at least one turning point? Answer with Yes or No only.";

const FEW_SHOT_ASSET: &str = include_str!("../../assets/few_shot.toml");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FewShotExample {
    /// Conversation rendered in the same block layout as the target.
    pub conversation: String,
    pub answer: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PromptBundle {
    pub system_content: String,
    pub describing_instruction: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tracking_instruction: Option<String>,
    pub commanding_instruction: String,
    pub conclusion_instruction: String,
    #[serde(default = "default_classification")]
    pub classification_instruction: String,
    #[serde(default)]
    pub few_shot: Vec<FewShotExample>,
}

fn default_classification() -> String {
    CLASSIFICATION_INSTRUCTION.to_string()
}

#[derive(Deserialize)]
struct FewShotFile {
    few_shot: Vec<FewShotExample>,
}

/// The two shipped worked examples: one with a turning point, one without.
pub fn default_few_shot() -> Vec<FewShotExample> {
    let file: FewShotFile = toml::from_str(FEW_SHOT_ASSET).expect("bundled few-shot asset parses");
    file.few_shot
        .into_iter()
        .map(|e| FewShotExample {
            conversation: e.conversation.trim().to_string(),
            answer: e.answer.trim().to_string(),
        })
        .collect()
}

impl Default for PromptBundle {
    fn default() -> Self {
        Self {
            system_content: SYSTEM_CONTENT.to_string(),
            describing_instruction: DESCRIBING_INSTRUCTION.to_string(),
            tracking_instruction: Some(TRACKING_INSTRUCTION.to_string()),
            commanding_instruction: COMMANDING_INSTRUCTION.to_string(),
            conclusion_instruction: CONCLUSION_INSTRUCTION.to_string(),
            classification_instruction: CLASSIFICATION_INSTRUCTION.to_string(),
            few_shot: default_few_shot(),
        }
    }
}

impl PromptBundle {
    pub fn from_toml(text: &str) -> Result<Self, ReasonerError> {
        toml::from_str(text).map_err(|e| ReasonerError::Bundle(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ReasonerError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ReasonerError::Bundle(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("bundle serializes")
    }
}
