use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Feeling classes drawn from the circumplex model of emotion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EmotionLabel {
    Happy,
    Excited,
    Calm,
    Relaxed,
    Alert,
    Anxious,
    Angry,
    Disgusted,
    Sad,
    Upset,
    Depressed,
    Frustrated,
    Confused,
    Surprised,
    Neutral,
    Serious,
    Nervous,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Polarity {
    Positive,
    Negative,
    NeutralTransitional,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown emotion label `{0}`")]
pub struct UnknownEmotion(pub String);

impl EmotionLabel {
    pub const ALL: [EmotionLabel; 17] = [
        EmotionLabel::Happy,
        EmotionLabel::Excited,
        EmotionLabel::Calm,
        EmotionLabel::Relaxed,
        EmotionLabel::Alert,
        EmotionLabel::Anxious,
        EmotionLabel::Angry,
        EmotionLabel::Disgusted,
        EmotionLabel::Sad,
        EmotionLabel::Upset,
        EmotionLabel::Depressed,
        EmotionLabel::Frustrated,
        EmotionLabel::Confused,
        EmotionLabel::Surprised,
        EmotionLabel::Neutral,
        EmotionLabel::Serious,
        EmotionLabel::Nervous,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EmotionLabel::Happy => "Happy",
            EmotionLabel::Excited => "Excited",
            EmotionLabel::Calm => "Calm",
            EmotionLabel::Relaxed => "Relaxed",
            EmotionLabel::Alert => "Alert",
            EmotionLabel::Anxious => "Anxious",
            EmotionLabel::Angry => "Angry",
            EmotionLabel::Disgusted => "Disgusted",
            EmotionLabel::Sad => "Sad",
            EmotionLabel::Upset => "Upset",
            EmotionLabel::Depressed => "Depressed",
            EmotionLabel::Frustrated => "Frustrated",
            EmotionLabel::Confused => "Confused",
            EmotionLabel::Surprised => "Surprised",
            EmotionLabel::Neutral => "Neutral",
            EmotionLabel::Serious => "Serious",
            EmotionLabel::Nervous => "Nervous",
        }
    }

    pub fn polarity(self) -> Polarity {
        use EmotionLabel::*;
        match self {
            Happy | Excited | Calm | Relaxed | Alert => Polarity::Positive,
            Anxious | Angry | Disgusted | Sad | Upset | Depressed | Frustrated | Confused => {
                Polarity::Negative
            }
            Surprised | Neutral | Serious | Nervous => Polarity::NeutralTransitional,
        }
    }
}

impl fmt::Display for EmotionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EmotionLabel {
    type Err = UnknownEmotion;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let needle = s.trim();
        EmotionLabel::ALL
            .into_iter()
            .find(|label| label.name().eq_ignore_ascii_case(needle))
            .ok_or_else(|| UnknownEmotion(s.to_string()))
    }
}

impl Serialize for EmotionLabel {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for EmotionLabel {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(deserializer)?;
        raw.parse().map_err(serde::de::Error::custom)
    }
}
