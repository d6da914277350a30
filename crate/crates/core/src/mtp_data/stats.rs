use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::emotion::EmotionLabel;
use super::types::DatasetRecord;

/// Corpus-level counts. Transcript lengths are in words per conversation,
/// conversation lengths in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DatasetStats {
    pub n_conversations: usize,
    pub n_tp_conversations: usize,
    pub n_utterances: usize,
    pub n_words: usize,
    pub total_duration_h: f64,
    pub avg_transcript_words: f64,
    pub max_transcript_words: usize,
    pub avg_conversation_s: f64,
    pub max_conversation_s: f64,
}

impl DatasetStats {
    /// Combine stats of two disjoint datasets. Averages are recomputed from
    /// the pooled totals.
    pub fn combine(&self, other: &DatasetStats) -> DatasetStats {
        let n = self.n_conversations + other.n_conversations;
        let total_s = (self.total_duration_h + other.total_duration_h) * 3600.0;
        let n_words = self.n_words + other.n_words;
        DatasetStats {
            n_conversations: n,
            n_tp_conversations: self.n_tp_conversations + other.n_tp_conversations,
            n_utterances: self.n_utterances + other.n_utterances,
            n_words,
            total_duration_h: self.total_duration_h + other.total_duration_h,
            avg_transcript_words: ratio(n_words as f64, n),
            max_transcript_words: self.max_transcript_words.max(other.max_transcript_words),
            avg_conversation_s: ratio(total_s, n),
            max_conversation_s: self.max_conversation_s.max(other.max_conversation_s),
        }
    }
}

fn ratio(total: f64, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        total / n as f64
    }
}

pub fn dataset_stats(dataset: &[DatasetRecord]) -> DatasetStats {
    let mut stats = DatasetStats::default();
    let mut total_s = 0.0;
    for record in dataset {
        let conv = &record.conversation;
        let words = conv.word_count();
        let duration = conv.duration_s.seconds();
        stats.n_conversations += 1;
        if record.has_turning_point() {
            stats.n_tp_conversations += 1;
        }
        stats.n_utterances += conv.utterances.len();
        stats.n_words += words;
        stats.max_transcript_words = stats.max_transcript_words.max(words);
        stats.max_conversation_s = stats.max_conversation_s.max(duration);
        total_s += duration;
    }
    stats.total_duration_h = total_s / 3600.0;
    stats.avg_transcript_words = ratio(stats.n_words as f64, stats.n_conversations);
    stats.avg_conversation_s = ratio(total_s, stats.n_conversations);
    stats
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EmotionHistogram {
    pub pre: BTreeMap<EmotionLabel, usize>,
    pub post: BTreeMap<EmotionLabel, usize>,
}

impl EmotionHistogram {
    pub fn total(&self) -> usize {
        self.pre.values().sum::<usize>() + self.post.values().sum::<usize>()
    }

    /// Labels sorted by descending count, ties broken by label order.
    pub fn top(map: &BTreeMap<EmotionLabel, usize>, n: usize) -> Vec<(EmotionLabel, usize)> {
        let mut entries: Vec<_> = map.iter().map(|(l, c)| (*l, *c)).collect();
        entries.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        entries.truncate(n);
        entries
    }
}

/// Tally of feeling labels before and after every consensus turning point.
pub fn emotion_histogram(dataset: &[DatasetRecord]) -> EmotionHistogram {
    let mut hist = EmotionHistogram::default();
    for tp in dataset.iter().flat_map(DatasetRecord::consensus_points) {
        for feeling in &tp.pre_feelings {
            *hist.pre.entry(feeling.label).or_default() += 1;
        }
        for feeling in &tp.post_feelings {
            *hist.post.entry(feeling.label).or_default() += 1;
        }
    }
    hist
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mtp_data::{
        Consensus, Conversation, EpisodeRef, Feeling, Timestamp, TurningPoint, Utterance,
    };

    fn record(
        id: &str,
        transcripts: &[&str],
        duration: f64,
        tps: Vec<TurningPoint>,
    ) -> DatasetRecord {
        let utterances = transcripts
            .iter()
            .enumerate()
            .map(|(i, t)| Utterance {
                ordinal: i as u32 + 1,
                transcript: t.to_string(),
                speaker: "Sheldon".into(),
                start_s: Timestamp::from_secs(i as f64),
                end_s: Timestamp::from_secs(i as f64 + 0.5),
                visual_description: None,
                frame_ref: None,
            })
            .collect();
        DatasetRecord {
            conversation: Conversation {
                id: id.into(),
                scene_tag: "scene".into(),
                source: EpisodeRef {
                    season: 1,
                    episode: 1,
                },
                duration_s: Timestamp::from_secs(duration),
                utterances,
            },
            annotations: vec![],
            consensus: Some(Consensus {
                turning_points: tps,
            }),
        }
    }

    #[test]
    fn empty_dataset_is_all_zero() {
        assert_eq!(dataset_stats(&[]), DatasetStats::default());
        assert_eq!(emotion_histogram(&[]), EmotionHistogram::default());
    }

    #[test]
    fn two_conversation_fixture_hand_counts() {
        // c1: 3 + 1 + 4 = 8 words, 3 utterances, 120 s, one TP
        // c2: 2 + 5 = 7 words, 2 utterances, 60 s, no TP
        let data = vec![
            record(
                "c1",
                &["Hi there Penny.", "Bazinga!", "I  need   extra money."],
                120.0,
                vec![TurningPoint::new(Timestamp::from_secs(85.0), "cause")],
            ),
            record(
                "c2",
                &["Good morning.", "What is on your face?"],
                60.0,
                vec![],
            ),
        ];
        let s = dataset_stats(&data);
        assert_eq!(s.n_conversations, 2);
        assert_eq!(s.n_tp_conversations, 1);
        assert_eq!(s.n_utterances, 5);
        assert_eq!(s.n_words, 15);
        assert_eq!(s.max_transcript_words, 8);
        assert_eq!(s.avg_transcript_words, 7.5);
        assert_eq!(s.total_duration_h, 180.0 / 3600.0);
        assert_eq!(s.avg_conversation_s, 90.0);
        assert_eq!(s.max_conversation_s, 120.0);
    }

    #[test]
    fn histogram_single_tp() {
        let mut tp = TurningPoint::new(Timestamp::from_secs(85.0), "concern about donating");
        tp.pre_feelings.push(Feeling {
            label: EmotionLabel::Neutral,
            ts: Timestamp::from_secs(84.0),
        });
        tp.post_feelings.push(Feeling {
            label: EmotionLabel::Nervous,
            ts: Timestamp::from_secs(98.0),
        });
        let hist = emotion_histogram(&[record("c1", &["x"], 150.0, vec![tp])]);
        assert_eq!(hist.pre, BTreeMap::from([(EmotionLabel::Neutral, 1)]));
        assert_eq!(hist.post, BTreeMap::from([(EmotionLabel::Nervous, 1)]));
    }

    #[test]
    fn histogram_three_tp_fixture_hand_tally() {
        let f = |label, ts| Feeling {
            label,
            ts: Timestamp::from_secs(ts),
        };
        use EmotionLabel::*;
        let mut a = TurningPoint::new(Timestamp::from_secs(10.0), "a");
        a.pre_feelings = vec![f(Happy, 5.0), f(Calm, 6.0)];
        a.post_feelings = vec![f(Angry, 12.0)];
        let mut b = TurningPoint::new(Timestamp::from_secs(40.0), "b");
        b.pre_feelings = vec![f(Happy, 35.0)];
        b.post_feelings = vec![f(Sad, 45.0), f(Angry, 46.0)];
        let mut c = TurningPoint::new(Timestamp::from_secs(20.0), "c");
        c.pre_feelings = vec![f(Neutral, 15.0)];
        c.post_feelings = vec![f(Surprised, 21.0)];
        let data = vec![
            record("c1", &["x"], 60.0, vec![a, b]),
            record("c2", &["y"], 60.0, vec![c]),
        ];
        let hist = emotion_histogram(&data);
        // pre: Happy 2, Calm 1, Neutral 1; post: Angry 2, Sad 1, Surprised 1
        assert_eq!(
            hist.pre,
            BTreeMap::from([(Happy, 2), (Calm, 1), (Neutral, 1)])
        );
        assert_eq!(
            hist.post,
            BTreeMap::from([(Angry, 2), (Sad, 1), (Surprised, 1)])
        );
        assert_eq!(hist.total(), 8);
        assert_eq!(EmotionHistogram::top(&hist.post, 1), vec![(Angry, 2)]);
    }
}
