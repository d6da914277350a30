use std::collections::BTreeSet;
use std::sync::LazyLock;

use regex::Regex;
use thiserror::Error;

static BRACKETED: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\[([^\[\]]*)\]").unwrap());
static ORDINAL: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)\butterance_(\d+)\b").unwrap());
static NONE_WORD: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)\bnone\b").unwrap());

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("conclusion has neither an utterance list nor `None`: {excerpt:?}")]
pub struct ConclusionParseError {
    pub excerpt: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ParsedConclusion {
    pub ordinals: Vec<u32>,
    pub warnings: Vec<String>,
}

/// Extracts `utterance_<n>` indices from the first bracketed list that holds
/// any (an explicit `[]` counts as an empty answer). Without such a list, a
/// standalone `None` means no turning point. Duplicates are dropped keeping
/// first occurrence; indices outside `1..=m` are dropped with a warning.
pub fn parse_conclusion(text: &str, m: usize) -> Result<ParsedConclusion, ConclusionParseError> {
    let mut list = None;
    for caps in BRACKETED.captures_iter(text) {
        let inner = caps.get(1).map_or("", |g| g.as_str());
        if inner.trim().is_empty() || ORDINAL.is_match(inner) {
            list = Some(inner);
            break;
        }
    }

    let Some(inner) = list else {
        if NONE_WORD.is_match(text) {
            return Ok(ParsedConclusion::default());
        }
        return Err(ConclusionParseError {
            excerpt: text.chars().take(120).collect(),
        });
    };

    let mut out = ParsedConclusion::default();
    let mut seen = BTreeSet::new();
    for caps in ORDINAL.captures_iter(inner) {
        let digits = &caps[1];
        match digits.parse::<u32>() {
            Ok(n) if n >= 1 && (n as usize) <= m => {
                if seen.insert(n) {
                    out.ordinals.push(n);
                }
            }
            _ => out
                .warnings
                .push(format!("dropping utterance_{digits}: outside 1..={m}")),
        }
    }
    Ok(out)
}

/// Lines of the model's analysis that mention each chosen utterance, joined.
/// Empty when the analysis never names the utterance.
pub fn extract_causes(raw_reasoning: &str, ordinals: &[u32]) -> Vec<String> {
    ordinals
        .iter()
        .map(|n| {
            let re = Regex::new(&format!(r"(?i)\butterance[_ ]?{n}\b")).expect("valid pattern");
            raw_reasoning
                .lines()
                .map(str::trim)
                .filter(|line| re.is_match(line) && !line.starts_with("utterances ="))
                .collect::<Vec<_>>()
                .join(" ")
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn published_format() {
        let p = parse_conclusion("utterances = [utterance_5, utterance_25]", 30).unwrap();
        assert_eq!(p.ordinals, vec![5, 25]);
        assert!(p.warnings.is_empty());
    }

    #[test]
    fn none_means_empty() {
        assert!(parse_conclusion("None", 10).unwrap().ordinals.is_empty());
        assert!(parse_conclusion("The answer is none.", 10)
            .unwrap()
            .ordinals
            .is_empty());
        assert!(parse_conclusion("utterances = []", 10)
            .unwrap()
            .ordinals
            .is_empty());
    }

    #[test]
    fn dedup_and_range_filter() {
        let p =
            parse_conclusion("utterances = [utterance_3, utterance_3, utterance_99]", 10).unwrap();
        assert_eq!(p.ordinals, vec![3]);
        assert_eq!(p.warnings.len(), 1);
        let p = parse_conclusion("[utterance_0, utterance_99999999999999999999]", 10).unwrap();
        assert!(p.ordinals.is_empty());
        assert_eq!(p.warnings.len(), 2);
    }

    #[test]
    fn first_list_with_indices_wins() {
        let p = parse_conclusion(
            "Note [sic]. utterances = [utterance_2] and later [utterance_4]",
            10,
        )
        .unwrap();
        assert_eq!(p.ordinals, vec![2]);
        // a list beats an embedded None
        let p = parse_conclusion("None of the others, utterances = [Utterance_7]", 10).unwrap();
        assert_eq!(p.ordinals, vec![7]);
    }

    #[test]
    fn prose_is_an_error() {
        assert!(parse_conclusion("I could not decide.", 10).is_err());
        assert!(parse_conclusion("", 10).is_err());
        // `utterance_12` does not contain `utterance_1`
        assert!(parse_conclusion("[noneutterance_12]", 10).is_err());
    }

    #[test]
    fn causes_from_matching_lines() {
        let raw = "Tracker: ...\n- utterance_3: the boss texts Maya.\n- utterance_30 is unrelated\nutterances = [utterance_3]";
        assert_eq!(
            extract_causes(raw, &[3, 4]),
            vec![
                "- utterance_3: the boss texts Maya.".to_string(),
                String::new()
            ]
        );
    }
}
