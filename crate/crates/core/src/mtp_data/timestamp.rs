use std::fmt;
use std::str::FromStr;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Seconds from the start of a conversation. Always finite and non-negative.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
pub struct Timestamp(f64);

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TimestampError {
    #[error("empty timestamp")]
    Empty,
    #[error("malformed timestamp component `{token}` in `{input}`")]
    Malformed { input: String, token: String },
    #[error("seconds component `{token}` in `{input}` must be below 60")]
    SecondsOutOfRange { input: String, token: String },
    #[error("minutes component `{token}` in `{input}` must be below 60 when hours are given")]
    MinutesOutOfRange { input: String, token: String },
    #[error("timestamp {0} is negative or not finite")]
    OutOfDomain(f64),
}

impl Timestamp {
    pub const ZERO: Timestamp = Timestamp(0.0);

    pub fn new(seconds: f64) -> Result<Self, TimestampError> {
        if seconds.is_finite() && seconds >= 0.0 {
            // normalise -0.0
            Ok(Timestamp(seconds + 0.0))
        } else {
            Err(TimestampError::OutOfDomain(seconds))
        }
    }

    /// Panics on negative or non-finite input. Intended for literals.
    pub fn from_secs(seconds: f64) -> Self {
        Self::new(seconds).expect("timestamp must be finite and non-negative")
    }

    pub fn seconds(self) -> f64 {
        self.0
    }

    /// Clock rendering (`M:SS`, or `H:MM:SS` past one hour). Fractions are kept.
    pub fn to_clock(self) -> String {
        let total = self.0;
        let whole = total.trunc() as u64;
        let frac = total - total.trunc();
        let (h, m, s) = (whole / 3600, (whole % 3600) / 60, whole % 60);
        let secs = if frac > 0.0 {
            let f = format!("{frac}");
            format!("{s:02}{}", &f[1..])
        } else {
            format!("{s:02}")
        };
        if h > 0 {
            format!("{h}:{m:02}:{secs}")
        } else {
            format!("{m}:{secs}")
        }
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", format_timestamp(*self))
    }
}

impl FromStr for Timestamp {
    type Err = TimestampError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_timestamp(s)
    }
}

/// Canonical textual form: plain decimal seconds using the shortest
/// representation that parses back to the identical value.
pub fn format_timestamp(ts: Timestamp) -> String {
    format!("{}", ts.0)
}

/// Accepts bare seconds (`85`, `85.5`), `M:SS`, `MM:SS` and `H:MM:SS`.
pub fn parse_timestamp(text: &str) -> Result<Timestamp, TimestampError> {
    let input = text.trim();
    if input.is_empty() {
        return Err(TimestampError::Empty);
    }
    let parts: Vec<&str> = input.split(':').collect();
    let malformed = |token: &str| TimestampError::Malformed {
        input: input.to_string(),
        token: token.to_string(),
    };
    match parts.as_slice() {
        [secs] => {
            let value = parse_decimal(secs).ok_or_else(|| malformed(secs))?;
            Timestamp::new(value)
        }
        [mins, secs] => {
            let m = parse_integer(mins).ok_or_else(|| malformed(mins))?;
            let s = parse_clock_seconds(input, secs)?;
            Timestamp::new(m as f64 * 60.0 + s)
        }
        [hours, mins, secs] => {
            let h = parse_integer(hours).ok_or_else(|| malformed(hours))?;
            if mins.len() != 2 {
                return Err(malformed(mins));
            }
            let m = parse_integer(mins).ok_or_else(|| malformed(mins))?;
            if m >= 60 {
                return Err(TimestampError::MinutesOutOfRange {
                    input: input.to_string(),
                    token: mins.to_string(),
                });
            }
            let s = parse_clock_seconds(input, secs)?;
            Timestamp::new(h as f64 * 3600.0 + m as f64 * 60.0 + s)
        }
        _ => Err(malformed(input)),
    }
}

fn parse_clock_seconds(input: &str, token: &str) -> Result<f64, TimestampError> {
    let (whole, _) = token.split_once('.').unwrap_or((token, ""));
    let value = if whole.len() == 2 {
        parse_decimal(token)
    } else {
        None
    };
    let value = value.ok_or_else(|| TimestampError::Malformed {
        input: input.to_string(),
        token: token.to_string(),
    })?;
    if value >= 60.0 {
        return Err(TimestampError::SecondsOutOfRange {
            input: input.to_string(),
            token: token.to_string(),
        });
    }
    Ok(value)
}

fn parse_integer(token: &str) -> Option<u64> {
    if token.is_empty() || !token.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    token.parse().ok()
}

// Plain non-negative decimals only: no sign, exponent, `inf` or `nan`.
fn parse_decimal(token: &str) -> Option<f64> {
    let (whole, frac) = match token.split_once('.') {
        Some((w, f)) => (w, Some(f)),
        None => (token, None),
    };
    let digits = |s: &str| s.bytes().all(|b| b.is_ascii_digit());
    if whole.is_empty() && frac.is_none_or(str::is_empty) {
        return None;
    }
    if !digits(whole) || !frac.is_none_or(|f| !f.is_empty() && digits(f)) {
        return None;
    }
    token.parse().ok()
}

impl Serialize for Timestamp {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_f64(self.0)
    }
}

impl<'de> Deserialize<'de> for Timestamp {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct TimestampVisitor;

        impl Visitor<'_> for TimestampVisitor {
            type Value = Timestamp;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("non-negative seconds or a clock string such as \"1:25\"")
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Timestamp, E> {
                Timestamp::new(v).map_err(E::custom)
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Timestamp, E> {
                Timestamp::new(v as f64).map_err(E::custom)
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Timestamp, E> {
                Timestamp::new(v as f64).map_err(E::custom)
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<Timestamp, E> {
                parse_timestamp(v).map_err(E::custom)
            }
        }

        deserializer.deserialize_any(TimestampVisitor)
    }
}
