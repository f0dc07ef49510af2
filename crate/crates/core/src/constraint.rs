//! Verifiable constraints, their checkers and exact-negation reversal.
//!
//! Every [`ConstraintKind`] has a partner kind describing exactly the
//! responses it rejects, so that for any text `y`,
//! `check(&reverse(c), y) == !check(c, y)`. Counting kinds negate across the
//! integer boundary: "at most `n`" becomes "at least `n + 1`" and vice versa.
//! Because "at least 0" accepts everything and has no negation inside the
//! DSL, lower bounds must be at least 1.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::text;

/// Largest accepted count parameter. Keeps `n + 1` representable everywhere.
pub const MAX_COUNT: usize = u32::MAX as usize - 1;

/// Id prefix marking a reversed constraint.
const NEGATION_PREFIX: &str = "neg:";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ConstraintError {
    #[error("unknown constraint kind `{0}`")]
    UnknownKind(String),
    #[error("bad constraint parameter `{0}`")]
    BadParams(String),
    #[error("duplicate constraint id `{0}`")]
    DuplicateId(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ConstraintKind {
    MaxWords(usize),
    MinWords(usize),
    IncludeKeyword {
        keyword: String,
        min_count: usize,
    },
    /// At most `max_count` occurrences; `max_count == 0` forbids the keyword.
    ExcludeKeyword {
        keyword: String,
        max_count: usize,
    },
    StartsWith(String),
    NotStartsWith(String),
    EndsWith(String),
    NotEndsWith(String),
    MaxSentences(usize),
    MinSentences(usize),
    AllCaps,
    NotAllCaps,
    ContainsChar {
        ch: char,
        min_count: usize,
    },
    MaxChar {
        ch: char,
        max_count: usize,
    },
}

impl ConstraintKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::MaxWords(_) => "MaxWords",
            Self::MinWords(_) => "MinWords",
            Self::IncludeKeyword { .. } => "IncludeKeyword",
            Self::ExcludeKeyword { .. } => "ExcludeKeyword",
            Self::StartsWith(_) => "StartsWith",
            Self::NotStartsWith(_) => "NotStartsWith",
            Self::EndsWith(_) => "EndsWith",
            Self::NotEndsWith(_) => "NotEndsWith",
            Self::MaxSentences(_) => "MaxSentences",
            Self::MinSentences(_) => "MinSentences",
            Self::AllCaps => "AllCaps",
            Self::NotAllCaps => "NotAllCaps",
            Self::ContainsChar { .. } => "ContainsChar",
            Self::MaxChar { .. } => "MaxChar",
        }
    }

    pub fn check(&self, response: &str) -> bool {
        match self {
            Self::MaxWords(n) => text::word_count(response) <= *n,
            Self::MinWords(n) => text::word_count(response) >= *n,
            Self::IncludeKeyword { keyword, min_count } => text::keyword_occurrences(response, keyword) >= *min_count,
            Self::ExcludeKeyword { keyword, max_count } => text::keyword_occurrences(response, keyword) <= *max_count,
            Self::StartsWith(s) => text::starts_with(response, s),
            Self::NotStartsWith(s) => !text::starts_with(response, s),
            Self::EndsWith(s) => text::ends_with(response, s),
            Self::NotEndsWith(s) => !text::ends_with(response, s),
            Self::MaxSentences(n) => text::sentence_count(response) <= *n,
            Self::MinSentences(n) => text::sentence_count(response) >= *n,
            Self::AllCaps => text::is_all_caps(response),
            Self::NotAllCaps => !text::is_all_caps(response),
            Self::ContainsChar { ch, min_count } => text::char_count(response, *ch) >= *min_count,
            Self::MaxChar { ch, max_count } => text::char_count(response, *ch) <= *max_count,
        }
    }

    /// The exact logical complement.
    pub fn negate(&self) -> ConstraintKind {
        match self {
            Self::MaxWords(n) => Self::MinWords(n + 1),
            Self::MinWords(n) => Self::MaxWords(n - 1),
            Self::IncludeKeyword { keyword, min_count } => Self::ExcludeKeyword {
                keyword: keyword.clone(),
                max_count: min_count - 1,
            },
            Self::ExcludeKeyword { keyword, max_count } => Self::IncludeKeyword {
                keyword: keyword.clone(),
                min_count: max_count + 1,
            },
            Self::StartsWith(s) => Self::NotStartsWith(s.clone()),
            Self::NotStartsWith(s) => Self::StartsWith(s.clone()),
            Self::EndsWith(s) => Self::NotEndsWith(s.clone()),
            Self::NotEndsWith(s) => Self::EndsWith(s.clone()),
            Self::MaxSentences(n) => Self::MinSentences(n + 1),
            Self::MinSentences(n) => Self::MaxSentences(n - 1),
            Self::AllCaps => Self::NotAllCaps,
            Self::NotAllCaps => Self::AllCaps,
            Self::ContainsChar { ch, min_count } => Self::MaxChar {
                ch: *ch,
                max_count: min_count - 1,
            },
            Self::MaxChar { ch, max_count } => Self::ContainsChar {
                ch: *ch,
                min_count: max_count + 1,
            },
        }
    }

    /// Checks parameter invariants. Lower bounds must be positive so that the
    /// negation stays inside the DSL.
    pub fn validate(&self) -> Result<(), ConstraintError> {
        let bad = |field: &str| Err(ConstraintError::BadParams(field.to_string()));
        match self {
            Self::MaxWords(n) | Self::MaxSentences(n) if *n > MAX_COUNT => bad("n"),
            Self::MinWords(n) | Self::MinSentences(n) if *n == 0 || *n > MAX_COUNT => bad("n"),
            Self::IncludeKeyword { keyword, min_count } => {
                if text::keyword_tokens(keyword).is_empty() {
                    bad("keyword")
                } else if *min_count == 0 || *min_count > MAX_COUNT {
                    bad("min_count")
                } else {
                    Ok(())
                }
            }
            Self::ExcludeKeyword { keyword, max_count } => {
                if text::keyword_tokens(keyword).is_empty() {
                    bad("keyword")
                } else if *max_count > MAX_COUNT {
                    bad("max_count")
                } else {
                    Ok(())
                }
            }
            Self::StartsWith(s) | Self::NotStartsWith(s) if s.trim().is_empty() => bad("prefix"),
            Self::EndsWith(s) | Self::NotEndsWith(s) if s.trim().is_empty() => bad("suffix"),
            Self::ContainsChar { min_count, .. } if *min_count == 0 || *min_count > MAX_COUNT => bad("min_count"),
            Self::MaxChar { max_count, .. } if *max_count > MAX_COUNT => bad("max_count"),
            _ => Ok(()),
        }
    }

    /// Deterministic natural-language template.
    pub fn render(&self) -> String {
        fn plural(n: usize, word: &str) -> String {
            if n == 1 {
                format!("{n} {word}")
            } else {
                format!("{n} {word}s")
            }
        }
        let times = |n: usize| {
            if n == 1 {
                "once".to_string()
            } else {
                format!("{n} times")
            }
        };
        match self {
            Self::MaxWords(n) => format!("The response must contain at most {}.", plural(*n, "word")),
            Self::MinWords(n) => format!("The response must contain at least {}.", plural(*n, "word")),
            Self::IncludeKeyword { keyword, min_count: 1 } => {
                format!("The response must mention '{keyword}'.")
            }
            Self::IncludeKeyword { keyword, min_count } => {
                format!("The response must mention '{keyword}' at least {}.", times(*min_count))
            }
            Self::ExcludeKeyword { keyword, max_count: 0 } => {
                format!("The response must not mention '{keyword}'.")
            }
            Self::ExcludeKeyword { keyword, max_count } => {
                format!("The response must mention '{keyword}' at most {}.", times(*max_count))
            }
            Self::StartsWith(s) => format!("The response must start with '{s}'."),
            Self::NotStartsWith(s) => format!("The response must not start with '{s}'."),
            Self::EndsWith(s) => format!("The response must end with '{s}'."),
            Self::NotEndsWith(s) => format!("The response must not end with '{s}'."),
            Self::MaxSentences(n) => {
                format!("The response must contain at most {}.", plural(*n, "sentence"))
            }
            Self::MinSentences(n) => {
                format!("The response must contain at least {}.", plural(*n, "sentence"))
            }
            Self::AllCaps => "The response must be written entirely in capital letters.".to_string(),
            Self::NotAllCaps => "The response must not be written entirely in capital letters.".to_string(),
            Self::ContainsChar { ch, min_count } => format!(
                "The response must contain the character '{ch}' at least {}.",
                times(*min_count)
            ),
            Self::MaxChar { ch, max_count: 0 } => {
                format!("The response must not contain the character '{ch}'.")
            }
            Self::MaxChar { ch, max_count } => format!(
                "The response must contain the character '{ch}' at most {}.",
                times(*max_count)
            ),
        }
    }

    fn params_json(&self) -> Value {
        match self {
            Self::MaxWords(n) | Self::MinWords(n) | Self::MaxSentences(n) | Self::MinSentences(n) => {
                json!({ "n": n })
            }
            Self::IncludeKeyword { keyword, min_count } => {
                json!({ "keyword": keyword, "min_count": min_count })
            }
            Self::ExcludeKeyword { keyword, max_count } => {
                json!({ "keyword": keyword, "max_count": max_count })
            }
            Self::StartsWith(s) | Self::NotStartsWith(s) => json!({ "prefix": s }),
            Self::EndsWith(s) | Self::NotEndsWith(s) => json!({ "suffix": s }),
            Self::AllCaps | Self::NotAllCaps => json!({}),
            Self::ContainsChar { ch, min_count } => json!({ "char": ch.to_string(), "min_count": min_count }),
            Self::MaxChar { ch, max_count } => json!({ "char": ch.to_string(), "max_count": max_count }),
        }
    }

    fn from_params(kind: &str, params: &Map<String, Value>) -> Result<Self, ConstraintError> {
        let count = |field: &str, default: Option<usize>| -> Result<usize, ConstraintError> {
            match params.get(field) {
                None | Some(Value::Null) => default.ok_or_else(|| ConstraintError::BadParams(field.to_string())),
                Some(v) => v
                    .as_u64()
                    .and_then(|n| usize::try_from(n).ok())
                    .ok_or_else(|| ConstraintError::BadParams(field.to_string())),
            }
        };
        let string = |field: &str| -> Result<String, ConstraintError> {
            params
                .get(field)
                .and_then(Value::as_str)
                .map(str::to_string)
                .ok_or_else(|| ConstraintError::BadParams(field.to_string()))
        };
        let single_char = || -> Result<char, ConstraintError> {
            let s = string("char")?;
            let mut chars = s.chars();
            match (chars.next(), chars.next()) {
                (Some(c), None) => Ok(c),
                _ => Err(ConstraintError::BadParams("char".to_string())),
            }
        };
        let parsed = match kind {
            "MaxWords" => Self::MaxWords(count("n", None)?),
            "MinWords" => Self::MinWords(count("n", None)?),
            "IncludeKeyword" => Self::IncludeKeyword {
                keyword: string("keyword")?,
                min_count: count("min_count", Some(1))?,
            },
            "ExcludeKeyword" => Self::ExcludeKeyword {
                keyword: string("keyword")?,
                max_count: count("max_count", Some(0))?,
            },
            "StartsWith" => Self::StartsWith(string("prefix")?),
            "NotStartsWith" => Self::NotStartsWith(string("prefix")?),
            "EndsWith" => Self::EndsWith(string("suffix")?),
            "NotEndsWith" => Self::NotEndsWith(string("suffix")?),
            "MaxSentences" => Self::MaxSentences(count("n", None)?),
            "MinSentences" => Self::MinSentences(count("n", None)?),
            "AllCaps" => Self::AllCaps,
            "NotAllCaps" => Self::NotAllCaps,
            "ContainsChar" => Self::ContainsChar {
                ch: single_char()?,
                min_count: count("min_count", Some(1))?,
            },
            "MaxChar" => Self::MaxChar {
                ch: single_char()?,
                max_count: count("max_count", Some(0))?,
            },
            other => return Err(ConstraintError::UnknownKind(other.to_string())),
        };
        parsed.validate()?;
        Ok(parsed)
    }
}

/// One machine-checkable requirement of an instruction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Constraint {
    pub id: String,
    pub kind: ConstraintKind,
    pub description: String,
    pub reversed_from: Option<String>,
}

impl Constraint {
    /// Builds a constraint with the rendered description.
    pub fn new(id: impl Into<String>, kind: ConstraintKind) -> Result<Self, ConstraintError> {
        kind.validate()?;
        let description = kind.render();
        Ok(Self {
            id: id.into(),
            kind,
            description,
            reversed_from: None,
        })
    }

    pub fn check(&self, response: &str) -> bool {
        self.kind.check(response)
    }

    pub fn render(&self) -> String {
        self.kind.render()
    }

    /// Exact negation. Reversing a reversed constraint restores the original id.
    pub fn reverse(&self) -> Constraint {
        let kind = self.kind.negate();
        let id = match self.id.strip_prefix(NEGATION_PREFIX) {
            Some(original) => original.to_string(),
            None => format!("{NEGATION_PREFIX}{}", self.id),
        };
        Constraint {
            id,
            description: kind.render(),
            kind,
            reversed_from: Some(self.id.clone()),
        }
    }

    pub fn to_json(&self) -> Value {
        let mut obj = Map::new();
        obj.insert("id".into(), Value::String(self.id.clone()));
        obj.insert("kind".into(), Value::String(self.kind.name().into()));
        obj.insert("params".into(), self.kind.params_json());
        obj.insert("description".into(), Value::String(self.description.clone()));
        if let Some(from) = &self.reversed_from {
            obj.insert("reversed_from".into(), Value::String(from.clone()));
        }
        Value::Object(obj)
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {}", self.id, self.description)
    }
}

pub fn check(c: &Constraint, response: &str) -> bool {
    c.check(response)
}

pub fn reverse(c: &Constraint) -> Constraint {
    c.reverse()
}

pub fn render(c: &Constraint) -> String {
    c.render()
}

/// Parses a constraint record. Parameters are read from a `params` object
/// when present, otherwise from the top-level fields
/// (`{"id":"A","kind":"MaxWords","n":199}`).
pub fn parse_constraint(record: &Value) -> Result<Constraint, ConstraintError> {
    let obj = record
        .as_object()
        .ok_or_else(|| ConstraintError::BadParams("record".into()))?;
    let id = obj
        .get("id")
        .and_then(Value::as_str)
        .filter(|s| !s.is_empty())
        .ok_or_else(|| ConstraintError::BadParams("id".into()))?;
    let kind_name = obj
        .get("kind")
        .and_then(Value::as_str)
        .ok_or_else(|| ConstraintError::BadParams("kind".into()))?;
    let kind = match obj.get("params") {
        Some(Value::Object(params)) => ConstraintKind::from_params(kind_name, params)?,
        Some(_) => return Err(ConstraintError::BadParams("params".into())),
        None => ConstraintKind::from_params(kind_name, obj)?,
    };
    let description = match obj.get("description") {
        Some(Value::String(s)) => s.clone(),
        None | Some(Value::Null) => kind.render(),
        Some(_) => return Err(ConstraintError::BadParams("description".into())),
    };
    let reversed_from = match obj.get("reversed_from") {
        Some(Value::String(s)) => Some(s.clone()),
        None | Some(Value::Null) => None,
        Some(_) => return Err(ConstraintError::BadParams("reversed_from".into())),
    };
    Ok(Constraint {
        id: id.to_string(),
        kind,
        description,
        reversed_from,
    })
}

impl Serialize for Constraint {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.to_json().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Constraint {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let value = Value::deserialize(deserializer)?;
        parse_constraint(&value).map_err(serde::de::Error::custom)
    }
}

/// Ordered constraints of one instruction. Order defines adherence-vector
/// index alignment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConstraintSet {
    pub id: String,
    pub constraints: Vec<Constraint>,
}

impl ConstraintSet {
    pub fn new(id: impl Into<String>, constraints: Vec<Constraint>) -> Result<Self, ConstraintError> {
        let mut seen = HashSet::new();
        for c in &constraints {
            if !seen.insert(c.id.as_str()) {
                return Err(ConstraintError::DuplicateId(c.id.clone()));
            }
        }
        Ok(Self {
            id: id.into(),
            constraints,
        })
    }

    pub fn len(&self) -> usize {
        self.constraints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.constraints.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Constraint> {
        self.constraints.iter()
    }

    pub fn descriptions(&self) -> Vec<String> {
        self.constraints.iter().map(|c| c.description.clone()).collect()
    }

    /// Stable key over the constraint semantics only (kinds and parameters),
    /// ignoring ids and descriptions. Two sets that accept exactly the same
    /// responses constraint-by-constraint share a key.
    pub fn content_key(&self) -> String {
        let mut hasher = Sha256::new();
        for c in &self.constraints {
            hasher.update(c.kind.name().as_bytes());
            hasher.update(c.kind.params_json().to_string().as_bytes());
            hasher.update([0u8]);
        }
        let digest = hasher.finalize();
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

impl<'a> IntoIterator for &'a ConstraintSet {
    type Item = &'a Constraint;
    type IntoIter = std::slice::Iter<'a, Constraint>;

    fn into_iter(self) -> Self::IntoIter {
        self.constraints.iter()
    }
}

impl<'de> Deserialize<'de> for ConstraintSet {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            id: String,
            constraints: Vec<Constraint>,
        }
        let raw = Raw::deserialize(deserializer)?;
        ConstraintSet::new(raw.id, raw.constraints).map_err(serde::de::Error::custom)
    }
}
