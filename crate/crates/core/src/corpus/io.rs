//! JSONL record formats and load/save helpers.
//!
//! One JSON object per line. Blank lines are skipped and an empty file is an
//! empty collection. Record types keep fields they do not know about in an
//! `extra` map, so load followed by save preserves them.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::adherence::AdherenceVector;
use crate::constraint::{Constraint, ConstraintError, ConstraintSet};
use crate::metrics::SessionRecord;
use crate::pairs::{InstructionSamples, KtoExample, MethodTag, PreferencePair, ScoredResponse};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("line {line}: {message}")]
    ParseError { line: usize, message: String },
    #[error("invalid record: {0}")]
    InvalidRecord(String),
}

impl From<ConstraintError> for IoError {
    fn from(e: ConstraintError) -> Self {
        IoError::InvalidRecord(e.to_string())
    }
}

pub fn parse_jsonl<T: DeserializeOwned>(text: &str) -> Result<Vec<T>, IoError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| IoError::ParseError {
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

pub fn to_jsonl<T: Serialize>(records: &[T]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("records serialize"));
        out.push('\n');
    }
    out
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, IoError> {
    let text = fs::read_to_string(path).map_err(|source| IoError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_jsonl(&text)
}

pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<(), IoError> {
    let io = |source| IoError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut w = BufWriter::new(fs::File::create(path).map_err(io)?);
    for r in records {
        serde_json::to_writer(&mut w, r).map_err(|e| IoError::Io {
            path: path.display().to_string(),
            source: e.into(),
        })?;
        w.write_all(b"\n").map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Pretty-printed JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), IoError> {
    let mut text = serde_json::to_string_pretty(value).expect("value serializes");
    text.push('\n');
    fs::write(path, text).map_err(|source| IoError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, IoError> {
    let text = fs::read_to_string(path).map_err(|source| IoError::Io {
        path: path.display().to_string(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| IoError::ParseError {
        line: e.line(),
        message: e.to_string(),
    })
}

/// A response as stored inside pair and KTO records.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResponseRecord {
    pub text: String,
    pub bits: Vec<bool>,
    pub score: usize,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub source_tag: String,
}

impl ResponseRecord {
    pub fn from_scored(r: &ScoredResponse) -> Self {
        Self {
            text: r.text.clone(),
            bits: r.adherence.bits.clone(),
            score: r.score(),
            source_tag: r.source_tag.clone(),
        }
    }

    fn to_scored(&self, set: &ConstraintSet) -> Result<ScoredResponse, IoError> {
        if self.bits.len() != set.len() {
            return Err(IoError::InvalidRecord(format!(
                "{} adherence bits for an instruction of {} constraints",
                self.bits.len(),
                set.len()
            )));
        }
        let adherence = AdherenceVector::new(set.id.clone(), self.bits.clone());
        if adherence.score() != self.score {
            return Err(IoError::InvalidRecord(format!(
                "score {} disagrees with bits",
                self.score
            )));
        }
        Ok(ScoredResponse {
            text: self.text.clone(),
            adherence,
            source_tag: self.source_tag.clone(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub instruction: Vec<Constraint>,
    pub instruction_id: String,
    pub context: String,
    pub chosen: ResponseRecord,
    pub rejected: ResponseRecord,
    pub g: usize,
    pub method_tag: MethodTag,
    #[serde(default)]
    pub source: String,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

impl PairRecord {
    pub fn from_pair(p: &PreferencePair) -> Self {
        Self {
            instruction: p.instruction.constraints.clone(),
            instruction_id: p.instruction.id.clone(),
            context: p.context.clone(),
            chosen: ResponseRecord::from_scored(&p.chosen),
            rejected: ResponseRecord::from_scored(&p.rejected),
            g: p.g,
            method_tag: p.method,
            source: p.source.clone(),
            extra: Map::new(),
        }
    }

    pub fn to_pair(&self) -> Result<PreferencePair, IoError> {
        let instruction = ConstraintSet::new(self.instruction_id.clone(), self.instruction.clone())?;
        Ok(PreferencePair {
            chosen: self.chosen.to_scored(&instruction)?,
            rejected: self.rejected.to_scored(&instruction)?,
            instruction,
            context: self.context.clone(),
            g: self.g,
            method: self.method_tag,
            source: self.source.clone(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KtoRecord {
    pub instruction: Vec<Constraint>,
    pub instruction_id: String,
    pub context: String,
    pub response: ResponseRecord,
    pub label: bool,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

impl KtoRecord {
    pub fn from_example(e: &KtoExample) -> Self {
        Self {
            instruction: e.instruction.constraints.clone(),
            instruction_id: e.instruction.id.clone(),
            context: e.context.clone(),
            response: ResponseRecord::from_scored(&e.response),
            label: e.label,
            extra: Map::new(),
        }
    }

    pub fn to_example(&self) -> Result<KtoExample, IoError> {
        let instruction = ConstraintSet::new(self.instruction_id.clone(), self.instruction.clone())?;
        Ok(KtoExample {
            response: self.response.to_scored(&instruction)?,
            instruction,
            context: self.context.clone(),
            label: self.label,
        })
    }
}

/// Conversation-history reference of a session turn.
pub fn turn_context(session_id: &str, turn_index: usize) -> String {
    format!("{session_id}/t{turn_index}")
}

/// Per-turn sample groups of a session corpus, in session and turn order.
/// Turns that carry no instruction are skipped; turns whose samples do not
/// match their instruction are an error.
pub fn instruction_samples(sessions: &[SessionRecord]) -> Result<Vec<InstructionSamples>, IoError> {
    let mut out = Vec::new();
    for s in sessions {
        for t in &s.turns {
            let Some(cs) = &t.constraints else { continue };
            for r in &t.samples {
                if r.adherence.set_id != cs.id || r.adherence.len() != cs.len() {
                    return Err(IoError::InvalidRecord(format!(
                        "sample of {} is not aligned to its instruction",
                        turn_context(&s.session_id, t.turn_index)
                    )));
                }
            }
            out.push(InstructionSamples {
                instruction: cs.clone(),
                context: turn_context(&s.session_id, t.turn_index),
                responses: t.samples.clone(),
            });
        }
    }
    Ok(out)
}
