//! Wire protocol for an external constraint judge.
//!
//! Request body:
//!
//! ```json
//! {"query": "...", "response": "...", "constraints": ["<description>", ...]}
//! ```
//!
//! Response body: a JSON array with one verdict per queried constraint,
//!
//! ```json
//! [{"constraint": "<description, verbatim>", "reasoning": "...", "evaluation_result": true}]
//! ```
//!
//! `evaluation_result` may be a JSON boolean, the bare words `True`/`False`
//! (as judges prompted with Python-style examples tend to write), or the
//! strings `"true"`/`"false"` in any letter case. A surrounding Markdown code
//! fence is ignored.

use std::collections::HashMap;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::adherence::AdherenceVector;
use crate::constraint::{Constraint, ConstraintSet};

/// Environment variable holding the judge endpoint URL.
pub const JUDGE_URL_ENV: &str = "RPO_JUDGE_URL";
/// Environment variable holding the bearer token sent to the judge.
pub const JUDGE_KEY_ENV: &str = "RPO_JUDGE_KEY";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum JudgeError {
    #[error("verdict echoes an unknown constraint: {0:?}")]
    EchoMismatch(String),
    #[error("no verdict for constraint: {0:?}")]
    MissingConstraint(String),
    #[error("malformed verdict: {0}")]
    MalformedVerdict(String),
    #[error("judge transport failed: {0}")]
    Transport(String),
    #[error("judge not configured: {0}")]
    NotConfigured(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgeRequest {
    pub query: String,
    pub response: String,
    pub constraints: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgeVerdict {
    #[serde(rename = "constraint")]
    pub constraint_echo: String,
    pub reasoning: String,
    pub evaluation_result: bool,
}

pub fn encode(query: &str, response: &str, cs: &ConstraintSet) -> String {
    let req = JudgeRequest {
        query: query.to_string(),
        response: response.to_string(),
        constraints: cs.descriptions(),
    };
    serde_json::to_string(&req).expect("request serializes")
}

/// Rewrites bare `True`/`False` tokens outside string literals as JSON
/// booleans.
fn normalize_booleans(payload: &str) -> String {
    let mut out = String::with_capacity(payload.len());
    let mut in_string = false;
    let mut escaped = false;
    let mut rest = payload;
    while let Some(c) = rest.chars().next() {
        if in_string {
            out.push(c);
            if escaped {
                escaped = false;
            } else if c == '\\' {
                escaped = true;
            } else if c == '"' {
                in_string = false;
            }
            rest = &rest[c.len_utf8()..];
            continue;
        }
        if c == '"' {
            in_string = true;
        }
        let word_start = !out.chars().last().is_some_and(|p| p.is_alphanumeric() || p == '_');
        let replaced = [("True", "true"), ("False", "false")].into_iter().find(|(from, _)| {
            word_start
                && rest.starts_with(from)
                && !rest[from.len()..]
                    .chars()
                    .next()
                    .is_some_and(|n| n.is_alphanumeric() || n == '_')
        });
        match replaced {
            Some((from, to)) => {
                out.push_str(to);
                rest = &rest[from.len()..];
            }
            None => {
                out.push(c);
                rest = &rest[c.len_utf8()..];
            }
        }
    }
    out
}

fn strip_fence(payload: &str) -> &str {
    let t = payload.trim();
    match t.strip_prefix("```") {
        Some(inner) => {
            let inner = inner.trim_start_matches(|c: char| c.is_alphanumeric());
            inner.strip_suffix("```").unwrap_or(inner).trim()
        }
        None => t,
    }
}

fn as_bool(v: &Value) -> Option<bool> {
    match v {
        Value::Bool(b) => Some(*b),
        Value::String(s) if s.eq_ignore_ascii_case("true") => Some(true),
        Value::String(s) if s.eq_ignore_ascii_case("false") => Some(false),
        _ => None,
    }
}

/// Parses a judge reply and aligns it with `cs`: the i-th returned verdict
/// answers the i-th constraint. Each constraint must be covered exactly once
/// and every echo must match a queried description verbatim.
pub fn decode(payload: &str, cs: &ConstraintSet) -> Result<Vec<JudgeVerdict>, JudgeError> {
    let value: Value = serde_json::from_str(&normalize_booleans(strip_fence(payload)))
        .map_err(|e| JudgeError::MalformedVerdict(format!("not JSON: {e}")))?;
    let items = value
        .as_array()
        .ok_or_else(|| JudgeError::MalformedVerdict("expected a JSON array".into()))?;

    let descriptions = cs.descriptions();
    let mut slots: Vec<Option<JudgeVerdict>> = vec![None; descriptions.len()];
    for item in items {
        let obj = item
            .as_object()
            .ok_or_else(|| JudgeError::MalformedVerdict("verdict is not an object".into()))?;
        let echo = obj
            .get("constraint")
            .and_then(Value::as_str)
            .ok_or_else(|| JudgeError::MalformedVerdict("missing `constraint`".into()))?;
        let reasoning = match obj.get("reasoning") {
            None | Some(Value::Null) => String::new(),
            Some(Value::String(s)) => s.clone(),
            Some(_) => return Err(JudgeError::MalformedVerdict("`reasoning` is not a string".into())),
        };
        let result = obj
            .get("evaluation_result")
            .and_then(as_bool)
            .ok_or_else(|| JudgeError::MalformedVerdict(format!("`evaluation_result` of {echo:?} is not a boolean")))?;

        let mut matching = descriptions
            .iter()
            .enumerate()
            .filter(|(_, d)| *d == echo)
            .map(|(i, _)| i)
            .peekable();
        if matching.peek().is_none() {
            return Err(JudgeError::EchoMismatch(echo.to_string()));
        }
        let slot = matching
            .find(|&i| slots[i].is_none())
            .ok_or_else(|| JudgeError::MalformedVerdict(format!("duplicate verdict for {echo:?}")))?;
        slots[slot] = Some(JudgeVerdict {
            constraint_echo: echo.to_string(),
            reasoning,
            evaluation_result: result,
        });
    }
    slots
        .into_iter()
        .zip(descriptions)
        .map(|(v, d)| v.ok_or(JudgeError::MissingConstraint(d)))
        .collect()
}

/// Sends a request body and returns the reply body.
pub trait JudgeTransport {
    fn post(&self, body: &str) -> Result<String, JudgeError>;
}

/// Offline judge that answers from the rule checkers, through the same wire
/// format as a remote judge.
#[derive(Debug, Clone, Default)]
pub struct StubJudge {
    known: HashMap<String, Constraint>,
}

impl StubJudge {
    /// A stub that can judge every constraint of the given sets.
    pub fn for_sets<'a>(sets: impl IntoIterator<Item = &'a ConstraintSet>) -> Self {
        let mut known = HashMap::new();
        for c in sets.into_iter().flat_map(|s| s.iter()) {
            known.entry(c.description.clone()).or_insert_with(|| c.clone());
        }
        Self { known }
    }
}

impl JudgeTransport for StubJudge {
    fn post(&self, body: &str) -> Result<String, JudgeError> {
        let req: JudgeRequest =
            serde_json::from_str(body).map_err(|e| JudgeError::Transport(format!("bad request: {e}")))?;
        let verdicts = req
            .constraints
            .iter()
            .map(|d| {
                let c = self
                    .known
                    .get(d)
                    .ok_or_else(|| JudgeError::Transport(format!("stub cannot judge {d:?}")))?;
                let ok = c.check(&req.response);
                Ok(JudgeVerdict {
                    constraint_echo: d.clone(),
                    reasoning: format!("Rule check of `{}` returned {ok}.", c.kind.name()),
                    evaluation_result: ok,
                })
            })
            .collect::<Result<Vec<_>, JudgeError>>()?;
        Ok(serde_json::to_string(&verdicts).expect("verdicts serialize"))
    }
}

/// Judge reached by an HTTP POST of the JSON request body.
#[derive(Debug, Clone)]
pub struct HttpJudge {
    pub url: String,
    pub api_key: Option<String>,
    pub timeout: Duration,
}

impl HttpJudge {
    /// Reads the endpoint from `RPO_JUDGE_URL` and the optional key from
    /// `RPO_JUDGE_KEY`.
    pub fn from_env() -> Result<Self, JudgeError> {
        let url =
            std::env::var(JUDGE_URL_ENV).map_err(|_| JudgeError::NotConfigured(format!("{JUDGE_URL_ENV} is unset")))?;
        Ok(Self {
            url,
            api_key: std::env::var(JUDGE_KEY_ENV).ok(),
            timeout: Duration::from_secs(60),
        })
    }
}

impl JudgeTransport for HttpJudge {
    fn post(&self, body: &str) -> Result<String, JudgeError> {
        let mut req = ureq::post(&self.url)
            .timeout(self.timeout)
            .set("Content-Type", "application/json");
        if let Some(key) = &self.api_key {
            req = req.set("Authorization", &format!("Bearer {key}"));
        }
        let resp = req
            .send_string(body)
            .map_err(|e| JudgeError::Transport(e.to_string()))?;
        resp.into_string().map_err(|e| JudgeError::Transport(e.to_string()))
    }
}

/// Judges one response and returns its adherence vector under `cs`.
pub fn judge<T: JudgeTransport + ?Sized>(
    transport: &T,
    query: &str,
    response: &str,
    cs: &ConstraintSet,
) -> Result<AdherenceVector, JudgeError> {
    let reply = transport.post(&encode(query, response, cs))?;
    let verdicts = decode(&reply, cs)?;
    Ok(AdherenceVector::new(
        cs.id.clone(),
        verdicts.iter().map(|v| v.evaluation_result).collect(),
    ))
}
