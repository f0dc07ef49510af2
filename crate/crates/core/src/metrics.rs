//! Instruction-following metrics over multi-turn sessions.
//!
//! * CSR: per turn, the fraction of its constraints satisfied, averaged over
//!   all turns.
//! * ISR: fraction of turns that satisfy all of their constraints.
//! * SSR: per session, the length of the leading run of fully satisfied
//!   turns divided by the session's turn count, averaged over sessions.
//! * Strict Multi-IF accuracies per step: prompt-level is the ISR of that
//!   step, instruction-level is the pooled constraint fraction of that step.
//!
//! Every metric is computed from integer counts as an exact fraction and
//! rounded once, so the result does not depend on session order.

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::adherence::AdherenceVector;
use crate::constraint::ConstraintSet;
use crate::pairs::ScoredResponse;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MetricsError {
    #[error("no turns to evaluate")]
    EmptyCorpus,
    #[error("session `{0}` has no turns")]
    EmptySession(String),
    #[error("turn {turn} of session `{session}` has an empty constraint set")]
    EmptySet { session: String, turn: usize },
    #[error("session `{session}`: expected turn index {expected}, found {found}")]
    NonContiguousTurns {
        session: String,
        expected: usize,
        found: usize,
    },
    #[error("no session reaches step {0}")]
    NoSuchStep(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnRecord {
    /// 1-based position within the session.
    pub turn_index: usize,
    pub constraint_set_id: String,
    pub adherence: AdherenceVector,
    pub response_text: String,
    /// The turn's instruction, when the record carries it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constraints: Option<ConstraintSet>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub query: Option<String>,
    /// All responses sampled for this turn, scored under `constraints`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub samples: Vec<ScoredResponse>,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

impl TurnRecord {
    pub fn new(turn_index: usize, adherence: AdherenceVector, response_text: impl Into<String>) -> Self {
        Self {
            turn_index,
            constraint_set_id: adherence.set_id.clone(),
            adherence,
            response_text: response_text.into(),
            constraints: None,
            query: None,
            samples: Vec::new(),
            extra: Map::new(),
        }
    }

    pub fn all_satisfied(&self) -> bool {
        self.adherence.bits.iter().all(|&b| b)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub session_id: String,
    pub system_profile_ref: String,
    pub turns: Vec<TurnRecord>,
    /// Set when the refine loop gave up on the last recorded turn.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub terminated: bool,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

impl SessionRecord {
    pub fn new(session_id: impl Into<String>, system_profile_ref: impl Into<String>, turns: Vec<TurnRecord>) -> Self {
        Self {
            session_id: session_id.into(),
            system_profile_ref: system_profile_ref.into(),
            turns,
            terminated: false,
            extra: Map::new(),
        }
    }

    pub fn validate(&self) -> Result<(), MetricsError> {
        if self.turns.is_empty() {
            return Err(MetricsError::EmptySession(self.session_id.clone()));
        }
        for (i, t) in self.turns.iter().enumerate() {
            if t.turn_index != i + 1 {
                return Err(MetricsError::NonContiguousTurns {
                    session: self.session_id.clone(),
                    expected: i + 1,
                    found: t.turn_index,
                });
            }
            if t.adherence.is_empty() {
                return Err(MetricsError::EmptySet {
                    session: self.session_id.clone(),
                    turn: t.turn_index,
                });
            }
        }
        Ok(())
    }

    /// Length of the leading run of fully satisfied turns.
    pub fn satisfied_prefix(&self) -> usize {
        self.turns.iter().take_while(|t| t.all_satisfied()).count()
    }
}

fn validate_all(sessions: &[SessionRecord]) -> Result<(), MetricsError> {
    if sessions.is_empty() {
        return Err(MetricsError::EmptyCorpus);
    }
    sessions.iter().try_for_each(SessionRecord::validate)
}

/// Mean over turns of the fraction of constraints satisfied in the turn.
/// Every turn weighs the same regardless of its constraint count, which keeps
/// `isr <= csr` on every corpus.
pub fn csr(sessions: &[SessionRecord]) -> Result<f64, MetricsError> {
    validate_all(sessions)?;
    let parts: Vec<(usize, usize)> = sessions
        .iter()
        .flat_map(|s| &s.turns)
        .map(|t| (t.adherence.score(), t.adherence.len()))
        .collect();
    Ok(mean_of_fractions(&parts))
}

pub fn isr(sessions: &[SessionRecord]) -> Result<f64, MetricsError> {
    validate_all(sessions)?;
    let (hit, total) = sessions
        .iter()
        .flat_map(|s| &s.turns)
        .fold((0usize, 0usize), |(h, n), t| {
            (h + usize::from(t.all_satisfied()), n + 1)
        });
    Ok(hit as f64 / total as f64)
}

/// Mean over sessions of the all-satisfied prefix length divided by the
/// session's turn count.
pub fn ssr(sessions: &[SessionRecord]) -> Result<f64, MetricsError> {
    validate_all(sessions)?;
    let parts: Vec<(usize, usize)> = sessions.iter().map(|s| (s.satisfied_prefix(), s.turns.len())).collect();
    Ok(mean_of_fractions(&parts))
}

/// Mean of `num / den` fractions. The fractions are summed over the common
/// denominator so the mean is one correctly rounded division of exact
/// integers; when that denominator overflows, a fixed-order float sum is used.
fn mean_of_fractions(parts: &[(usize, usize)]) -> f64 {
    let lcm = parts.iter().try_fold(1u128, |acc, &(_, d)| {
        let d = d as u128;
        let l = acc / gcd(acc, d) * d;
        (l <= u64::MAX as u128).then_some(l)
    });
    if let Some(l) = lcm {
        let num: u128 = parts.iter().map(|&(n, d)| n as u128 * (l / d as u128)).sum();
        if let Some(den) = l.checked_mul(parts.len() as u128) {
            return ratio(num, den);
        }
    }
    let mut fractions: Vec<f64> = parts.iter().map(|&(n, d)| n as f64 / d as f64).collect();
    fractions.sort_by(f64::total_cmp);
    crate::loss::pairwise_sum(&fractions) / parts.len() as f64
}

fn gcd(a: u128, b: u128) -> u128 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// `num / den` reduced first, so both operands are exact in `f64` whenever
/// the reduced fraction fits in 53 bits.
fn ratio(num: u128, den: u128) -> f64 {
    let d = gcd(num, den).max(1);
    (num / d) as f64 / (den / d) as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepAccuracy {
    pub step: usize,
    pub prompt_strict: f64,
    pub inst_strict: f64,
}

/// Strict accuracies over turn `step` of every session that reaches it.
pub fn multi_if_accuracy(sessions: &[SessionRecord], step: usize) -> Result<StepAccuracy, MetricsError> {
    validate_all(sessions)?;
    let turns: Vec<&TurnRecord> = sessions
        .iter()
        .filter_map(|s| s.turns.get(step.wrapping_sub(1)))
        .collect();
    if step == 0 || turns.is_empty() {
        return Err(MetricsError::NoSuchStep(step));
    }
    let prompts = turns.iter().filter(|t| t.all_satisfied()).count();
    let (hit, total) = turns
        .iter()
        .fold((0, 0), |(h, n), t| (h + t.adherence.score(), n + t.adherence.len()));
    Ok(StepAccuracy {
        step,
        prompt_strict: prompts as f64 / turns.len() as f64,
        inst_strict: hit as f64 / total as f64,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub csr: f64,
    pub isr: f64,
    pub ssr: f64,
    pub per_step: Vec<StepAccuracy>,
}

pub fn report(sessions: &[SessionRecord]) -> Result<MetricReport, MetricsError> {
    validate_all(sessions)?;
    let max_turns = sessions.iter().map(|s| s.turns.len()).max().unwrap_or(0);
    Ok(MetricReport {
        csr: csr(sessions)?,
        isr: isr(sessions)?,
        ssr: ssr(sessions)?,
        per_step: (1..=max_turns)
            .map(|k| multi_if_accuracy(sessions, k))
            .collect::<Result<_, _>>()?,
    })
}
