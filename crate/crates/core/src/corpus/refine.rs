//! Refine-or-terminate orchestration for one conversation turn.
//!
//! A response whose follow rate is below the threshold is handed back to the
//! sampler together with feedback naming the satisfied and failed
//! constraints. The best response seen so far is the one refined. After
//! `max_refines` unsuccessful refinements the session is terminated.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adherence::AdherenceVector;
use crate::constraint::ConstraintSet;
use crate::pairs::ScoredResponse;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("sampler failure: {0}")]
pub struct SamplerError(pub String);

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RefineError {
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error("cannot refine against an empty constraint set")]
    EmptySet,
    #[error("invalid refine config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RefineConfig {
    pub threshold: f64,
    pub max_refines: usize,
}

impl Default for RefineConfig {
    fn default() -> Self {
        Self {
            threshold: 0.8,
            max_refines: 3,
        }
    }
}

/// Evaluation details handed to the sampler when asking for a refinement.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Feedback {
    pub satisfied: Vec<String>,
    pub failed: Vec<String>,
}

impl Feedback {
    pub fn new(cs: &ConstraintSet, adherence: &AdherenceVector) -> Self {
        let (mut satisfied, mut failed) = (Vec::new(), Vec::new());
        for (c, &ok) in cs.iter().zip(&adherence.bits) {
            if ok { &mut satisfied } else { &mut failed }.push(c.description.clone());
        }
        Self { satisfied, failed }
    }

    pub fn render(&self) -> String {
        let list = |items: &[String]| {
            if items.is_empty() {
                "  (none)\n".to_string()
            } else {
                items.iter().map(|d| format!("  - {d}\n")).collect()
            }
        };
        format!(
            "Constraints followed:\n{}Constraints not followed:\n{}",
            list(&self.satisfied),
            list(&self.failed)
        )
    }
}

/// Source of responses for one turn.
pub trait Sampler {
    fn sample(&mut self, instruction: &ConstraintSet, query: &str) -> Result<String, SamplerError>;

    fn refine(
        &mut self,
        instruction: &ConstraintSet,
        query: &str,
        best: &str,
        feedback: &Feedback,
    ) -> Result<String, SamplerError>;
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RefineOutcome {
    Accepted { response: ScoredResponse, refines: usize },
    Terminated { best: ScoredResponse, refines: usize },
}

impl RefineOutcome {
    pub fn response(&self) -> &ScoredResponse {
        match self {
            Self::Accepted { response, .. } => response,
            Self::Terminated { best, .. } => best,
        }
    }

    pub fn refines(&self) -> usize {
        match self {
            Self::Accepted { refines, .. } | Self::Terminated { refines, .. } => *refines,
        }
    }
}

pub fn refine_loop<S: Sampler + ?Sized>(
    instruction: &ConstraintSet,
    query: &str,
    sampler: &mut S,
    cfg: &RefineConfig,
) -> Result<RefineOutcome, RefineError> {
    if !(0.0..=1.0).contains(&cfg.threshold) {
        return Err(RefineError::InvalidConfig(format!("threshold {}", cfg.threshold)));
    }
    if instruction.is_empty() {
        return Err(RefineError::EmptySet);
    }
    let score = |text: String| {
        let r = ScoredResponse::evaluate(instruction, text, "refine");
        let rate = r.adherence.follow_rate().unwrap_or(0.0);
        (r, rate)
    };

    let (mut best, mut best_rate) = score(sampler.sample(instruction, query)?);
    let mut refines = 0;
    while best_rate < cfg.threshold {
        if refines == cfg.max_refines {
            return Ok(RefineOutcome::Terminated { best, refines });
        }
        let feedback = Feedback::new(instruction, &best.adherence);
        let (candidate, rate) = score(sampler.refine(instruction, query, &best.text, &feedback)?);
        refines += 1;
        if rate >= best_rate {
            best = candidate;
            best_rate = rate;
        }
    }
    Ok(RefineOutcome::Accepted {
        response: best,
        refines,
    })
}
