//! Adherence vectors and the comparisons built on them.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constraint::ConstraintSet;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AdherenceError {
    #[error("adherence vectors belong to different constraint sets (`{left}` vs `{right}`)")]
    SetMismatch { left: String, right: String },
    #[error("adherence vector over an empty constraint set")]
    EmptySet,
    #[error("responses do not differ in adherence to any constraint")]
    NoDifference,
}

/// Which constraints of one set a response satisfies.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AdherenceVector {
    pub set_id: String,
    pub bits: Vec<bool>,
}

impl AdherenceVector {
    pub fn new(set_id: impl Into<String>, bits: Vec<bool>) -> Self {
        Self {
            set_id: set_id.into(),
            bits,
        }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    /// Number of satisfied constraints.
    pub fn score(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Satisfied fraction; `None` for an empty vector.
    pub fn follow_rate(&self) -> Option<f64> {
        (!self.bits.is_empty()).then(|| self.score() as f64 / self.bits.len() as f64)
    }

    pub fn is_perfect(&self) -> Result<bool, AdherenceError> {
        if self.bits.is_empty() {
            return Err(AdherenceError::EmptySet);
        }
        Ok(self.bits.iter().all(|&b| b))
    }

    /// Bits rendered as `0`/`1` characters.
    pub fn bit_string(&self) -> String {
        self.bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
    }

    fn comparable(&self, other: &Self) -> Result<(), AdherenceError> {
        if self.set_id != other.set_id || self.bits.len() != other.bits.len() {
            return Err(AdherenceError::SetMismatch {
                left: self.set_id.clone(),
                right: other.set_id.clone(),
            });
        }
        Ok(())
    }
}

pub fn evaluate(cs: &ConstraintSet, response: &str) -> AdherenceVector {
    AdherenceVector {
        set_id: cs.id.clone(),
        bits: cs.iter().map(|c| c.check(response)).collect(),
    }
}

/// Number of constraints on which the two vectors disagree.
pub fn gap(a: &AdherenceVector, b: &AdherenceVector) -> Result<usize, AdherenceError> {
    a.comparable(b)?;
    Ok(a.bits.iter().zip(&b.bits).filter(|(x, y)| x != y).count())
}

/// `a` satisfies everything `b` does, and something more.
pub fn dominates(a: &AdherenceVector, b: &AdherenceVector) -> Result<bool, AdherenceError> {
    a.comparable(b)?;
    let covers = a.bits.iter().zip(&b.bits).all(|(&x, &y)| x || !y);
    Ok(covers && a.bits != b.bits)
}

pub fn is_perfect(a: &AdherenceVector) -> Result<bool, AdherenceError> {
    a.is_perfect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PairClass {
    /// Same total score, each side wins somewhere.
    EqualIncomparable,
    /// Higher total score, yet the lower side still wins somewhere.
    HigherIncomparable,
    /// Top dominates bottom but misses at least one constraint.
    DominantImperfect,
    /// Top is perfect (and therefore dominates).
    DominantPerfect,
}

/// Orders two vectors as `(top, bottom)`: higher score first, ties broken by
/// lexicographic bit order with `true > false`.
pub fn orient<'a>(a: &'a AdherenceVector, b: &'a AdherenceVector) -> (&'a AdherenceVector, &'a AdherenceVector) {
    match a.score().cmp(&b.score()).then_with(|| a.bits.cmp(&b.bits)) {
        Ordering::Less => (b, a),
        _ => (a, b),
    }
}

pub fn classify_pair(a: &AdherenceVector, b: &AdherenceVector) -> Result<PairClass, AdherenceError> {
    if a.is_empty() {
        a.comparable(b)?;
        return Err(AdherenceError::EmptySet);
    }
    if gap(a, b)? == 0 {
        return Err(AdherenceError::NoDifference);
    }
    let (top, bottom) = orient(a, b);
    Ok(if dominates(top, bottom)? {
        if top.is_perfect()? {
            PairClass::DominantPerfect
        } else {
            PairClass::DominantImperfect
        }
    } else if top.score() == bottom.score() {
        PairClass::EqualIncomparable
    } else {
        PairClass::HigherIncomparable
    })
}
