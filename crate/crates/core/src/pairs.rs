//! Preference-pair construction (RPO, DPO, KTO), gap buckets and the
//! sample-efficiency analysis.
//!
//! RPO pairs are built by reversing, for each chosen response, exactly the
//! constraints it failed. Under the reversed instruction the chosen response
//! is perfect and dominates the rejected one, and the gap is unchanged
//! because both responses flip at the same positions. The adherence of both
//! sides is recomputed by running the checkers on the reversed instruction;
//! the bit flip is only used to cross-check that result.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adherence::{self, AdherenceError, AdherenceVector};
use crate::constraint::{ConstraintError, ConstraintSet};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PairError {
    #[error(transparent)]
    Adherence(#[from] AdherenceError),
    #[error(transparent)]
    Constraint(#[from] ConstraintError),
    #[error("no responses supplied for `{0}`")]
    NoResponses(String),
    #[error("reversal cross-check failed for `{context}`: {detail}")]
    ReversalInconsistent { context: String, detail: String },
    #[error("empty corpus")]
    EmptyCorpus,
}

/// A sampled response with its adherence under the instruction it answers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoredResponse {
    pub text: String,
    pub adherence: AdherenceVector,
    #[serde(default)]
    pub source_tag: String,
}

impl ScoredResponse {
    /// Scores `text` by running every checker of `cs`.
    pub fn evaluate(cs: &ConstraintSet, text: impl Into<String>, source_tag: impl Into<String>) -> Self {
        let text = text.into();
        let adherence = adherence::evaluate(cs, &text);
        Self {
            text,
            adherence,
            source_tag: source_tag.into(),
        }
    }

    pub fn score(&self) -> usize {
        self.adherence.score()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodTag {
    Rpo,
    Dpo,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PreferencePair {
    /// Instruction the pair is trained under; reversed for RPO pairs.
    pub instruction: ConstraintSet,
    /// Conversation-history reference.
    pub context: String,
    pub chosen: ScoredResponse,
    pub rejected: ScoredResponse,
    /// Hamming gap for RPO pairs (equal to the score difference under the
    /// reversed instruction); total-score difference for DPO pairs.
    pub g: usize,
    pub method: MethodTag,
    /// Raw comparison the pair was derived from, `"{context}#{i}-{j}"` with
    /// `i < j` indexing the sampled responses.
    pub source: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KtoExample {
    /// Instruction pruned to the constraints the label is certain about.
    pub instruction: ConstraintSet,
    pub context: String,
    pub response: ScoredResponse,
    pub label: bool,
}

/// A KTO example that was not emitted because pruning left no constraints.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SkippedDegenerate {
    pub context: String,
    pub label: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KtoOutcome {
    pub examples: Vec<KtoExample>,
    pub skipped: Vec<SkippedDegenerate>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DpoMode {
    /// Highest-scoring response against the lowest-scoring one.
    #[default]
    Extremes,
    /// Every ordered pair with a positive score difference.
    All,
}

fn source_id(context: &str, i: usize, j: usize) -> String {
    let (lo, hi) = if i < j { (i, j) } else { (j, i) };
    format!("{context}#{lo}-{hi}")
}

fn check_aligned(cs: &ConstraintSet, a: &AdherenceVector) -> Result<(), PairError> {
    if a.set_id != cs.id || a.len() != cs.len() {
        return Err(AdherenceError::SetMismatch {
            left: cs.id.clone(),
            right: a.set_id.clone(),
        }
        .into());
    }
    Ok(())
}

/// Replaces every constraint the response failed with its negation.
pub fn reverse_instruction(cs: &ConstraintSet, a: &AdherenceVector) -> Result<ConstraintSet, PairError> {
    check_aligned(cs, a)?;
    let constraints = cs
        .iter()
        .zip(&a.bits)
        .map(|(c, &ok)| if ok { c.clone() } else { c.reverse() })
        .collect();
    Ok(ConstraintSet::new(
        format!("{}/rev{}", cs.id, a.bit_string()),
        constraints,
    )?)
}

/// Builds both directions of every pair of responses that differ in
/// adherence to at least one constraint.
pub fn build_rpo_pairs(
    instruction: &ConstraintSet,
    context: &str,
    responses: &[ScoredResponse],
) -> Result<Vec<PreferencePair>, PairError> {
    for r in responses {
        check_aligned(instruction, &r.adherence)?;
    }
    let mut out = Vec::new();
    for i in 0..responses.len() {
        for j in (i + 1)..responses.len() {
            out.extend(rpo_pairs_for_comparison(instruction, context, responses, i, j)?);
        }
    }
    Ok(out)
}

/// The two RPO pairs derived from comparing responses `i` and `j`: first
/// with `i` chosen, then with `j` chosen. Empty when they do not differ.
pub fn rpo_pairs_for_comparison(
    instruction: &ConstraintSet,
    context: &str,
    responses: &[ScoredResponse],
    i: usize,
    j: usize,
) -> Result<Vec<PreferencePair>, PairError> {
    let (a, b) = (&responses[i], &responses[j]);
    check_aligned(instruction, &a.adherence)?;
    check_aligned(instruction, &b.adherence)?;
    let original_gap = adherence::gap(&a.adherence, &b.adherence)?;
    if original_gap == 0 {
        return Ok(Vec::new());
    }
    let source = source_id(context, i, j);
    Ok(vec![
        reversed_pair(instruction, context, a, b, original_gap, source.clone())?,
        reversed_pair(instruction, context, b, a, original_gap, source)?,
    ])
}

/// The DPO pair from comparing responses `i` and `j`, oriented by total
/// score. `None` when the scores tie.
pub fn dpo_pair_for_comparison(
    instruction: &ConstraintSet,
    context: &str,
    responses: &[ScoredResponse],
    i: usize,
    j: usize,
) -> Result<Option<PreferencePair>, PairError> {
    check_aligned(instruction, &responses[i].adherence)?;
    check_aligned(instruction, &responses[j].adherence)?;
    let (w, l) = match responses[i].score().cmp(&responses[j].score()) {
        std::cmp::Ordering::Greater => (i, j),
        std::cmp::Ordering::Less => (j, i),
        std::cmp::Ordering::Equal => return Ok(None),
    };
    Ok(Some(dpo_pair(instruction, context, responses, w, l)))
}

fn dpo_pair(
    instruction: &ConstraintSet,
    context: &str,
    responses: &[ScoredResponse],
    w: usize,
    l: usize,
) -> PreferencePair {
    PreferencePair {
        instruction: instruction.clone(),
        context: context.to_string(),
        chosen: responses[w].clone(),
        rejected: responses[l].clone(),
        g: responses[w].score() - responses[l].score(),
        method: MethodTag::Dpo,
        source: source_id(context, w, l),
    }
}

fn reversed_pair(
    instruction: &ConstraintSet,
    context: &str,
    chosen: &ScoredResponse,
    rejected: &ScoredResponse,
    original_gap: usize,
    source: String,
) -> Result<PreferencePair, PairError> {
    let reversed = reverse_instruction(instruction, &chosen.adherence)?;
    let chosen_rev = ScoredResponse::evaluate(&reversed, chosen.text.clone(), chosen.source_tag.clone());
    let rejected_rev = ScoredResponse::evaluate(&reversed, rejected.text.clone(), rejected.source_tag.clone());

    let inconsistent = |detail: String| PairError::ReversalInconsistent {
        context: context.to_string(),
        detail,
    };
    let flipped: Vec<bool> = chosen
        .adherence
        .bits
        .iter()
        .zip(&rejected.adherence.bits)
        .map(|(&c, &r)| if c { r } else { !r })
        .collect();
    if !chosen_rev.adherence.is_perfect()? {
        return Err(inconsistent(format!(
            "chosen scores {} under its reversed instruction",
            chosen_rev.adherence.bit_string()
        )));
    }
    if rejected_rev.adherence.bits != flipped {
        return Err(inconsistent(format!(
            "rejected re-check {} disagrees with flipped bits",
            rejected_rev.adherence.bit_string()
        )));
    }
    let g = adherence::gap(&chosen_rev.adherence, &rejected_rev.adherence)?;
    if g != original_gap
        || g != chosen_rev.score() - rejected_rev.score()
        || !adherence::dominates(&chosen_rev.adherence, &rejected_rev.adherence)?
    {
        return Err(inconsistent(format!("gap {g} after reversal, {original_gap} before")));
    }
    Ok(PreferencePair {
        instruction: reversed,
        context: context.to_string(),
        chosen: chosen_rev,
        rejected: rejected_rev,
        g,
        method: MethodTag::Rpo,
        source,
    })
}

fn first_extremes(responses: &[ScoredResponse]) -> Option<(usize, usize)> {
    let mut best = 0;
    let mut worst = 0;
    for (i, r) in responses.iter().enumerate().skip(1) {
        if r.score() > responses[best].score() {
            best = i;
        }
        if r.score() < responses[worst].score() {
            worst = i;
        }
    }
    (!responses.is_empty()).then_some((best, worst))
}

/// Total-score baseline pairs under the original instruction.
pub fn build_dpo_pairs(
    instruction: &ConstraintSet,
    context: &str,
    responses: &[ScoredResponse],
    mode: DpoMode,
) -> Result<Vec<PreferencePair>, PairError> {
    for r in responses {
        check_aligned(instruction, &r.adherence)?;
    }
    let pair = |w: usize, l: usize| dpo_pair(instruction, context, responses, w, l);
    Ok(match mode {
        DpoMode::Extremes => match first_extremes(responses) {
            Some((w, l)) if responses[w].score() > responses[l].score() => vec![pair(w, l)],
            _ => Vec::new(),
        },
        DpoMode::All => {
            let mut out = Vec::new();
            for w in 0..responses.len() {
                for l in 0..responses.len() {
                    if responses[w].score() > responses[l].score() {
                        out.push(pair(w, l));
                    }
                }
            }
            out
        }
    })
}

/// Unpaired binary examples: the best response labelled `true` with its
/// failed constraints removed, the worst labelled `false` with its satisfied
/// constraints removed. Ties go to the first occurrence.
pub fn build_kto_examples(
    instruction: &ConstraintSet,
    context: &str,
    responses: &[ScoredResponse],
) -> Result<KtoOutcome, PairError> {
    for r in responses {
        check_aligned(instruction, &r.adherence)?;
    }
    let (best, worst) = first_extremes(responses).ok_or_else(|| PairError::NoResponses(context.to_string()))?;
    let mut outcome = KtoOutcome::default();
    for (idx, label) in [(best, true), (worst, false)] {
        let response = &responses[idx];
        let kept: Vec<_> = instruction
            .iter()
            .zip(&response.adherence.bits)
            .filter(|(_, &ok)| ok == label)
            .map(|(c, _)| c.clone())
            .collect();
        if kept.is_empty() {
            log::warn!("{context}: skipping degenerate KTO example (label {label}, nothing left after pruning)");
            outcome.skipped.push(SkippedDegenerate {
                context: context.to_string(),
                label,
            });
            continue;
        }
        let tag = if label { "kto+" } else { "kto-" };
        let pruned = ConstraintSet::new(format!("{}/{tag}", instruction.id), kept)?;
        let rescored = ScoredResponse::evaluate(&pruned, response.text.clone(), response.source_tag.clone());
        let consistent = rescored.adherence.bits.iter().all(|&b| b == label);
        if !consistent {
            return Err(PairError::ReversalInconsistent {
                context: context.to_string(),
                detail: format!("KTO re-check gave {}", rescored.adherence.bit_string()),
            });
        }
        outcome.examples.push(KtoExample {
            instruction: pruned,
            context: context.to_string(),
            response: rescored,
            label,
        });
    }
    Ok(outcome)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum GapBucket {
    Easy,
    Medium,
    Hard,
}

impl GapBucket {
    /// `g >= 3` is easy, `2` medium, `1` hard; `0` is not a valid pair.
    pub fn from_gap(g: usize) -> Option<GapBucket> {
        match g {
            0 => None,
            1 => Some(GapBucket::Hard),
            2 => Some(GapBucket::Medium),
            _ => Some(GapBucket::Easy),
        }
    }
}

pub fn gap_bucket(p: &PreferencePair) -> Option<GapBucket> {
    GapBucket::from_gap(p.g)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GapHistogram {
    pub easy: usize,
    pub medium: usize,
    pub hard: usize,
    /// Pairs with `g == 0` (never produced by the factories).
    pub invalid: usize,
}

pub fn gap_histogram<'a>(pairs: impl IntoIterator<Item = &'a PreferencePair>) -> GapHistogram {
    let mut h = GapHistogram::default();
    for p in pairs {
        match gap_bucket(p) {
            Some(GapBucket::Easy) => h.easy += 1,
            Some(GapBucket::Medium) => h.medium += 1,
            Some(GapBucket::Hard) => h.hard += 1,
            None => h.invalid += 1,
        }
    }
    h
}

/// Sampled responses for one instruction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InstructionSamples {
    pub instruction: ConstraintSet,
    pub context: String,
    pub responses: Vec<ScoredResponse>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    /// Pairs drawn from the raw samples under the original instruction.
    Direct,
    /// RPO reversal.
    Reverse,
}

/// Constraint count at which the perfect rate is split.
pub const MANY_CONSTRAINTS: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyReport {
    pub strategy: Strategy,
    pub instructions: usize,
    pub valid: f64,
    pub dominated: f64,
    pub perfect: f64,
    /// Perfect rate over instructions with fewer than five constraints.
    pub perfect_lt5: Option<f64>,
    /// Perfect rate over instructions with five or more constraints.
    pub perfect_ge5: Option<f64>,
    pub instructions_lt5: usize,
    pub instructions_ge5: usize,
}

#[derive(Debug, Clone, Copy, Default)]
struct Verdict {
    valid: bool,
    dominated: bool,
    perfect: bool,
}

fn direct_verdict(item: &InstructionSamples) -> Result<Verdict, PairError> {
    let rs = &item.responses;
    for r in rs {
        check_aligned(&item.instruction, &r.adherence)?;
    }
    let mut v = Verdict::default();
    for (i, a) in rs.iter().enumerate() {
        for b in rs.iter().skip(i + 1) {
            let (a, b) = (&a.adherence, &b.adherence);
            v.valid |= a.score() != b.score();
            v.dominated |= adherence::dominates(a, b)? || adherence::dominates(b, a)?;
            if adherence::gap(a, b)? > 0 {
                v.perfect |= a.is_perfect()? || b.is_perfect()?;
            }
        }
    }
    Ok(v)
}

fn reverse_verdict(item: &InstructionSamples) -> Result<Verdict, PairError> {
    let pairs = build_rpo_pairs(&item.instruction, &item.context, &item.responses)?;
    if pairs.is_empty() {
        return Ok(Verdict::default());
    }
    let mut v = Verdict {
        valid: true,
        dominated: true,
        perfect: true,
    };
    for p in &pairs {
        let (c, r) = (&p.chosen.adherence, &p.rejected.adherence);
        v.valid &= c.score() > r.score();
        v.dominated &= adherence::dominates(c, r)?;
        v.perfect &= c.is_perfect()?;
    }
    Ok(v)
}

/// Fraction of instructions for which the strategy yields a Valid (score
/// gap), Dominated, and Perfect (chosen satisfies everything) pair. For the
/// direct strategy this asks whether any such pair exists among the raw
/// samples; for the reverse strategy every constructed pair must qualify.
pub fn sample_efficiency_report(
    corpus: &[InstructionSamples],
    strategy: Strategy,
) -> Result<EfficiencyReport, PairError> {
    if corpus.is_empty() {
        return Err(PairError::EmptyCorpus);
    }
    let verdicts: Vec<(usize, Verdict)> = corpus
        .par_iter()
        .map(|item| {
            let v = match strategy {
                Strategy::Direct => direct_verdict(item)?,
                Strategy::Reverse => reverse_verdict(item)?,
            };
            Ok((item.instruction.len(), v))
        })
        .collect::<Result<_, PairError>>()?;

    let rate = |hits: usize, n: usize| (n > 0).then(|| hits as f64 / n as f64);
    let count = |f: &dyn Fn(&(usize, Verdict)) -> bool| verdicts.iter().filter(|x| f(x)).count();
    let n = verdicts.len();
    let n_lt5 = count(&|(k, _)| *k < MANY_CONSTRAINTS);
    let n_ge5 = n - n_lt5;
    Ok(EfficiencyReport {
        strategy,
        instructions: n,
        valid: count(&|(_, v)| v.valid) as f64 / n as f64,
        dominated: count(&|(_, v)| v.dominated) as f64 / n as f64,
        perfect: count(&|(_, v)| v.perfect) as f64 / n as f64,
        perfect_lt5: rate(count(&|(k, v)| *k < MANY_CONSTRAINTS && v.perfect), n_lt5),
        perfect_ge5: rate(count(&|(k, v)| *k >= MANY_CONSTRAINTS && v.perfect), n_ge5),
        instructions_lt5: n_lt5,
        instructions_ge5: n_ge5,
    })
}
