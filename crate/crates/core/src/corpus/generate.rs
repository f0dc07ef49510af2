//! Seeded synthetic corpus generator.
//!
//! Each session picks a profile, and each turn picks a subset of the
//! profile's constraints as its instruction. Every sampled response first
//! draws a target adherence pattern from the configured model and is then
//! realized as text that the rule checkers score exactly that way.
//!
//! Randomness is ChaCha8 keyed by the config seed, with one stream per
//! session, so output does not depend on thread count. Bernoulli draws
//! compare a raw 64-bit integer against `p * 2^64`.

use rand::seq::index;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::profile::{self, SystemProfile};
use super::realize::{self, UnsatisfiableTemplate};
use super::refine::{self, Feedback, RefineConfig, RefineError, RefineOutcome, Sampler, SamplerError};
use crate::adherence;
use crate::constraint::{ConstraintError, ConstraintSet};
use crate::metrics::{SessionRecord, TurnRecord};
use crate::pairs::ScoredResponse;

pub const MAX_TURNS: usize = 5;

/// Stream id reserved for drawing synthetic profiles.
const PROFILE_STREAM: u64 = u64::MAX;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GenError {
    #[error("invalid generator config: {0}")]
    InvalidConfig(String),
    #[error("profile `{profile}`: {source}")]
    Unsatisfiable {
        profile: String,
        source: UnsatisfiableTemplate,
    },
    #[error(transparent)]
    Constraint(#[from] ConstraintError),
    #[error(transparent)]
    Refine(#[from] RefineError),
}

/// A mixture component: with probability proportional to `weight`, a
/// response follows each constraint independently with probability `p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixtureComponent {
    pub weight: f64,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum AdherenceModel {
    /// Every constraint is followed independently with probability `p`.
    Bernoulli { p: f64 },
    /// Responses come from one of several quality tiers.
    Mixture { components: Vec<MixtureComponent> },
}

impl Default for AdherenceModel {
    fn default() -> Self {
        Self::Bernoulli { p: 0.8 }
    }
}

fn threshold(p: f64) -> u128 {
    (p * 18_446_744_073_709_551_616.0) as u128
}

/// `true` with probability `p`, decided by integer comparison.
pub fn bernoulli<R: RngCore + ?Sized>(rng: &mut R, p: f64) -> bool {
    u128::from(rng.next_u64()) < threshold(p)
}

impl AdherenceModel {
    fn validate(&self) -> Result<(), GenError> {
        let prob = |p: f64| (0.0..=1.0).contains(&p);
        match self {
            Self::Bernoulli { p } if !prob(*p) => Err(GenError::InvalidConfig(format!("probability {p}"))),
            Self::Mixture { components } => {
                if components.is_empty() {
                    return Err(GenError::InvalidConfig("mixture without components".into()));
                }
                if let Some(c) = components
                    .iter()
                    .find(|c| !prob(c.p) || !(c.weight.is_finite() && c.weight >= 0.0))
                {
                    return Err(GenError::InvalidConfig(format!("mixture component {c:?}")));
                }
                if components.iter().all(|c| c.weight == 0.0) {
                    return Err(GenError::InvalidConfig("mixture weights are all zero".into()));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Draws a target adherence pattern of length `k` and the index of the
    /// component it came from.
    pub fn draw<R: RngCore + ?Sized>(&self, k: usize, rng: &mut R) -> (Vec<bool>, usize) {
        match self {
            Self::Bernoulli { p } => ((0..k).map(|_| bernoulli(rng, *p)).collect(), 0),
            Self::Mixture { components } => {
                let total: f64 = components.iter().map(|c| c.weight).sum();
                let u = u128::from(rng.next_u64());
                let mut acc = 0.0;
                let mut pick = components.len() - 1;
                for (i, c) in components.iter().enumerate() {
                    acc += c.weight;
                    if u < threshold(acc / total) {
                        pick = i;
                        break;
                    }
                }
                let p = components[pick].p;
                ((0..k).map(|_| bernoulli(rng, p)).collect(), pick)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountRange {
    pub min: usize,
    pub max: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ProfileSource {
    /// `count` random profiles whose sizes lie in `constraints`.
    Synthetic { count: usize, constraints: CountRange },
    /// The ten bundled fixture profiles.
    Bundled,
    /// Profiles supplied in the config file.
    Inline { profiles: Vec<SystemProfile> },
}

impl Default for ProfileSource {
    fn default() -> Self {
        Self::Synthetic {
            count: 20,
            constraints: CountRange { min: 6, max: 12 },
        }
    }
}

/// Simulated refinement: each failed constraint of the best response is
/// fixed independently with probability `fix_prob`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RefineSettings {
    #[serde(flatten)]
    pub loop_config: RefineConfig,
    pub fix_prob: f64,
}

impl Default for RefineSettings {
    fn default() -> Self {
        Self {
            loop_config: RefineConfig::default(),
            fix_prob: 0.5,
        }
    }
}

fn default_samples() -> usize {
    5
}

fn default_turn_constraints() -> CountRange {
    CountRange { min: 3, max: 6 }
}

fn default_slack() -> usize {
    6
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub num_sessions: usize,
    pub turns_per_session: usize,
    #[serde(default = "default_samples")]
    pub samples_per_turn: usize,
    #[serde(default)]
    pub adherence: AdherenceModel,
    pub seed: u64,
    #[serde(default = "default_turn_constraints")]
    pub constraints_per_turn: CountRange,
    #[serde(default)]
    pub profiles: ProfileSource,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub refine: Option<RefineSettings>,
    /// Upper bound on extra filler words added for variety.
    #[serde(default = "default_slack")]
    pub slack: usize,
}

impl GenConfig {
    pub fn new(num_sessions: usize, turns_per_session: usize, seed: u64) -> Self {
        Self {
            num_sessions,
            turns_per_session,
            samples_per_turn: default_samples(),
            adherence: AdherenceModel::default(),
            seed,
            constraints_per_turn: default_turn_constraints(),
            profiles: ProfileSource::default(),
            refine: None,
            slack: default_slack(),
        }
    }

    pub fn validate(&self) -> Result<(), GenError> {
        let bad = |msg: String| Err(GenError::InvalidConfig(msg));
        if self.num_sessions == 0 {
            return bad("num_sessions must be positive".into());
        }
        if !(1..=MAX_TURNS).contains(&self.turns_per_session) {
            return bad(format!("turns_per_session must be in 1..={MAX_TURNS}"));
        }
        if self.samples_per_turn == 0 {
            return bad("samples_per_turn must be positive".into());
        }
        let CountRange { min, max } = self.constraints_per_turn;
        if min == 0 || min > max {
            return bad(format!("constraints_per_turn {min}..={max}"));
        }
        self.adherence.validate()?;
        if let ProfileSource::Synthetic { count, constraints } = &self.profiles {
            if *count == 0 {
                return bad("synthetic profile count must be positive".into());
            }
            let top = profile::max_synthetic_constraints();
            if constraints.min > constraints.max || constraints.max > top || constraints.min < max {
                return bad(format!(
                    "synthetic profile sizes {}..={} must lie within {max}..={top}",
                    constraints.min, constraints.max
                ));
            }
        }
        if let Some(r) = &self.refine {
            if !(0.0..=1.0).contains(&r.fix_prob) || !(0.0..=1.0).contains(&r.loop_config.threshold) {
                return bad("refine probabilities must lie in [0, 1]".into());
            }
        }
        Ok(())
    }
}

/// Rejects a profile when some adherence pattern over its constraints
/// cannot be rendered. Every turn instruction is a subset of its profile,
/// so checking the full profile covers every turn.
pub fn check_profile(p: &SystemProfile) -> Result<(), GenError> {
    let cs = &p.constraint_set.constraints;
    if cs.len() > 20 {
        return Err(GenError::InvalidConfig(format!(
            "profile `{}` has more than 20 constraints",
            p.id
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for mask in 0u32..(1 << cs.len()) {
        let pattern: Vec<bool> = (0..cs.len()).map(|i| mask >> i & 1 == 1).collect();
        realize::realize(cs, &pattern, &mut rng, 0).map_err(|source| GenError::Unsatisfiable {
            profile: p.id.clone(),
            source,
        })?;
    }
    Ok(())
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Resolves the profile source of `cfg` into concrete profiles.
pub fn resolve_profiles(cfg: &GenConfig) -> Result<Vec<SystemProfile>, GenError> {
    let profiles = match &cfg.profiles {
        ProfileSource::Synthetic { count, constraints } => {
            let mut rng = stream_rng(cfg.seed, PROFILE_STREAM);
            (0..*count)
                .map(|i| {
                    let size = rng.gen_range(constraints.min..=constraints.max);
                    profile::synthetic_system_profile(&format!("p{i:03}"), size, &mut rng)
                })
                .collect()
        }
        ProfileSource::Bundled => {
            let ps = profile::bundled_profiles();
            ps.iter().try_for_each(check_profile)?;
            ps
        }
        ProfileSource::Inline { profiles } => {
            profiles.iter().try_for_each(check_profile)?;
            profiles.clone()
        }
    };
    if profiles.is_empty() {
        return Err(GenError::InvalidConfig("no profiles".into()));
    }
    if let Some(p) = profiles
        .iter()
        .find(|p| p.constraint_set.len() < cfg.constraints_per_turn.max)
    {
        return Err(GenError::InvalidConfig(format!(
            "profile `{}` has {} constraints, fewer than constraints_per_turn.max = {}",
            p.id,
            p.constraint_set.len(),
            cfg.constraints_per_turn.max
        )));
    }
    Ok(profiles)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub profiles: Vec<SystemProfile>,
    pub sessions: Vec<SessionRecord>,
}

/// Sampler backed by the adherence model and the realizer.
pub struct ModelSampler<'a, R: Rng> {
    pub model: &'a AdherenceModel,
    pub fix_prob: f64,
    pub slack: usize,
    pub rng: &'a mut R,
}

impl<R: Rng> Sampler for ModelSampler<'_, R> {
    fn sample(&mut self, instruction: &ConstraintSet, _query: &str) -> Result<String, SamplerError> {
        let (pattern, _) = self.model.draw(instruction.len(), self.rng);
        realize::realize(&instruction.constraints, &pattern, self.rng, self.slack)
            .map_err(|e| SamplerError(e.to_string()))
    }

    fn refine(
        &mut self,
        instruction: &ConstraintSet,
        _query: &str,
        best: &str,
        _feedback: &Feedback,
    ) -> Result<String, SamplerError> {
        let current = adherence::evaluate(instruction, best);
        let pattern: Vec<bool> = current
            .bits
            .iter()
            .map(|&ok| ok || bernoulli(self.rng, self.fix_prob))
            .collect();
        realize::realize(&instruction.constraints, &pattern, self.rng, self.slack)
            .map_err(|e| SamplerError(e.to_string()))
    }
}

const QUERY_TEMPLATES: &[&str] = &[
    "Could you help me with {}?",
    "What should I know about {}?",
    "Give me some advice on {}.",
    "Can you walk me through {}?",
    "I have a question about {}.",
];

fn session(cfg: &GenConfig, profiles: &[SystemProfile], index: usize) -> Result<SessionRecord, GenError> {
    let mut rng = stream_rng(cfg.seed, index as u64);
    let profile = &profiles[rng.gen_range(0..profiles.len())];
    let session_id = format!("s{index:05}");
    let all = &profile.constraint_set.constraints;
    let mut turns = Vec::with_capacity(cfg.turns_per_session);
    let mut terminated = false;

    for t in 1..=cfg.turns_per_session {
        let k = rng.gen_range(cfg.constraints_per_turn.min..=cfg.constraints_per_turn.max);
        let mut picked = index::sample(&mut rng, all.len(), k).into_vec();
        picked.sort_unstable();
        let cs = ConstraintSet::new(
            format!("{session_id}-t{t}"),
            picked.iter().map(|&i| all[i].clone()).collect(),
        )?;
        let topic = if profile.skills.is_empty() {
            "this".to_string()
        } else {
            profile.skills[rng.gen_range(0..profile.skills.len())].clone()
        };
        let query = QUERY_TEMPLATES[rng.gen_range(0..QUERY_TEMPLATES.len())].replace("{}", &topic);

        let mut samples = Vec::with_capacity(cfg.samples_per_turn);
        for _ in 0..cfg.samples_per_turn {
            let (pattern, component) = cfg.adherence.draw(k, &mut rng);
            let text = realize::realize(&cs.constraints, &pattern, &mut rng, cfg.slack).map_err(|source| {
                GenError::Unsatisfiable {
                    profile: profile.id.clone(),
                    source,
                }
            })?;
            let tag = match cfg.adherence {
                AdherenceModel::Bernoulli { .. } => "gen".to_string(),
                AdherenceModel::Mixture { .. } => format!("gen:c{component}"),
            };
            samples.push(ScoredResponse::evaluate(&cs, text, tag));
        }

        let response = match &cfg.refine {
            None => samples[0].clone(),
            Some(settings) => {
                let mut sampler = ModelSampler {
                    model: &cfg.adherence,
                    fix_prob: settings.fix_prob,
                    slack: cfg.slack,
                    rng: &mut rng,
                };
                match refine::refine_loop(&cs, &query, &mut sampler, &settings.loop_config)? {
                    RefineOutcome::Accepted { response, .. } => response,
                    RefineOutcome::Terminated { best, .. } => {
                        terminated = true;
                        best
                    }
                }
            }
        };

        let mut turn = TurnRecord::new(t, response.adherence.clone(), response.text);
        turn.constraints = Some(cs);
        turn.query = Some(query);
        turn.samples = samples;
        turns.push(turn);
        if terminated {
            break;
        }
    }

    let mut record = SessionRecord::new(session_id, profile.id.clone(), turns);
    record.terminated = terminated;
    Ok(record)
}

/// Generates the whole corpus. Sessions are produced in parallel and
/// returned in index order.
pub fn generate_corpus(cfg: &GenConfig) -> Result<Corpus, GenError> {
    cfg.validate()?;
    let profiles = resolve_profiles(cfg)?;
    let sessions = (0..cfg.num_sessions)
        .into_par_iter()
        .map(|i| session(cfg, &profiles, i))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Corpus { profiles, sessions })
}
