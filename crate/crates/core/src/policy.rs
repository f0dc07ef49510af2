//! Tabular conditional softmax policy and a plain-SGD preference trainer.
//!
//! A context is a conversation turn together with the exact instruction the
//! response was conditioned on, so an RPO pair trained under a reversed
//! instruction lives in a different row than the same responses under the
//! original one. Each row holds one logit per candidate response of its turn.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize};
use thiserror::Error;

use crate::loss::{self, LossConfig, LossError, PairLogits};
use crate::pairs::{self, InstructionSamples, PairError, PreferencePair};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolicyError {
    #[error("unknown context `{0}`")]
    UnknownContext(String),
    #[error("unknown candidate {candidate} in context `{context}`")]
    UnknownCandidate { context: String, candidate: String },
    #[error("response in context `{context}` does not map to a candidate: {text:?}")]
    UnmappedResponse { context: String, text: String },
    #[error("empty dataset")]
    EmptyDataset,
    #[error("invalid policy: {0}")]
    Invalid(String),
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error(transparent)]
    Pair(#[from] PairError),
}

/// Row key for a pair: the turn reference plus the instruction semantics.
pub fn context_key(pair: &PreferencePair) -> String {
    format!("{}|{}", pair.context, pair.instruction.content_key())
}

/// Turn reference part of a context key.
pub fn turn_of(context_key: &str) -> &str {
    context_key.rsplit_once('|').map_or(context_key, |(turn, _)| turn)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ToyPolicy {
    contexts: Vec<String>,
    candidates: Vec<Vec<String>>,
    logits: Vec<Vec<f64>>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl<'de> Deserialize<'de> for ToyPolicy {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            contexts: Vec<String>,
            candidates: Vec<Vec<String>>,
            logits: Vec<Vec<f64>>,
        }
        let raw = Raw::deserialize(deserializer)?;
        ToyPolicy::from_parts(raw.contexts, raw.candidates, raw.logits).map_err(serde::de::Error::custom)
    }
}

fn log_sum_exp(row: &[f64]) -> f64 {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + row.iter().map(|z| (z - max).exp()).sum::<f64>().ln()
}

impl ToyPolicy {
    /// Uniform policy (all logits zero).
    pub fn uniform(contexts: Vec<String>, candidates: Vec<Vec<String>>) -> Result<Self, PolicyError> {
        let logits = candidates.iter().map(|c| vec![0.0; c.len()]).collect();
        Self::from_parts(contexts, candidates, logits)
    }

    pub fn from_parts(
        contexts: Vec<String>,
        candidates: Vec<Vec<String>>,
        logits: Vec<Vec<f64>>,
    ) -> Result<Self, PolicyError> {
        if contexts.len() != candidates.len() || contexts.len() != logits.len() {
            return Err(PolicyError::Invalid(
                "contexts, candidates and logits differ in length".into(),
            ));
        }
        let mut index = HashMap::with_capacity(contexts.len());
        for (i, ctx) in contexts.iter().enumerate() {
            if index.insert(ctx.clone(), i).is_some() {
                return Err(PolicyError::Invalid(format!("duplicate context `{ctx}`")));
            }
            if candidates[i].is_empty() || candidates[i].len() != logits[i].len() {
                return Err(PolicyError::Invalid(format!(
                    "row `{ctx}` has mismatched or empty candidates"
                )));
            }
            if logits[i].iter().any(|z| !z.is_finite()) {
                return Err(PolicyError::Invalid(format!("row `{ctx}` has non-finite logits")));
            }
        }
        Ok(Self {
            contexts,
            candidates,
            logits,
            index,
        })
    }

    /// One row per distinct (turn, instruction) among `pairs`; each row's
    /// candidates are all response texts seen for that turn, sorted.
    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = &'a PreferencePair>) -> Result<Self, PolicyError> {
        let mut turns: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
        let mut keys: BTreeMap<String, &str> = BTreeMap::new();
        for p in pairs {
            let texts = turns.entry(p.context.as_str()).or_default();
            texts.insert(&p.chosen.text);
            texts.insert(&p.rejected.text);
            keys.entry(context_key(p)).or_insert(p.context.as_str());
        }
        if keys.is_empty() {
            return Err(PolicyError::EmptyDataset);
        }
        let candidates = keys
            .values()
            .map(|turn| turns[turn].iter().map(|t| t.to_string()).collect())
            .collect();
        Self::uniform(keys.into_keys().collect(), candidates)
    }

    pub fn contexts(&self) -> &[String] {
        &self.contexts
    }

    pub fn candidates(&self, ctx: usize) -> &[String] {
        &self.candidates[ctx]
    }

    pub fn logits(&self, ctx: usize) -> &[f64] {
        &self.logits[ctx]
    }

    pub fn num_params(&self) -> usize {
        self.logits.iter().map(Vec::len).sum()
    }

    pub fn context_index(&self, ctx: &str) -> Result<usize, PolicyError> {
        self.index
            .get(ctx)
            .copied()
            .ok_or_else(|| PolicyError::UnknownContext(ctx.to_string()))
    }

    pub fn candidate_index(&self, ctx: usize, text: &str) -> Option<usize> {
        self.candidates[ctx].iter().position(|c| c == text)
    }

    /// `logit - logsumexp(row)`.
    pub fn log_prob(&self, ctx: &str, cand: usize) -> Result<f64, PolicyError> {
        let row = self.context_index(ctx)?;
        if cand >= self.candidates[row].len() {
            return Err(PolicyError::UnknownCandidate {
                context: ctx.to_string(),
                candidate: cand.to_string(),
            });
        }
        Ok(self.log_prob_at(row, cand))
    }

    fn log_prob_at(&self, row: usize, cand: usize) -> f64 {
        self.logits[row][cand] - log_sum_exp(&self.logits[row])
    }

    pub fn probabilities(&self, row: usize) -> Vec<f64> {
        let lse = log_sum_exp(&self.logits[row]);
        self.logits[row].iter().map(|z| (z - lse).exp()).collect()
    }

    /// Most probable candidate (first on ties).
    pub fn argmax(&self, row: usize) -> usize {
        let r = &self.logits[row];
        (0..r.len()).fold(0, |best, i| if r[i] > r[best] { i } else { best })
    }

    /// `n` i.i.d. categorical draws from the row of `ctx`.
    pub fn sample<R: Rng + ?Sized>(&self, ctx: &str, rng: &mut R, n: usize) -> Result<Vec<usize>, PolicyError> {
        let row = self.context_index(ctx)?;
        let probs = self.probabilities(row);
        Ok((0..n)
            .map(|_| {
                let u: f64 = rng.gen();
                let mut acc = 0.0;
                for (i, p) in probs.iter().enumerate() {
                    acc += p;
                    if u < acc {
                        return i;
                    }
                }
                probs.len() - 1
            })
            .collect())
    }

    /// Maps each pair's chosen/rejected text to candidate ids.
    pub fn map_pairs(&self, pairs: &[PreferencePair]) -> Result<Vec<MappedPair>, PolicyError> {
        pairs.iter().map(|p| self.map_pair(p)).collect()
    }

    pub fn map_pair(&self, p: &PreferencePair) -> Result<MappedPair, PolicyError> {
        let key = context_key(p);
        let ctx = self.context_index(&key)?;
        let lookup = |text: &str| {
            self.candidate_index(ctx, text)
                .ok_or_else(|| PolicyError::UnmappedResponse {
                    context: key.clone(),
                    text: text.to_string(),
                })
        };
        Ok(MappedPair {
            ctx,
            chosen: lookup(&p.chosen.text)?,
            rejected: lookup(&p.rejected.text)?,
            g: p.g,
        })
    }

    /// Replaces logits with smoothed log-frequencies of demonstration
    /// responses (maximum likelihood on the demonstrations with add-`alpha`
    /// smoothing). `demos` maps a turn reference to its demonstration texts;
    /// rows of turns without demonstrations stay as they are.
    pub fn fit_demonstrations(&mut self, demos: &HashMap<String, Vec<String>>, alpha: f64) -> Result<(), PolicyError> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(PolicyError::InvalidConfig(format!(
                "smoothing must be > 0, got {alpha}"
            )));
        }
        for row in 0..self.contexts.len() {
            let Some(texts) = demos.get(turn_of(&self.contexts[row])) else {
                continue;
            };
            for (cand, logit) in self.candidates[row].iter().zip(self.logits[row].iter_mut()) {
                let count = texts.iter().filter(|t| *t == cand).count();
                *logit = (count as f64 + alpha).ln();
            }
        }
        Ok(())
    }
}

/// A preference pair resolved to a policy row and candidate ids.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MappedPair {
    pub ctx: usize,
    pub chosen: usize,
    pub rejected: usize,
    pub g: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    Dpo,
    #[default]
    Rpo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitMode {
    #[default]
    Uniform,
    /// Start from the smoothed maximum-likelihood fit to demonstrations.
    Sft,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub steps: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub loss: LossKind,
    pub loss_config: LossConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.5,
            steps: 2000,
            batch_size: 16,
            seed: 0,
            loss: LossKind::Rpo,
            loss_config: LossConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), PolicyError> {
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(PolicyError::InvalidConfig(format!(
                "learning rate {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(PolicyError::InvalidConfig("batch size must be positive".into()));
        }
        self.loss_config.validate()?;
        Ok(())
    }

    fn pair_loss(&self, pl: &PairLogits) -> Result<loss::LossOutput, LossError> {
        match self.loss {
            LossKind::Dpo => loss::dpo_loss(pl, &self.loss_config),
            LossKind::Rpo => loss::rpo_loss(pl, &self.loss_config),
        }
    }
}

/// One logged training step, measured on the batch before the update.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub step: usize,
    pub loss: f64,
    /// Mean implicit reward margin of the batch pairs; `None` when the batch
    /// held no pairs.
    pub margin: Option<f64>,
}

pub fn pair_logits(policy: &ToyPolicy, reference: &ToyPolicy, p: &MappedPair) -> PairLogits {
    PairLogits {
        logp_w_policy: policy.log_prob_at(p.ctx, p.chosen),
        logp_w_ref: reference.log_prob_at(p.ctx, p.chosen),
        logp_l_policy: policy.log_prob_at(p.ctx, p.rejected),
        logp_l_ref: reference.log_prob_at(p.ctx, p.rejected),
        g: p.g,
    }
}

/// Objective value, its gradient per logit row, and the per-pair log-probabilities.
type Objective = (f64, Vec<Vec<f64>>, Vec<PairLogits>);

/// Summed pair loss divided by `normalizer`, with its gradient w.r.t. every
/// logit of `policy`.
fn objective(
    policy: &ToyPolicy,
    reference: &ToyPolicy,
    pairs: &[&MappedPair],
    normalizer: f64,
    cfg: &TrainConfig,
) -> Result<Objective, PolicyError> {
    let mut grads: Vec<Vec<f64>> = policy.logits.iter().map(|r| vec![0.0; r.len()]).collect();
    let mut losses = Vec::with_capacity(pairs.len());
    let mut logits = Vec::with_capacity(pairs.len());
    let mut probs_cache: HashMap<usize, Vec<f64>> = HashMap::new();
    for p in pairs {
        let pl = pair_logits(policy, reference, p);
        let out = cfg.pair_loss(&pl)?;
        losses.push(out.loss);
        logits.push(pl);
        let probs = probs_cache.entry(p.ctx).or_insert_with(|| policy.probabilities(p.ctx));
        // d log p(c) / d z_k = [k == c] - p_k
        let (dw, dl) = (
            out.grads.logp_w_policy / normalizer,
            out.grads.logp_l_policy / normalizer,
        );
        let row = &mut grads[p.ctx];
        for (k, pk) in probs.iter().enumerate() {
            row[k] -= (dw + dl) * pk;
        }
        row[p.chosen] += dw;
        row[p.rejected] += dl;
    }
    Ok((loss::pairwise_sum(&losses) / normalizer, grads, logits))
}

/// Cycles through seeded shuffles of `0..n`.
struct Shuffler {
    rng: ChaCha8Rng,
    order: Vec<usize>,
    pos: usize,
}

impl Shuffler {
    fn new(n: usize, seed: u64) -> Self {
        let mut s = Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            order: (0..n).collect(),
            pos: n,
        };
        s.refill();
        s
    }

    fn refill(&mut self) {
        self.order.shuffle(&mut self.rng);
        self.pos = 0;
    }

    fn next(&mut self) -> usize {
        if self.pos == self.order.len() {
            self.refill();
        }
        self.pos += 1;
        self.order[self.pos - 1]
    }
}

/// Plain SGD where each step draws `batch_size` groups and minimizes the
/// summed loss of their pairs divided by the number of groups. Groups may be
/// empty; they still occupy a batch slot.
pub fn train_grouped(
    policy: &ToyPolicy,
    reference: &ToyPolicy,
    groups: &[Vec<MappedPair>],
    cfg: &TrainConfig,
) -> Result<(ToyPolicy, Vec<CurvePoint>), PolicyError> {
    cfg.validate()?;
    if groups.is_empty() {
        return Err(PolicyError::EmptyDataset);
    }
    if policy.contexts != reference.contexts || policy.candidates != reference.candidates {
        return Err(PolicyError::Invalid(
            "policy and reference have different shapes".into(),
        ));
    }
    for p in groups.iter().flatten() {
        let n = policy.candidates.get(p.ctx).map(Vec::len).unwrap_or(0);
        if p.chosen >= n || p.rejected >= n {
            return Err(PolicyError::UnknownCandidate {
                context: policy.contexts.get(p.ctx).cloned().unwrap_or_default(),
                candidate: format!("{}/{}", p.chosen, p.rejected),
            });
        }
    }

    let mut current = policy.clone();
    let mut curve = Vec::with_capacity(cfg.steps);
    let mut shuffler = Shuffler::new(groups.len(), cfg.seed);
    for step in 0..cfg.steps {
        let batch: Vec<&MappedPair> = (0..cfg.batch_size)
            .flat_map(|_| groups[shuffler.next()].iter())
            .collect();
        let (loss_value, grads, logits) = objective(&current, reference, &batch, cfg.batch_size as f64, cfg)?;
        let margin = if logits.is_empty() {
            None
        } else {
            Some(loss::implicit_reward_margin(&logits, cfg.loss_config.beta)?)
        };
        curve.push(CurvePoint {
            step,
            loss: loss_value,
            margin,
        });
        for (row, grad) in current.logits.iter_mut().zip(&grads) {
            for (z, g) in row.iter_mut().zip(grad) {
                *z -= cfg.learning_rate * g;
            }
        }
    }
    Ok((current, curve))
}

/// Plain minibatch SGD on the mean pair loss.
pub fn train(
    policy: &ToyPolicy,
    reference: &ToyPolicy,
    pairs: &[MappedPair],
    cfg: &TrainConfig,
) -> Result<(ToyPolicy, Vec<CurvePoint>), PolicyError> {
    let groups: Vec<Vec<MappedPair>> = pairs.iter().map(|p| vec![*p]).collect();
    train_grouped(policy, reference, &groups, cfg)
}

/// Mean implicit reward margin of `pairs` under `policy` relative to `reference`.
pub fn evaluate_margin(
    policy: &ToyPolicy,
    reference: &ToyPolicy,
    pairs: &[MappedPair],
    beta: f64,
) -> Result<f64, PolicyError> {
    let logits: Vec<_> = pairs.iter().map(|p| pair_logits(policy, reference, p)).collect();
    Ok(loss::implicit_reward_margin(&logits, beta)?)
}

/// Gradient entries smaller than this are compared on an absolute scale.
pub const GRAD_CHECK_FLOOR: f64 = 1e-4;
const GRAD_CHECK_STEP: f64 = 1e-6;
const GRAD_CHECK_ENTRIES: usize = 50;

/// Largest relative error between the analytic gradient of the mean pair
/// loss and central finite differences, over up to 50 seeded random logits.
/// Relative error is `|a - n| / max(|a|, |n|, GRAD_CHECK_FLOOR)`.
pub fn grad_check(
    policy: &ToyPolicy,
    reference: &ToyPolicy,
    pairs: &[MappedPair],
    cfg: &TrainConfig,
) -> Result<f64, PolicyError> {
    cfg.validate()?;
    if pairs.is_empty() {
        return Err(PolicyError::EmptyDataset);
    }
    let refs: Vec<&MappedPair> = pairs.iter().collect();
    let n = pairs.len() as f64;
    let (_, grads, _) = objective(policy, reference, &refs, n, cfg)?;

    let all: Vec<(usize, usize)> = policy
        .logits
        .iter()
        .enumerate()
        .flat_map(|(r, row)| (0..row.len()).map(move |c| (r, c)))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let chosen: Vec<_> = all
        .choose_multiple(&mut rng, GRAD_CHECK_ENTRIES.min(all.len()))
        .copied()
        .collect();

    let mut probe = policy.clone();
    let mut worst: f64 = 0.0;
    for (r, c) in chosen {
        let base = policy.logits[r][c];
        probe.logits[r][c] = base + GRAD_CHECK_STEP;
        let up = objective(&probe, reference, &refs, n, cfg)?.0;
        probe.logits[r][c] = base - GRAD_CHECK_STEP;
        let down = objective(&probe, reference, &refs, n, cfg)?.0;
        probe.logits[r][c] = base;
        let numeric = (up - down) / (2.0 * GRAD_CHECK_STEP);
        let analytic = grads[r][c];
        let scale = analytic.abs().max(numeric.abs()).max(GRAD_CHECK_FLOOR);
        worst = worst.max((analytic - numeric).abs() / scale);
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArmsConfig {
    pub steps: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub loss_config: LossConfig,
    pub heldout_fraction: f64,
    pub seed: u64,
}

impl Default for ArmsConfig {
    fn default() -> Self {
        Self {
            steps: 2000,
            batch_size: 16,
            learning_rate: 0.5,
            loss_config: LossConfig::default(),
            heldout_fraction: 0.2,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmResult {
    pub train_pairs: usize,
    pub heldout_pairs: usize,
    pub heldout_margin: f64,
    pub final_train_margin: Option<f64>,
    pub curve: Vec<CurvePoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmsReport {
    pub train_comparisons: usize,
    pub heldout_comparisons: usize,
    pub rpo: ArmResult,
    pub dpo: ArmResult,
}

/// Trains an RPO arm and a DPO arm on the same raw samples and reports the
/// implicit reward margin each reaches on held-out comparisons.
///
/// The unit of data is a raw comparison: two sampled responses of the same
/// turn that differ in adherence. Comparisons are split once into train and
/// held-out sets. The RPO arm turns each comparison into its two reversed
/// pairs; the DPO arm turns it into one score-oriented pair, or nothing when
/// the total scores tie. Both arms draw the same sequence of comparison
/// batches, and the loss of a batch is normalized by the number of
/// comparisons in it.
pub fn compare_arms(corpus: &[InstructionSamples], cfg: &ArmsConfig) -> Result<ArmsReport, PolicyError> {
    if !(0.0..1.0).contains(&cfg.heldout_fraction) {
        return Err(PolicyError::InvalidConfig(format!(
            "held-out fraction {}",
            cfg.heldout_fraction
        )));
    }
    let mut comparisons = Vec::new();
    for (item_idx, item) in corpus.iter().enumerate() {
        let rs = &item.responses;
        for i in 0..rs.len() {
            for j in (i + 1)..rs.len() {
                if rs[i].adherence.bits != rs[j].adherence.bits {
                    comparisons.push((item_idx, i, j));
                }
            }
        }
    }
    if comparisons.is_empty() {
        return Err(PolicyError::EmptyDataset);
    }
    comparisons.shuffle(&mut ChaCha8Rng::seed_from_u64(cfg.seed));
    let n_heldout = (comparisons.len() as f64 * cfg.heldout_fraction).floor() as usize;
    let (heldout, train) = comparisons.split_at(n_heldout);
    if train.is_empty() {
        return Err(PolicyError::EmptyDataset);
    }

    let derive = |kind: LossKind, set: &[(usize, usize, usize)]| -> Result<Vec<Vec<PreferencePair>>, PolicyError> {
        set.iter()
            .map(|&(k, i, j)| {
                let item = &corpus[k];
                Ok(match kind {
                    LossKind::Rpo => {
                        pairs::rpo_pairs_for_comparison(&item.instruction, &item.context, &item.responses, i, j)?
                    }
                    LossKind::Dpo => {
                        pairs::dpo_pair_for_comparison(&item.instruction, &item.context, &item.responses, i, j)?
                            .into_iter()
                            .collect()
                    }
                })
            })
            .collect()
    };

    let run_arm = |kind: LossKind| -> Result<ArmResult, PolicyError> {
        let train_groups = derive(kind, train)?;
        let heldout_pairs: Vec<PreferencePair> = derive(kind, heldout)?.into_iter().flatten().collect();
        let policy = ToyPolicy::from_pairs(train_groups.iter().flatten().chain(&heldout_pairs))?;
        let mapped_groups = train_groups
            .iter()
            .map(|g| policy.map_pairs(g))
            .collect::<Result<Vec<_>, _>>()?;
        let mapped_heldout = policy.map_pairs(&heldout_pairs)?;
        let train_cfg = TrainConfig {
            learning_rate: cfg.learning_rate,
            steps: cfg.steps,
            batch_size: cfg.batch_size,
            seed: cfg.seed,
            loss: kind,
            loss_config: cfg.loss_config,
        };
        let (trained, curve) = train_grouped(&policy, &policy, &mapped_groups, &train_cfg)?;
        let heldout_margin = if mapped_heldout.is_empty() {
            0.0
        } else {
            evaluate_margin(&trained, &policy, &mapped_heldout, cfg.loss_config.beta)?
        };
        let train_flat: Vec<MappedPair> = mapped_groups.iter().flatten().copied().collect();
        let final_train_margin = if train_flat.is_empty() {
            None
        } else {
            Some(evaluate_margin(&trained, &policy, &train_flat, cfg.loss_config.beta)?)
        };
        Ok(ArmResult {
            train_pairs: train_flat.len(),
            heldout_pairs: mapped_heldout.len(),
            heldout_margin,
            final_train_margin,
            curve,
        })
    };

    Ok(ArmsReport {
        train_comparisons: train.len(),
        heldout_comparisons: heldout.len(),
        rpo: run_arm(LossKind::Rpo)?,
        dpo: run_arm(LossKind::Dpo)?,
    })
}
