//! DPO and RPO objectives on the four log-probabilities of a pair.
//!
//! ```text
//! z      = beta * ((logp_w - logp_w_ref) - (logp_l - logp_l_ref)) - gamma * g
//! loss   = -log sigmoid(z) = softplus(-z)
//! dL/dz  = -sigmoid(-z)
//! ```
//!
//! DPO is the `gamma = 0` case and goes through the same code path.
//! Reference log-probs are frozen, so their gradient slots are always zero.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LossError {
    #[error("non-finite value in `{0}`")]
    NonFinite(&'static str),
    #[error("empty batch")]
    EmptyBatch,
    #[error("invalid loss config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    pub beta: f64,
    pub gamma: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self { beta: 0.1, gamma: 0.05 }
    }
}

impl LossConfig {
    pub fn new(beta: f64, gamma: f64) -> Result<Self, LossError> {
        let cfg = Self { beta, gamma };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), LossError> {
        if !(self.beta.is_finite() && self.beta > 0.0) {
            return Err(LossError::InvalidConfig(format!("beta must be > 0, got {}", self.beta)));
        }
        if !(self.gamma.is_finite() && self.gamma >= 0.0) {
            return Err(LossError::InvalidConfig(format!(
                "gamma must be >= 0, got {}",
                self.gamma
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairLogits {
    pub logp_w_policy: f64,
    pub logp_w_ref: f64,
    pub logp_l_policy: f64,
    pub logp_l_ref: f64,
    pub g: usize,
}

impl PairLogits {
    fn validate(&self) -> Result<(), LossError> {
        let fields = [
            (self.logp_w_policy, "logp_w_policy"),
            (self.logp_w_ref, "logp_w_ref"),
            (self.logp_l_policy, "logp_l_policy"),
            (self.logp_l_ref, "logp_l_ref"),
        ];
        match fields.iter().find(|(v, _)| !v.is_finite()) {
            Some((_, name)) => Err(LossError::NonFinite(name)),
            None => Ok(()),
        }
    }

    /// `(logp_w - logp_w_ref) - (logp_l - logp_l_ref)`.
    pub fn log_ratio_difference(&self) -> f64 {
        (self.logp_w_policy - self.logp_w_ref) - (self.logp_l_policy - self.logp_l_ref)
    }
}

/// Partial derivatives of the loss w.r.t. each log-probability.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossGrads {
    pub logp_w_policy: f64,
    pub logp_w_ref: f64,
    pub logp_l_policy: f64,
    pub logp_l_ref: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossOutput {
    pub loss: f64,
    pub grads: LossGrads,
}

/// Logistic sigmoid without overflow for any finite input.
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `-log sigmoid(z)`, branching on sign so neither side overflows.
pub fn neg_log_sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        (-z).exp().ln_1p()
    } else {
        -z + z.exp().ln_1p()
    }
}

fn margin_loss(pl: &PairLogits, beta: f64, gamma: f64) -> Result<LossOutput, LossError> {
    pl.validate()?;
    let z = beta * pl.log_ratio_difference() - gamma * pl.g as f64;
    let dz = -sigmoid(-z);
    Ok(LossOutput {
        loss: neg_log_sigmoid(z),
        grads: LossGrads {
            logp_w_policy: beta * dz,
            logp_w_ref: 0.0,
            logp_l_policy: -beta * dz,
            logp_l_ref: 0.0,
        },
    })
}

pub fn dpo_loss(pl: &PairLogits, cfg: &LossConfig) -> Result<LossOutput, LossError> {
    cfg.validate()?;
    margin_loss(pl, cfg.beta, 0.0)
}

/// DPO with the adaptive margin `gamma * g` subtracted inside the sigmoid.
pub fn rpo_loss(pl: &PairLogits, cfg: &LossConfig) -> Result<LossOutput, LossError> {
    cfg.validate()?;
    margin_loss(pl, cfg.beta, cfg.gamma)
}

/// Sum with a fixed binary reduction tree, so the result depends only on
/// the order of `values`.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        2 => values[0] + values[1],
        n => {
            let (left, right) = values.split_at(n / 2);
            pairwise_sum(left) + pairwise_sum(right)
        }
    }
}

/// Mean implicit reward difference `beta * (Δ_w - Δ_l)` over a batch.
pub fn implicit_reward_margin(batch: &[PairLogits], beta: f64) -> Result<f64, LossError> {
    if batch.is_empty() {
        return Err(LossError::EmptyBatch);
    }
    let margins = batch
        .iter()
        .map(|pl| pl.validate().map(|_| beta * pl.log_ratio_difference()))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(pairwise_sum(&margins) / batch.len() as f64)
}
