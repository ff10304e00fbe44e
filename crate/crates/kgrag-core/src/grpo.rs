//! Group-relative advantage normalization and the clipped surrogate
//! objective, evaluated over supplied per-token log-probabilities.
//!
//! This module is the numerical contract an external trainer checks its own
//! objective against, so everything here is plain double-precision math with
//! no hidden state. Gradient computation and parameter updates are the
//! trainer's side of the loop and deliberately absent.
//!
//! Token aggregation: per-sample mean over tokens, then mean over the group.
//! The double-sum form leaves token normalization open; the per-sample mean
//! keeps long generations from dominating the group term.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GrpoError {
    #[error("a rollout group needs at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("sample {sample}: new/old log-prob lengths differ ({new} vs {old})")]
    LengthMismatch { sample: usize, new: usize, old: usize },
    #[error("sample {sample} has an empty token sequence")]
    EmptyTokenSequence { sample: usize },
    #[error("non-finite value in {context}")]
    NonFinite { context: &'static str },
    #[error("clip epsilon {0} outside (0, 1)")]
    BadEpsilon(f64),
    #[error("rollout record at line {line}: {source}")]
    BadRecord {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("rollout io: {0}")]
    Io(#[from] std::io::Error),
}

/// G sampled generations for one query: their (penalized) rewards plus the
/// per-token log-probabilities under the new and old policies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutGroup {
    pub rewards: Vec<f64>,
    #[serde(rename = "logp_new")]
    pub token_logprobs_new: Vec<Vec<f64>>,
    #[serde(rename = "logp_old")]
    pub token_logprobs_old: Vec<Vec<f64>>,
}

impl RolloutGroup {
    pub fn group_size(&self) -> usize {
        self.rewards.len()
    }

    pub fn validate(&self) -> Result<(), GrpoError> {
        let g = self.rewards.len();
        if g < 2 {
            return Err(GrpoError::TooFewSamples(g));
        }
        if self.token_logprobs_new.len() != g || self.token_logprobs_old.len() != g {
            return Err(GrpoError::LengthMismatch {
                sample: 0,
                new: self.token_logprobs_new.len(),
                old: self.token_logprobs_old.len(),
            });
        }
        if self.rewards.iter().any(|r| !r.is_finite()) {
            return Err(GrpoError::NonFinite { context: "rewards" });
        }
        for (i, (new, old)) in
            self.token_logprobs_new.iter().zip(&self.token_logprobs_old).enumerate()
        {
            if new.len() != old.len() {
                return Err(GrpoError::LengthMismatch {
                    sample: i,
                    new: new.len(),
                    old: old.len(),
                });
            }
            if new.is_empty() {
                return Err(GrpoError::EmptyTokenSequence { sample: i });
            }
            if new.iter().chain(old).any(|v| !v.is_finite()) {
                return Err(GrpoError::NonFinite { context: "token log-probs" });
            }
        }
        Ok(())
    }
}

/// Clipping and degeneracy parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GrpoConfig {
    pub clip_epsilon: f64,
    /// Below this reward standard deviation the group is degenerate and all
    /// advantages are zero; avoids division blow-up when rewards tie, which
    /// is common early in training with a binary reward.
    pub std_floor: f64,
}

impl Default for GrpoConfig {
    fn default() -> Self {
        Self { clip_epsilon: 0.2, std_floor: 1e-6 }
    }
}

impl GrpoConfig {
    pub fn validate(&self) -> Result<(), GrpoError> {
        if !(self.clip_epsilon > 0.0 && self.clip_epsilon < 1.0) {
            return Err(GrpoError::BadEpsilon(self.clip_epsilon));
        }
        Ok(())
    }
}

/// Standardizes rewards against the group's population mean and standard
/// deviation: `(R_i - mean) / std`. Degenerate groups (std below the floor)
/// yield all-zero advantages.
pub fn group_advantages(rewards: &[f64], std_floor: f64) -> Result<Vec<f64>, GrpoError> {
    if rewards.len() < 2 {
        return Err(GrpoError::TooFewSamples(rewards.len()));
    }
    if rewards.iter().any(|r| !r.is_finite()) {
        return Err(GrpoError::NonFinite { context: "rewards" });
    }
    let n = rewards.len() as f64;
    let mean = rewards.iter().sum::<f64>() / n;
    let variance = rewards.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n;
    let std = variance.sqrt();
    if std < std_floor {
        return Ok(vec![0.0; rewards.len()]);
    }
    Ok(rewards.iter().map(|r| (r - mean) / std).collect())
}

/// Elementwise importance ratios `exp(logp_new - logp_old)`.
pub fn token_ratios(logp_new: &[f64], logp_old: &[f64]) -> Result<Vec<f64>, GrpoError> {
    if logp_new.len() != logp_old.len() {
        return Err(GrpoError::LengthMismatch {
            sample: 0,
            new: logp_new.len(),
            old: logp_old.len(),
        });
    }
    if logp_new.iter().chain(logp_old).any(|v| !v.is_finite()) {
        return Err(GrpoError::NonFinite { context: "token log-probs" });
    }
    Ok(logp_new.iter().zip(logp_old).map(|(n, o)| (n - o).exp()).collect())
}

/// The clipped surrogate objective without a KL term:
/// per token `min(r * A, clip(r, 1-eps, 1+eps) * A)`, averaged over each
/// sample's tokens, then over the group.
pub fn grpo_objective(group: &RolloutGroup, config: &GrpoConfig) -> Result<f64, GrpoError> {
    group.validate()?;
    config.validate()?;
    let advantages = group_advantages(&group.rewards, config.std_floor)?;
    let low = 1.0 - config.clip_epsilon;
    let high = 1.0 + config.clip_epsilon;
    let mut group_sum = 0.0;
    for (i, advantage) in advantages.iter().enumerate() {
        let ratios =
            token_ratios(&group.token_logprobs_new[i], &group.token_logprobs_old[i])?;
        let token_sum: f64 = ratios
            .iter()
            .map(|&r| (r * advantage).min(r.clamp(low, high) * advantage))
            .sum();
        group_sum += token_sum / ratios.len() as f64;
    }
    Ok(group_sum / group.group_size() as f64)
}

/// Reads line-delimited rollout groups: one JSON object per line with
/// `rewards`, `logp_new`, and `logp_old`.
pub fn read_rollout_groups<R: BufRead>(reader: R) -> Result<Vec<RolloutGroup>, GrpoError> {
    let mut groups = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let group: RolloutGroup = serde_json::from_str(&line)
            .map_err(|source| GrpoError::BadRecord { line: i + 1, source })?;
        groups.push(group);
    }
    Ok(groups)
}

pub fn write_rollout_groups<W: Write>(
    mut writer: W,
    groups: &[RolloutGroup],
) -> Result<(), GrpoError> {
    for group in groups {
        serde_json::to_writer(&mut writer, group)
            .map_err(|source| GrpoError::BadRecord { line: 0, source })?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}
