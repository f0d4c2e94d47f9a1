use serde::{Deserialize, Serialize};

use crate::tokenize::TokenizerConfig;

/// Tuning knobs for the similarity-based matcher.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SftmParams {
    /// Token multiplicity cutoff exponent: tokens held by more than
    /// `ceil(|T1|^alpha)` nodes are discarded.
    pub alpha: f64,
    /// Number of ancestor levels folded into the propagated similarity.
    pub p: usize,
    /// Propagation weights `w_0..=w_p`.
    pub weights: Vec<f64>,
    /// Inverse temperature of the normalized objective.
    pub beta: f64,
    /// Per-edge selection probability while completing a suggested matching.
    pub gamma: f64,
    pub iterations: usize,
    /// Cost of leaving a node unmatched.
    pub no_match_cost: f64,
    pub seed: u64,
    pub tokenizer: TokenizerConfig,
}

impl Default for SftmParams {
    fn default() -> Self {
        SftmParams {
            alpha: 0.5,
            p: 2,
            weights: vec![1.0, 0.5, 0.25],
            beta: 4.0,
            gamma: 0.9,
            iterations: 100,
            no_match_cost: 1.0,
            seed: 0,
            tokenizer: TokenizerConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ParamError {
    #[error("alpha must lie in (0, 1], got {0}")]
    Alpha(f64),
    #[error("expected p + 1 = {expected} weights, got {got}")]
    WeightCount { expected: usize, got: usize },
    #[error("weights must be finite and non-negative with w0 > 0")]
    Weights,
    #[error("beta must be positive, got {0}")]
    Beta(f64),
    #[error("gamma must lie in [0, 1], got {0}")]
    Gamma(f64),
    #[error("iterations must be at least 1")]
    Iterations,
    #[error("no-match cost must be positive, got {0}")]
    NoMatchCost(f64),
}

impl SftmParams {
    pub fn validate(&self) -> Result<(), ParamError> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(ParamError::Alpha(self.alpha));
        }
        if self.weights.len() != self.p + 1 {
            return Err(ParamError::WeightCount {
                expected: self.p + 1,
                got: self.weights.len(),
            });
        }
        if self.weights.iter().any(|w| !w.is_finite() || *w < 0.0) || self.weights[0] <= 0.0 {
            return Err(ParamError::Weights);
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(ParamError::Beta(self.beta));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(ParamError::Gamma(self.gamma));
        }
        if self.iterations == 0 {
            return Err(ParamError::Iterations);
        }
        if !(self.no_match_cost > 0.0 && self.no_match_cost.is_finite()) {
            return Err(ParamError::NoMatchCost(self.no_match_cost));
        }
        Ok(())
    }

    /// Replaces `weights` (and `p`) in one go.
    pub fn with_weights(mut self, weights: Vec<f64>) -> Self {
        self.p = weights.len().saturating_sub(1);
        self.weights = weights;
        self
    }
}
