use thiserror::Error;

use crate::params::ParamRange;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DistributionError {
    #[error("vocabulary is empty")]
    EmptyVocabulary,
    #[error("token {token:?} has invalid probability {value}")]
    InvalidProbability { token: String, value: f64 },
    #[error("token {0:?} appears more than once")]
    DuplicateToken(String),
    #[error("probabilities sum to {0}, expected 1")]
    NotNormalized(f64),
}

/// A hyperparameter outside its allowed range.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{field} = {value} is outside the allowed range {range}")]
pub struct ParamError {
    pub field: &'static str,
    pub value: f64,
    pub range: ParamRange,
}

#[derive(Debug, Error)]
pub enum SamplingError {
    /// Every weight was zero after penalties, so no distribution can be formed.
    #[error("all token weights are zero; the penalty configuration leaves nothing to sample")]
    AllZeroWeights,
    #[error("cannot sample from an empty nucleus")]
    EmptyPool,
    #[error("max_tokens must be at least 1")]
    ZeroMaxTokens,
    #[error(transparent)]
    Provider(#[from] ProviderError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProviderError {
    #[error("corpus contains no tokens")]
    EmptyCorpus,
    #[error("n-gram order must be at least 2, got {0}")]
    InvalidOrder(usize),
    #[error("prompt produced no tokens")]
    EmptyPrompt,
    #[error(transparent)]
    Distribution(#[from] DistributionError),
}
