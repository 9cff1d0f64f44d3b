//! Sources of next-token distributions and completions.

use serde::{Deserialize, Serialize};

use crate::distribution::{Token, TokenDistribution};
use crate::error::ProviderError;

/// How a provider takes part in sampling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderMode {
    /// Exposes per-token distributions, so sampling runs locally.
    DistributionCapable,
    /// Returns finished text; the remote side owns sampling and only receives
    /// the hyperparameters.
    CompletionOnly,
}

/// A model that can be asked for the distribution over the next token.
///
/// Implementations must be deterministic: the same context always yields the
/// same distribution.
pub trait DistributionProvider: Send + Sync {
    fn tokenize(&self, text: &str) -> Result<Vec<Token>, ProviderError>;

    fn detokenize(&self, tokens: &[Token]) -> String;

    /// Token that ends generation when sampled.
    fn end_of_text(&self) -> &str;

    fn next_distribution(&self, context: &[Token]) -> Result<TokenDistribution, ProviderError>;
}
