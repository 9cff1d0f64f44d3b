//! Penalty reweighting, nucleus filtering and the token-by-token generation
//! loop that composes them.
//!
//! One generation step runs, in order:
//!
//! 1. ask the provider for the next-token distribution given the full context,
//! 2. [`apply_penalties`] using counts of *generated* tokens only,
//! 3. [`renormalize`] back to a probability mass function,
//! 4. [`nucleus_filter`] with `top_p`,
//! 5. [`sample_token`] from the nucleus with a seeded PRNG.
//!
//! Every function here is pure apart from the explicitly passed RNG.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::Serialize;

use crate::distribution::{Token, TokenDistribution, TokenWeights};
use crate::error::SamplingError;
use crate::history::TokenHistory;
use crate::params::SamplingParams;
use crate::provider::DistributionProvider;

/// PRNG used for token draws.
pub type SamplerRng = ChaCha20Rng;

/// Name of the [`SamplerRng`] algorithm, recorded alongside generated output.
pub const RNG_ALGORITHM: &str = "chacha20";

/// Slack allowed when comparing cumulative nucleus mass against `top_p`, so
/// that floating-point rounding in the running sum cannot push the nucleus
/// one token past the mathematically minimal set.
pub const NUCLEUS_MASS_TOLERANCE: f64 = 1e-12;

pub fn seeded_rng(seed: u64) -> SamplerRng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// Divides each probability by `(1 + α·f(t)) · (1 + β·[f(t) > 0])`.
///
/// `f(t)` is the count of `t` in `history`. The result is deliberately left
/// unnormalized; pass it through [`renormalize`] before sampling. With
/// `α = β = 0` every weight equals its input probability exactly.
pub fn apply_penalties(
    dist: &TokenDistribution,
    history: &TokenHistory,
    frequency_penalty: f64,
    presence_penalty: f64,
) -> TokenWeights {
    let weights = dist
        .iter()
        .map(|(token, p)| {
            let f = history.count(token) as f64;
            let seen = if f > 0.0 { 1.0 } else { 0.0 };
            let weight = p / ((1.0 + frequency_penalty * f) * (1.0 + presence_penalty * seen));
            (token.to_owned(), weight)
        })
        .collect::<BTreeMap<_, _>>();
    TokenWeights::from_map(weights)
}

/// Scales weights so they sum to one.
pub fn renormalize(weights: TokenWeights) -> Result<TokenDistribution, SamplingError> {
    let total = weights.total();
    if total.is_nan() || total <= 0.0 {
        return Err(SamplingError::AllZeroWeights);
    }
    let entries = weights
        .into_map()
        .into_iter()
        .map(|(t, w)| (t, w / total))
        .collect();
    Ok(TokenDistribution::from_normalized_map(entries))
}

/// The smallest highest-probability token set whose mass reaches `top_p`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NucleusSet {
    tokens: Vec<Token>,
    cumulative_mass: f64,
}

impl NucleusSet {
    /// Assembles a pool directly. Normally pools come from [`nucleus_filter`].
    pub fn from_parts(tokens: Vec<Token>, cumulative_mass: f64) -> Self {
        Self {
            tokens,
            cumulative_mass,
        }
    }

    /// Members in the order they were admitted: descending probability, then
    /// ascending token.
    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    pub fn cumulative_mass(&self) -> f64 {
        self.cumulative_mass
    }

    pub fn contains(&self, token: &str) -> bool {
        self.tokens.iter().any(|t| t == token)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Greedily admits tokens by descending probability (ties by ascending token)
/// until the admitted mass is at least `top_p`.
///
/// Zero-probability tokens are never admitted; if rounding keeps the running
/// sum just short of `top_p = 1`, the whole support is returned.
pub fn nucleus_filter(dist: &TokenDistribution, top_p: f64) -> NucleusSet {
    let mut tokens = Vec::new();
    let mut mass = 0.0;
    for (token, p) in dist.ranked() {
        if p <= 0.0 {
            break;
        }
        tokens.push(token.to_owned());
        mass += p;
        if mass + NUCLEUS_MASS_TOLERANCE >= top_p {
            break;
        }
    }
    NucleusSet::from_parts(tokens, mass)
}

/// Draws one token from `pool` with probability proportional to its mass in
/// `dist`.
pub fn sample_token<R: Rng + ?Sized>(
    pool: &NucleusSet,
    dist: &TokenDistribution,
    rng: &mut R,
) -> Result<Token, SamplingError> {
    let (last, _) = pool.tokens.split_last().ok_or(SamplingError::EmptyPool)?;
    let mass: f64 = pool.tokens.iter().map(|t| dist.prob(t)).sum();
    let mut target = rng.random::<f64>() * mass;
    for token in &pool.tokens {
        let p = dist.prob(token);
        if target < p {
            return Ok(token.clone());
        }
        target -= p;
    }
    // Only reachable through rounding in the subtraction chain.
    Ok(last.clone())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    MaxTokens,
    EndOfText,
}

/// Output of [`generate_sequence`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Generation {
    /// Generated tokens, excluding the prompt and any end-of-text marker.
    pub tokens: Vec<Token>,
    pub text: String,
    pub stop_reason: StopReason,
    pub rng_algorithm: &'static str,
}

/// Length bounds for one generation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GenerationLimits {
    /// Upper bound on generated tokens; must be at least 1.
    pub max_tokens: usize,
    /// The end-of-text token gets zero weight until this many tokens have
    /// been generated. Zero means generation may stop at any step.
    pub min_tokens: usize,
}

impl GenerationLimits {
    pub fn up_to(max_tokens: usize) -> Self {
        Self {
            max_tokens,
            min_tokens: 0,
        }
    }

    /// Forces exactly `tokens` tokens unless the provider leaves nothing else
    /// to sample.
    pub fn exactly(tokens: usize) -> Self {
        Self {
            max_tokens: tokens,
            min_tokens: tokens,
        }
    }
}

/// Runs the sampling loop for at most `max_tokens` steps, stopping early if
/// the provider's end-of-text token is sampled.
///
/// Penalty counts cover generated tokens only; prompt tokens form the model
/// context but never contribute to `f(t)`. The result is a pure function of
/// the provider, prompt, parameters (seed included) and `max_tokens`.
pub fn generate_sequence<P: DistributionProvider + ?Sized>(
    provider: &P,
    prompt: &str,
    params: &SamplingParams,
    max_tokens: usize,
) -> Result<Generation, SamplingError> {
    generate_with_limits(provider, prompt, params, GenerationLimits::up_to(max_tokens))
}

/// [`generate_sequence`] with an additional lower bound on output length.
pub fn generate_with_limits<P: DistributionProvider + ?Sized>(
    provider: &P,
    prompt: &str,
    params: &SamplingParams,
    limits: GenerationLimits,
) -> Result<Generation, SamplingError> {
    if limits.max_tokens == 0 {
        return Err(SamplingError::ZeroMaxTokens);
    }
    let mut context = provider.tokenize(prompt)?;
    let mut history = TokenHistory::new();
    let mut generated = Vec::with_capacity(limits.max_tokens);
    let mut rng = seeded_rng(params.seed());
    let mut stop_reason = StopReason::MaxTokens;
    let eot = provider.end_of_text();

    for _ in 0..limits.max_tokens {
        let dist = provider.next_distribution(&context)?;
        let mut weights = apply_penalties(
            &dist,
            &history,
            params.frequency_penalty(),
            params.presence_penalty(),
        );
        if generated.len() < limits.min_tokens {
            weights.suppress(eot);
        }
        let dist = renormalize(weights)?;
        let pool = nucleus_filter(&dist, params.top_p());
        let token = sample_token(&pool, &dist, &mut rng)?;
        if token == eot {
            stop_reason = StopReason::EndOfText;
            break;
        }
        history.record(&token);
        context.push(token.clone());
        generated.push(token);
    }

    Ok(Generation {
        text: provider.detokenize(&generated),
        tokens: generated,
        stop_reason,
        rng_algorithm: RNG_ALGORITHM,
    })
}

/// Distinct tokens divided by total tokens; zero for an empty sequence.
pub fn type_token_ratio<S: AsRef<str>>(tokens: &[S]) -> f64 {
    if tokens.is_empty() {
        return 0.0;
    }
    let distinct: std::collections::BTreeSet<&str> = tokens.iter().map(AsRef::as_ref).collect();
    distinct.len() as f64 / tokens.len() as f64
}
