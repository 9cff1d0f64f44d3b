//! Probability mass functions over a token vocabulary.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::DistributionError;

/// Absolute tolerance on `Σ p = 1` for a valid [`TokenDistribution`].
pub const NORMALIZATION_TOLERANCE: f64 = 1e-9;

/// A token in the vocabulary. Tokens are plain strings so that character- and
/// word-level models share one representation.
pub type Token = String;

/// A normalized probability mass function over a non-empty vocabulary.
///
/// Entries are kept in lexicographic token order, which makes iteration (and
/// therefore every downstream computation) deterministic.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TokenDistribution {
    entries: BTreeMap<Token, f64>,
}

impl TokenDistribution {
    /// Builds a distribution, checking that every probability is finite and
    /// non-negative, the vocabulary is non-empty, and the mass sums to one.
    pub fn new<I, T>(entries: I) -> Result<Self, DistributionError>
    where
        I: IntoIterator<Item = (T, f64)>,
        T: Into<Token>,
    {
        let mut map = BTreeMap::new();
        for (token, p) in entries {
            let token = token.into();
            if !p.is_finite() || p < 0.0 {
                return Err(DistributionError::InvalidProbability { token, value: p });
            }
            if map.insert(token.clone(), p).is_some() {
                return Err(DistributionError::DuplicateToken(token));
            }
        }
        if map.is_empty() {
            return Err(DistributionError::EmptyVocabulary);
        }
        let total: f64 = map.values().sum();
        if (total - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(DistributionError::NotNormalized(total));
        }
        Ok(Self { entries: map })
    }

    /// Uniform distribution over the given tokens.
    pub fn uniform<I, T>(tokens: I) -> Result<Self, DistributionError>
    where
        I: IntoIterator<Item = T>,
        T: Into<Token>,
    {
        let tokens: Vec<Token> = tokens.into_iter().map(Into::into).collect();
        let p = 1.0 / tokens.len() as f64;
        Self::new(tokens.into_iter().map(|t| (t, p)))
    }

    pub(crate) fn from_normalized_map(entries: BTreeMap<Token, f64>) -> Self {
        debug_assert!(!entries.is_empty());
        Self { entries }
    }

    /// Probability of `token`; tokens outside the vocabulary have probability zero.
    pub fn prob(&self, token: &str) -> f64 {
        self.entries.get(token).copied().unwrap_or(0.0)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.entries.contains_key(token)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Iterates `(token, probability)` pairs in lexicographic token order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> + '_ {
        self.entries.iter().map(|(t, &p)| (t.as_str(), p))
    }

    /// Total mass, which is one up to [`NORMALIZATION_TOLERANCE`].
    pub fn total(&self) -> f64 {
        self.entries.values().sum()
    }

    /// Entries ranked by descending probability, ties broken by ascending
    /// token. This is the order the nucleus is grown in.
    pub fn ranked(&self) -> Vec<(&str, f64)> {
        let mut ranked: Vec<_> = self.iter().collect();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        ranked
    }
}

/// Non-negative token weights that need not sum to one, such as the raw
/// output of [`apply_penalties`](crate::sampling::apply_penalties).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TokenWeights {
    entries: BTreeMap<Token, f64>,
}

impl TokenWeights {
    pub fn new<I, T>(entries: I) -> Result<Self, DistributionError>
    where
        I: IntoIterator<Item = (T, f64)>,
        T: Into<Token>,
    {
        let mut map = BTreeMap::new();
        for (token, w) in entries {
            let token = token.into();
            if !w.is_finite() || w < 0.0 {
                return Err(DistributionError::InvalidProbability { token, value: w });
            }
            if map.insert(token.clone(), w).is_some() {
                return Err(DistributionError::DuplicateToken(token));
            }
        }
        if map.is_empty() {
            return Err(DistributionError::EmptyVocabulary);
        }
        Ok(Self { entries: map })
    }

    pub(crate) fn from_map(entries: BTreeMap<Token, f64>) -> Self {
        Self { entries }
    }

    pub(crate) fn into_map(self) -> BTreeMap<Token, f64> {
        self.entries
    }

    /// Sets the weight of `token` to zero if it is present.
    pub fn suppress(&mut self, token: &str) {
        if let Some(w) = self.entries.get_mut(token) {
            *w = 0.0;
        }
    }

    pub fn weight(&self, token: &str) -> f64 {
        self.entries.get(token).copied().unwrap_or(0.0)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> + '_ {
        self.entries.iter().map(|(t, &w)| (t.as_str(), w))
    }

    pub fn total(&self) -> f64 {
        self.entries.values().sum()
    }
}

impl From<TokenDistribution> for TokenWeights {
    fn from(dist: TokenDistribution) -> Self {
        Self {
            entries: dist.entries,
        }
    }
}
