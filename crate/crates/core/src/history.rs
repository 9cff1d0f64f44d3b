use std::collections::BTreeMap;

use crate::distribution::Token;

/// Occurrence counts of tokens emitted so far.
///
/// A token that was never recorded has count zero and is not stored.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TokenHistory {
    counts: BTreeMap<Token, u64>,
}

impl TokenHistory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, token: &str) {
        *self.counts.entry(token.to_owned()).or_insert(0) += 1;
    }

    pub fn count(&self, token: &str) -> u64 {
        self.counts.get(token).copied().unwrap_or(0)
    }

    pub fn has_seen(&self, token: &str) -> bool {
        self.counts.contains_key(token)
    }

    /// Number of distinct tokens recorded.
    pub fn distinct(&self) -> usize {
        self.counts.len()
    }

    /// Total number of tokens recorded.
    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u64)> + '_ {
        self.counts.iter().map(|(t, &c)| (t.as_str(), c))
    }
}

impl<S: AsRef<str>> FromIterator<S> for TokenHistory {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        let mut history = Self::new();
        for token in iter {
            history.record(token.as_ref());
        }
        history
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_are_exact() {
        let h: TokenHistory = ["a", "b", "a", "a"].into_iter().collect();
        assert_eq!(h.count("a"), 3);
        assert_eq!(h.count("b"), 1);
        assert_eq!(h.count("c"), 0);
        assert!(!h.has_seen("c"));
        assert_eq!(h.distinct(), 2);
        assert_eq!(h.total(), 4);
    }
}
