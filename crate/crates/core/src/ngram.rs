//! A Laplace-smoothed n-gram model used as an offline, fully inspectable
//! stand-in for a large language model.

use std::collections::{BTreeMap, BTreeSet};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::distribution::{Token, TokenDistribution};
use crate::error::ProviderError;
use crate::provider::DistributionProvider;

/// End-of-text marker. It is always in the vocabulary; with the word
/// tokenizer a corpus may contain it literally to mark document boundaries.
pub const END_OF_TEXT: &str = "<|endoftext|>";

/// Public-domain text (a handful of Aesop's fables) used when no corpus is
/// supplied.
pub const DEFAULT_CORPUS: &str = include_str!("../data/corpus.txt");

pub const DEFAULT_ORDER: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tokenizer {
    /// One token per Unicode scalar value.
    #[default]
    Char,
    /// Whitespace-separated words.
    Word,
}

impl Tokenizer {
    pub fn tokenize(&self, text: &str) -> Vec<Token> {
        match self {
            Tokenizer::Char => text.chars().map(String::from).collect(),
            Tokenizer::Word => text.split_whitespace().map(str::to_owned).collect(),
        }
    }

    pub fn detokenize(&self, tokens: &[Token]) -> String {
        match self {
            Tokenizer::Char => tokens.concat(),
            Tokenizer::Word => tokens.join(" "),
        }
    }
}

impl FromStr for Tokenizer {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "char" => Ok(Tokenizer::Char),
            "word" => Ok(Tokenizer::Word),
            other => Err(format!("unknown tokenizer {other:?}, expected \"char\" or \"word\"")),
        }
    }
}

impl std::fmt::Display for Tokenizer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Tokenizer::Char => "char",
            Tokenizer::Word => "word",
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
struct ContextCounts {
    total: u64,
    next: BTreeMap<Token, u64>,
}

/// Order-`k` model: the next token is conditioned on the previous `k - 1`.
///
/// Immutable once trained, so it can be shared freely across threads.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NGramModel {
    order: usize,
    tokenizer: Tokenizer,
    vocabulary: BTreeSet<Token>,
    counts: BTreeMap<Vec<Token>, ContextCounts>,
}

impl NGramModel {
    /// Tallies every length-`order` sliding window of the tokenized corpus.
    ///
    /// The vocabulary is the set of distinct corpus tokens plus
    /// [`END_OF_TEXT`]. No end marker is appended to the corpus, so unless the
    /// corpus contains it literally, the marker only ever receives smoothing
    /// mass.
    pub fn train(corpus: &str, order: usize, tokenizer: Tokenizer) -> Result<Self, ProviderError> {
        if order < 2 {
            return Err(ProviderError::InvalidOrder(order));
        }
        let tokens = tokenizer.tokenize(corpus);
        if tokens.is_empty() {
            return Err(ProviderError::EmptyCorpus);
        }

        let mut vocabulary: BTreeSet<Token> = tokens.iter().cloned().collect();
        vocabulary.insert(END_OF_TEXT.to_owned());

        let mut counts: BTreeMap<Vec<Token>, ContextCounts> = BTreeMap::new();
        for window in tokens.windows(order) {
            let (context, next) = window.split_at(order - 1);
            let entry = counts.entry(context.to_vec()).or_default();
            entry.total += 1;
            *entry.next.entry(next[0].clone()).or_insert(0) += 1;
        }

        Ok(Self {
            order,
            tokenizer,
            vocabulary,
            counts,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn tokenizer(&self) -> Tokenizer {
        self.tokenizer
    }

    pub fn vocabulary(&self) -> &BTreeSet<Token> {
        &self.vocabulary
    }

    /// Number of times `next` followed `context` in the corpus.
    pub fn count(&self, context: &[Token], next: &str) -> u64 {
        self.counts
            .get(context)
            .and_then(|c| c.next.get(next))
            .copied()
            .unwrap_or(0)
    }

    /// Number of times `context` was followed by anything.
    pub fn context_total(&self, context: &[Token]) -> u64 {
        self.counts.get(context).map_or(0, |c| c.total)
    }

    /// Number of distinct contexts observed in training.
    pub fn context_count(&self) -> usize {
        self.counts.len()
    }

    /// `P(t | ctx) = (count(ctx, t) + 1) / (count(ctx, ·) + |V|)` where `ctx`
    /// is the trailing `order - 1` tokens of `context`. A shorter or unseen
    /// context yields the uniform distribution.
    pub fn distribution(&self, context: &[Token]) -> TokenDistribution {
        let start = context.len().saturating_sub(self.order - 1);
        let key = &context[start..];
        let vocab = self.vocabulary.len() as f64;
        let seen = self.counts.get(key);
        let denominator = seen.map_or(0, |c| c.total) as f64 + vocab;
        let entries = self
            .vocabulary
            .iter()
            .map(|t| {
                let c = seen.and_then(|c| c.next.get(t)).copied().unwrap_or(0) as f64;
                (t.clone(), (c + 1.0) / denominator)
            })
            .collect();
        TokenDistribution::from_normalized_map(entries)
    }
}

impl DistributionProvider for NGramModel {
    fn tokenize(&self, text: &str) -> Result<Vec<Token>, ProviderError> {
        let tokens = self.tokenizer.tokenize(text);
        if tokens.is_empty() {
            return Err(ProviderError::EmptyPrompt);
        }
        Ok(tokens)
    }

    fn detokenize(&self, tokens: &[Token]) -> String {
        self.tokenizer.detokenize(tokens)
    }

    fn end_of_text(&self) -> &str {
        END_OF_TEXT
    }

    fn next_distribution(&self, context: &[Token]) -> Result<TokenDistribution, ProviderError> {
        Ok(self.distribution(context))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &[&str]) -> Vec<Token> {
        s.iter().map(|t| t.to_string()).collect()
    }

    #[test]
    fn bigram_tallies() {
        let m = NGramModel::train("abab", 2, Tokenizer::Char).unwrap();
        assert_eq!(m.count(&toks(&["a"]), "b"), 2);
        assert_eq!(m.count(&toks(&["b"]), "a"), 1);
        assert_eq!(m.context_total(&toks(&["a"])), 2);
        assert_eq!(m.vocabulary().len(), 3);
    }

    #[test]
    fn laplace_probabilities() {
        let m = NGramModel::train("abab", 2, Tokenizer::Char).unwrap();
        let d = m.distribution(&toks(&["b", "a"]));
        assert!((d.prob("b") - 0.6).abs() < 1e-15);
        assert!((d.prob("a") - 0.2).abs() < 1e-15);
        assert!((d.prob(END_OF_TEXT) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn minimal_corpus_has_no_contexts() {
        let m = NGramModel::train("x", 2, Tokenizer::Char).unwrap();
        assert_eq!(m.vocabulary().iter().collect::<Vec<_>>(), [END_OF_TEXT, "x"]);
        assert_eq!(m.context_count(), 0);
        let d = m.distribution(&toks(&["x"]));
        assert_eq!(d.prob("x"), 0.5);
    }

    #[test]
    fn context_key_length_follows_order() {
        let m2 = NGramModel::train("abcabc", 2, Tokenizer::Char).unwrap();
        let m3 = NGramModel::train("abcabc", 3, Tokenizer::Char).unwrap();
        assert!(m2.counts.keys().all(|k| k.len() == 1));
        assert!(m3.counts.keys().all(|k| k.len() == 2));
    }

    #[test]
    fn unseen_and_short_contexts_are_uniform() {
        let m = NGramModel::train("abcabc", 3, Tokenizer::Char).unwrap();
        let u = 1.0 / m.vocabulary().len() as f64;
        for ctx in [toks(&[]), toks(&["a"]), toks(&["c", "c"])] {
            let d = m.distribution(&ctx);
            assert!(d.iter().all(|(_, p)| (p - u).abs() < 1e-15));
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        assert_eq!(
            NGramModel::train("   ", 2, Tokenizer::Word),
            Err(ProviderError::EmptyCorpus)
        );
        assert_eq!(
            NGramModel::train("abc", 1, Tokenizer::Char),
            Err(ProviderError::InvalidOrder(1))
        );
    }

    #[test]
    fn word_tokenizer_round_trip() {
        let t = Tokenizer::Word;
        let tokens = t.tokenize("  the cat\tsat ");
        assert_eq!(tokens, toks(&["the", "cat", "sat"]));
        assert_eq!(t.detokenize(&tokens), "the cat sat");
        assert_eq!("word".parse::<Tokenizer>().unwrap(), Tokenizer::Word);
        assert!("bpe".parse::<Tokenizer>().is_err());
    }

    #[test]
    fn literal_end_marker_is_trained_in_word_mode() {
        let corpus = format!("a b {END_OF_TEXT} a b");
        let m = NGramModel::train(&corpus, 2, Tokenizer::Word).unwrap();
        assert_eq!(m.count(&toks(&["b"]), END_OF_TEXT), 1);
    }

    #[test]
    fn default_corpus_trains() {
        let m = NGramModel::train(DEFAULT_CORPUS, DEFAULT_ORDER, Tokenizer::Char).unwrap();
        assert!(m.vocabulary().len() > 30);
    }
}
