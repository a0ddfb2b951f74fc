//! Text pipeline: issue concatenation, tokenization, character n-grams and
//! the sparse feature bag fed to the classifier.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use crate::classifier::Vocabulary;

/// An issue as submitted: a title and a (possibly empty) description.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawIssue {
    pub title: String,
    pub body: String,
}

impl RawIssue {
    pub fn new(title: impl Into<String>, body: impl Into<String>) -> Self {
        Self {
            title: title.into(),
            body: body.into(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct TokenSequence {
    tokens: Vec<String>,
}

impl TokenSequence {
    pub fn new(tokens: Vec<String>) -> Self {
        debug_assert!(tokens.iter().all(|t| !t.is_empty()));
        Self { tokens }
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(String::as_str)
    }
}

impl<S: Into<String>> FromIterator<S> for TokenSequence {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        Self::new(
            iter.into_iter()
                .map(Into::into)
                .filter(|t: &String| !t.is_empty())
                .collect(),
        )
    }
}

/// Title, one space, body. Empty parts drop the separator.
pub fn concatenate(issue: &RawIssue) -> String {
    match (issue.title.is_empty(), issue.body.is_empty()) {
        (_, true) => issue.title.clone(),
        (true, false) => issue.body.clone(),
        (false, false) => format!("{} {}", issue.title, issue.body),
    }
}

/// NFC-normalize, lowercase, turn every non-alphanumeric character into a
/// space and split on whitespace.
pub fn tokenize(text: &str) -> TokenSequence {
    let cleaned: String = text
        .nfc()
        .flat_map(char::to_lowercase)
        .map(|c| if c.is_alphanumeric() { c } else { ' ' })
        .collect();
    TokenSequence::new(cleaned.split_whitespace().map(str::to_owned).collect())
}

pub const BOW: char = '<';
pub const EOW: char = '>';

/// Character n-grams of one token.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CharNgrams {
    /// Substrings of the boundary-wrapped token, ordered by length and then
    /// by start position. The full wrapped token is never among them.
    pub ngrams: Vec<String>,
    /// The whole wrapped token, e.g. `<bug>`.
    pub whole: String,
}

/// Wraps `token` in `<`/`>` and emits every substring of `min_n..=max_n`
/// characters, except the whole wrapped token, which is reported separately.
pub fn char_ngrams(token: &str, min_n: usize, max_n: usize) -> CharNgrams {
    assert!(
        1 <= min_n && min_n <= max_n,
        "invalid n-gram range {min_n}..={max_n}"
    );
    let wrapped: Vec<char> = std::iter::once(BOW)
        .chain(token.chars())
        .chain(std::iter::once(EOW))
        .collect();
    let mut ngrams = Vec::new();
    for n in min_n..=max_n.min(wrapped.len() - 1) {
        for window in wrapped.windows(n) {
            ngrams.push(window.iter().collect());
        }
    }
    CharNgrams {
        ngrams,
        whole: wrapped.into_iter().collect(),
    }
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// 64-bit FNV-1a over the UTF-8 bytes of `s`.
///
/// Offset basis `0xcbf29ce484222325`, prime `0x100000001b3`.
pub fn fnv1a64(s: &str) -> u64 {
    s.bytes().fold(FNV_OFFSET, |hash, byte| {
        (hash ^ u64::from(byte)).wrapping_mul(FNV_PRIME)
    })
}

/// Which features `featurize` emits besides vocabulary words.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureConfig {
    /// Smallest character n-gram; 0 together with `max_n == 0` disables subwords.
    pub min_n: usize,
    pub max_n: usize,
    /// Longest word n-gram; 1 means unigrams only.
    pub word_ngrams: usize,
    /// Number of hash buckets shared by character and word n-grams.
    pub buckets: u64,
}

impl FeatureConfig {
    pub fn subwords_enabled(&self) -> bool {
        self.max_n > 0 && self.buckets > 0
    }

    pub fn word_ngrams_enabled(&self) -> bool {
        self.word_ngrams > 1 && self.buckets > 0
    }
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            min_n: 3,
            max_n: 6,
            word_ngrams: 1,
            buckets: 2_000_000,
        }
    }
}

/// Sparse multiset of feature ids for one document.
///
/// Ids below the vocabulary size are words; the rest are
/// `vocab_size + hash % buckets` for n-grams.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FeatureBag {
    pub entries: BTreeMap<u64, u32>,
    pub token_count: usize,
}

impl FeatureBag {
    pub fn add(&mut self, id: u64) {
        *self.entries.entry(id).or_insert(0) += 1;
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Sum of all counts.
    pub fn total(&self) -> u64 {
        self.entries.values().map(|&c| u64::from(c)).sum()
    }
}

pub fn featurize(tokens: &TokenSequence, vocab: &Vocabulary, config: &FeatureConfig) -> FeatureBag {
    let offset = vocab.len() as u64;
    let mut bag = FeatureBag {
        entries: BTreeMap::new(),
        token_count: tokens.len(),
    };
    for token in tokens.iter() {
        if let Some(id) = vocab.id(token) {
            bag.add(u64::from(id));
        }
        if config.subwords_enabled() {
            let min_n = config.min_n.max(1);
            for gram in char_ngrams(token, min_n, config.max_n.max(min_n)).ngrams {
                bag.add(offset + fnv1a64(&gram) % config.buckets);
            }
        }
    }
    if config.word_ngrams_enabled() {
        let words = tokens.tokens();
        for n in 2..=config.word_ngrams {
            for window in words.windows(n) {
                bag.add(offset + fnv1a64(&window.join(" ")) % config.buckets);
            }
        }
    }
    bag
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::build_vocabulary;

    fn strings(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn concatenate_cases() {
        assert_eq!(
            concatenate(&RawIssue::new("Crash on save", "App dies")),
            "Crash on save App dies"
        );
        assert_eq!(concatenate(&RawIssue::new("Add dark mode", "")), "Add dark mode");
        assert_eq!(concatenate(&RawIssue::new("", "why?")), "why?");
        assert_eq!(concatenate(&RawIssue::new("", "")), "");
    }

    #[test]
    fn tokenize_cases() {
        assert_eq!(tokenize("Crash on SAVE!").tokens(), strings(&["crash", "on", "save"]));
        assert!(tokenize("").is_empty());
        assert_eq!(tokenize("v1.2.3 fails").tokens(), strings(&["v1", "2", "3", "fails"]));
        assert!(tokenize("  ... !!! ").is_empty());
    }

    #[test]
    fn tokenize_applies_nfc() {
        // "é" as e + combining acute composes to a single alphanumeric char.
        let decomposed = "cafe\u{301} crash";
        assert_eq!(tokenize(decomposed).tokens(), strings(&["caf\u{e9}", "crash"]));
    }

    #[test]
    fn char_ngram_examples() {
        let g = char_ngrams("bug", 3, 3);
        assert_eq!(g.ngrams, strings(&["<bu", "bug", "ug>"]));
        assert_eq!(g.whole, "<bug>");

        let g = char_ngrams("a", 3, 3);
        assert!(g.ngrams.is_empty());
        assert_eq!(g.whole, "<a>");

        let g = char_ngrams("ab", 2, 3);
        assert_eq!(g.ngrams, strings(&["<a", "ab", "b>", "<ab", "ab>"]));
        assert_eq!(g.whole, "<ab>");
    }

    #[test]
    fn char_ngrams_count_multibyte() {
        // wrapped length 4 -> 2 trigrams, counted in chars not bytes
        assert_eq!(char_ngrams("äö", 3, 3).ngrams, strings(&["<äö", "äö>"]));
    }

    #[test]
    #[should_panic]
    fn char_ngrams_rejects_bad_range() {
        char_ngrams("x", 3, 2);
    }

    #[test]
    fn fnv_reference_values() {
        // Published FNV-1a 64 test vectors.
        assert_eq!(fnv1a64(""), 0xcbf29ce484222325);
        assert_eq!(fnv1a64("a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a64("foobar"), 0x85944171f73967e8);
    }

    #[test]
    fn featurize_empty_and_multiset() {
        let vocab = build_vocabulary(&[tokenize("bug bug")], 1);
        let cfg = FeatureConfig {
            buckets: 1000,
            ..FeatureConfig::default()
        };
        let empty = featurize(&TokenSequence::default(), &vocab, &cfg);
        assert!(empty.entries.is_empty());
        assert_eq!(empty.token_count, 0);

        let bag = featurize(&tokenize("bug bug"), &vocab, &cfg);
        let id = u64::from(vocab.id("bug").unwrap());
        assert_eq!(bag.entries[&id], 2);
        assert_eq!(bag.token_count, 2);
        assert_eq!(bag, featurize(&tokenize("bug bug"), &vocab, &cfg));
    }

    #[test]
    fn unknown_words_contribute_only_ngrams() {
        let vocab = build_vocabulary(&[tokenize("bug")], 1);
        let cfg = FeatureConfig {
            min_n: 3,
            max_n: 3,
            word_ngrams: 1,
            buckets: 97,
        };
        let bag = featurize(&tokenize("xyz"), &vocab, &cfg);
        assert_eq!(bag.total(), 3);
        assert!(bag.entries.keys().all(|&id| id >= vocab.len() as u64));

        let no_sub = FeatureConfig {
            min_n: 0,
            max_n: 0,
            word_ngrams: 1,
            buckets: 0,
        };
        assert!(featurize(&tokenize("xyz"), &vocab, &no_sub).is_empty());
    }

    #[test]
    fn word_bigrams_are_hashed() {
        let vocab = build_vocabulary(&[tokenize("a b")], 1);
        let cfg = FeatureConfig {
            min_n: 0,
            max_n: 0,
            word_ngrams: 2,
            buckets: 50,
        };
        let bag = featurize(&tokenize("a b"), &vocab, &cfg);
        assert_eq!(bag.total(), 3);
        let expected = vocab.len() as u64 + fnv1a64("a b") % 50;
        assert_eq!(bag.entries[&expected], 1);
    }
}
