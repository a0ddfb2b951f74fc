use std::collections::HashMap;

use crate::text::TokenSequence;

/// Words kept after frequency pruning, with dense ids.
///
/// Ids follow descending corpus frequency; equal frequencies are ordered
/// lexicographically.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Vocabulary {
    words: Vec<String>,
    counts: Vec<u64>,
    word_to_id: HashMap<String, u32>,
    min_count: u64,
}

impl Vocabulary {
    /// Rebuilds a vocabulary from `(word, count)` pairs already in id order.
    pub fn from_entries(entries: Vec<(String, u64)>, min_count: u64) -> Self {
        let mut words = Vec::with_capacity(entries.len());
        let mut counts = Vec::with_capacity(entries.len());
        let mut word_to_id = HashMap::with_capacity(entries.len());
        for (id, (word, count)) in entries.into_iter().enumerate() {
            word_to_id.insert(word.clone(), id as u32);
            words.push(word);
            counts.push(count);
        }
        Self {
            words,
            counts,
            word_to_id,
            min_count,
        }
    }

    pub fn id(&self, word: &str) -> Option<u32> {
        self.word_to_id.get(word).copied()
    }

    pub fn word(&self, id: u32) -> Option<&str> {
        self.words.get(id as usize).map(String::as_str)
    }

    pub fn count(&self, word: &str) -> Option<u64> {
        self.id(word).map(|id| self.counts[id as usize])
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn min_count(&self) -> u64 {
        self.min_count
    }

    /// `(word, count)` in id order.
    pub fn entries(&self) -> impl Iterator<Item = (&str, u64)> {
        self.words
            .iter()
            .map(String::as_str)
            .zip(self.counts.iter().copied())
    }

    /// Whether ids respect the ordering contract and every count clears the threshold.
    pub fn is_well_formed(&self) -> bool {
        self.counts.iter().all(|&c| c >= self.min_count)
            && self.words.len() == self.word_to_id.len()
            && self
                .entries()
                .zip(self.entries().skip(1))
                .all(|((wa, ca), (wb, cb))| ca > cb || (ca == cb && wa < wb))
    }
}

pub fn build_vocabulary(corpus: &[TokenSequence], min_count: u64) -> Vocabulary {
    assert!(min_count >= 1, "min_count must be at least 1");
    let mut counts: HashMap<&str, u64> = HashMap::new();
    for doc in corpus {
        for token in doc.iter() {
            *counts.entry(token).or_insert(0) += 1;
        }
    }
    let mut kept: Vec<(String, u64)> = counts
        .into_iter()
        .filter(|&(_, c)| c >= min_count)
        .map(|(w, c)| (w.to_owned(), c))
        .collect();
    kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    Vocabulary::from_entries(kept, min_count)
}
