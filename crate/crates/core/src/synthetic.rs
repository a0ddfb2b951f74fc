//! Seeded synthetic issue corpora for tests, benchmarks and demos.

use crate::dataset::{Dataset, Label, LabeledIssue};
use crate::rng::SeededRng;

/// Class vocabularies of [`separable_corpus`]; no word is shared.
pub const SEPARABLE_VOCABULARY: [(Label, &[&str]); 3] = [
    (
        Label::Bug,
        &[
            "crash", "crashes", "exception", "error", "segfault", "broken", "fails", "panic",
            "stacktrace", "regression", "freeze", "hang", "corrupt", "nullpointer", "traceback",
            "wrong", "incorrect", "leak", "timeout", "abort",
        ],
    ),
    (
        Label::Enhancement,
        &[
            "feature", "support", "add", "option", "improve", "allow", "request", "proposal",
            "implement", "extend", "configurable", "integration", "plugin", "dark", "theme",
            "shortcut", "export", "customize", "enable", "nicer",
        ],
    ),
    (
        Label::Question,
        &[
            "how", "why", "what", "question", "help", "possible", "documentation", "clarify",
            "understand", "usage", "example", "advice", "anyone", "wondering", "explain",
            "guidance", "recommended", "best", "tutorial", "confused",
        ],
    ),
];

fn pick<'a>(rng: &mut SeededRng, words: &[&'a str]) -> &'a str {
    words[rng.below(words.len() as u64) as usize]
}

/// `per_class` issues for each label whose titles and bodies draw only from
/// that label's vocabulary. Ids are zero-padded so they sort numerically.
pub fn separable_corpus(per_class: usize, seed: u64) -> Dataset {
    let mut rng = SeededRng::new(seed);
    let mut issues = Vec::with_capacity(per_class * 3);
    for _ in 0..per_class {
        for (label, words) in SEPARABLE_VOCABULARY {
            let title: Vec<&str> = (0..4).map(|_| pick(&mut rng, words)).collect();
            let body: Vec<&str> = (0..12).map(|_| pick(&mut rng, words)).collect();
            issues.push(LabeledIssue::new(
                format!("{:06}", issues.len()),
                Some(label),
                title.join(" "),
                body.join(" "),
            ));
        }
    }
    Dataset::new(issues, format!("separable synthetic corpus ({per_class} per class, seed {seed})"))
        .expect("generated ids are unique")
}

const ONSETS: [&str; 16] = [
    "b", "c", "d", "f", "g", "h", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z",
];
const NUCLEI: [&str; 5] = ["a", "e", "i", "o", "u"];

/// Pronounceable word for `rank`, distinct for every rank.
pub fn synthetic_word(rank: usize) -> String {
    let base = ONSETS.len() * NUCLEI.len();
    let mut n = rank;
    let mut word = String::new();
    loop {
        let syllable = n % base;
        word.push_str(ONSETS[syllable / NUCLEI.len()]);
        word.push_str(NUCLEI[syllable % NUCLEI.len()]);
        n /= base;
        if n == 0 {
            break;
        }
        n -= 1;
    }
    word
}

/// Parameters for [`zipf_corpus`].
#[derive(Clone, Copy, Debug)]
pub struct ZipfSpec {
    pub documents: usize,
    pub vocabulary: usize,
    pub exponent: f64,
    pub tokens_per_document: usize,
    pub seed: u64,
}

impl Default for ZipfSpec {
    fn default() -> Self {
        Self {
            documents: 20_000,
            vocabulary: 200_000,
            exponent: 1.0,
            tokens_per_document: 60,
            seed: crate::rng::DEFAULT_SEED,
        }
    }
}

/// Issues whose words follow a Zipf law over a synthetic vocabulary, with
/// labels dealt round-robin. Each document also carries a few words from its
/// class in [`SEPARABLE_VOCABULARY`] so the corpus is learnable.
pub fn zipf_corpus(spec: &ZipfSpec) -> Dataset {
    let mut cumulative = Vec::with_capacity(spec.vocabulary);
    let mut total = 0.0;
    for rank in 1..=spec.vocabulary {
        total += (rank as f64).powf(-spec.exponent);
        cumulative.push(total);
    }
    let mut rng = SeededRng::new(spec.seed);
    let words: Vec<String> = (0..spec.vocabulary).map(synthetic_word).collect();
    let issues = (0..spec.documents)
        .map(|i| {
            let (label, class_words) = SEPARABLE_VOCABULARY[i % 3];
            let mut body: Vec<&str> = (0..spec.tokens_per_document)
                .map(|_| {
                    let u = rng.unit_f64() * total;
                    let rank = cumulative.partition_point(|&c| c <= u).min(spec.vocabulary - 1);
                    words[rank].as_str()
                })
                .collect();
            for _ in 0..3 {
                body.push(pick(&mut rng, class_words));
            }
            let title = body[..4.min(body.len())].join(" ");
            LabeledIssue::new(format!("{i:07}"), Some(label), title, body.join(" "))
        })
        .collect();
    Dataset::new(
        issues,
        format!(
            "zipf synthetic corpus ({} docs, vocabulary {}, s={}, seed {})",
            spec.documents, spec.vocabulary, spec.exponent, spec.seed
        ),
    )
    .expect("generated ids are unique")
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn vocabularies_are_disjoint() {
        let mut seen = HashSet::new();
        for (_, words) in SEPARABLE_VOCABULARY {
            for w in words {
                assert!(seen.insert(*w), "{w} shared");
            }
        }
    }

    #[test]
    fn separable_shape() {
        let d = separable_corpus(100, 1);
        assert_eq!(d.len(), 300);
        assert!(d.class_histogram().values().all(|&n| n == 100));
        assert_eq!(d, separable_corpus(100, 1));
    }

    #[test]
    fn synthetic_words_unique_and_tokenizable() {
        let words: HashSet<String> = (0..20_000).map(synthetic_word).collect();
        assert_eq!(words.len(), 20_000);
        for w in words.iter().take(100) {
            assert_eq!(crate::text::tokenize(w).tokens(), std::slice::from_ref(w));
        }
    }

    #[test]
    fn small_zipf() {
        let spec = ZipfSpec {
            documents: 30,
            vocabulary: 1000,
            tokens_per_document: 10,
            ..ZipfSpec::default()
        };
        let d = zipf_corpus(&spec);
        assert_eq!(d.len(), 30);
        assert!(d.iter().all(|i| crate::text::tokenize(&i.body).len() == 13));
    }
}
