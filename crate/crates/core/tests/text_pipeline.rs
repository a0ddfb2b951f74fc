use proptest::prelude::*;
use tagger_core::classifier::{build_vocabulary, Vocabulary};
use tagger_core::text::{char_ngrams, featurize, tokenize, FeatureConfig, TokenSequence};

#[test]
fn golden_tokenizer_corpus() {
    let golden = include_str!("fixtures/tokenizer_golden.tsv");
    let mut cases = 0;
    for line in golden.lines() {
        let (input, expected) = line.split_once('\t').expect("input<TAB>tokens");
        let expected: Vec<&str> = expected.split(' ').filter(|t| !t.is_empty()).collect();
        let actual = tokenize(input);
        assert_eq!(actual.tokens(), expected.as_slice(), "input {input:?}");
        cases += 1;
    }
    assert!(cases >= 15);
}

fn word() -> impl Strategy<Value = String> {
    prop::sample::select(vec![
        "bug", "crash", "save", "dark", "mode", "how", "why", "é", "ab", "a", "naïve", "日本", "x1",
    ])
    .prop_map(str::to_owned)
}

fn vocab_for(words: &[String]) -> Vocabulary {
    build_vocabulary(&[TokenSequence::new(words.to_vec())], 1)
}

proptest! {
    #[test]
    fn tokens_are_nonempty_and_deterministic(text in "\\PC{0,60}") {
        let a = tokenize(&text);
        prop_assert!(a.iter().all(|t| !t.is_empty()));
        prop_assert_eq!(a, tokenize(&text));
    }

    #[test]
    fn bag_ignores_token_order(
        words in prop::collection::vec(word(), 0..15),
        seed in any::<u64>(),
        buckets in 1u64..5000,
        word_ngrams in 1usize..2,
    ) {
        let vocab = vocab_for(&words[..words.len() / 2]);
        let config = FeatureConfig { buckets, word_ngrams, ..FeatureConfig::default() };
        let mut shuffled = words.clone();
        tagger_core::rng::SeededRng::new(seed).shuffle(&mut shuffled);
        let a = featurize(&TokenSequence::new(words), &vocab, &config);
        let b = featurize(&TokenSequence::new(shuffled), &vocab, &config);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn feature_ids_are_bounded(
        words in prop::collection::vec(word(), 0..15),
        buckets in 1u64..100,
        word_ngrams in 1usize..4,
        min_n in 1usize..4,
        extra in 0usize..4,
    ) {
        let vocab = vocab_for(&words[..words.len() / 3]);
        let config = FeatureConfig { min_n, max_n: min_n + extra, word_ngrams, buckets };
        let bag = featurize(&TokenSequence::new(words.clone()), &vocab, &config);
        let bound = vocab.len() as u64 + buckets;
        prop_assert!(bag.entries.keys().all(|&id| id < bound));
        prop_assert!(bag.entries.values().all(|&c| c >= 1));
        prop_assert_eq!(bag.token_count, words.len());
    }

    #[test]
    fn ngram_count_matches_wrapped_length(token in "\\PC{1,12}", n in 1usize..10) {
        let grams = char_ngrams(&token, n, n);
        let wrapped_len = token.chars().count() + 2;
        // The full wrapped token (n == L) is the whole-token feature only.
        let expected = if n < wrapped_len { wrapped_len - n + 1 } else { 0 };
        prop_assert_eq!(grams.ngrams.len(), expected);
        prop_assert_eq!(grams.whole.chars().count(), wrapped_len);
        prop_assert!(grams.ngrams.iter().all(|g| g.chars().count() == n));
    }
}
