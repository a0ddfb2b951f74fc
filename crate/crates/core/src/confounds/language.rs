//! Trigram language identification with out-of-place rank distance.
//!
//! Text is lowercased, every non-letter becomes a word break, and each word
//! is padded with one space on both sides before trigrams are counted. The
//! 300 most frequent trigrams of the text are ranked and compared with each
//! candidate profile; a trigram missing from a profile costs the maximum
//! penalty. Candidates are first narrowed to profiles written in the text's
//! dominant script.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use thiserror::Error;

/// Trigrams kept per profile and per text.
pub const PROFILE_SIZE: usize = 300;
/// Texts with fewer letters than this are not classified.
pub const MIN_LETTERS: usize = 10;
pub const UNDETERMINED: &str = "und";

const BUNDLED: [(&str, &str); 9] = [
    ("eng", include_str!("../../data/profiles/eng.tri")),
    ("deu", include_str!("../../data/profiles/deu.tri")),
    ("fra", include_str!("../../data/profiles/fra.tri")),
    ("spa", include_str!("../../data/profiles/spa.tri")),
    ("por", include_str!("../../data/profiles/por.tri")),
    ("ita", include_str!("../../data/profiles/ita.tri")),
    ("nld", include_str!("../../data/profiles/nld.tri")),
    ("rus", include_str!("../../data/profiles/rus.tri")),
    ("cmn", include_str!("../../data/profiles/cmn.tri")),
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Script {
    Latin,
    Cyrillic,
    Greek,
    Arabic,
    Hebrew,
    Han,
    Kana,
    Hangul,
    Other,
}

pub fn script_of(c: char) -> Script {
    match u32::from(c) {
        0x0041..=0x024F | 0x1E00..=0x1EFF => Script::Latin,
        0x0370..=0x03FF | 0x1F00..=0x1FFF => Script::Greek,
        0x0400..=0x052F => Script::Cyrillic,
        0x0590..=0x05FF => Script::Hebrew,
        0x0600..=0x06FF | 0x0750..=0x077F => Script::Arabic,
        0x3040..=0x30FF => Script::Kana,
        0x3400..=0x4DBF | 0x4E00..=0x9FFF | 0xF900..=0xFAFF => Script::Han,
        0xAC00..=0xD7AF | 0x1100..=0x11FF => Script::Hangul,
        _ => Script::Other,
    }
}

/// Most frequent script among the letters of `text`; ties favor the
/// earlier [`Script`] variant.
pub fn dominant_script<'a>(letters: impl IntoIterator<Item = &'a char>) -> Option<Script> {
    let mut counts: HashMap<Script, usize> = HashMap::new();
    for &c in letters {
        *counts.entry(script_of(c)).or_insert(0) += 1;
    }
    counts
        .into_iter()
        .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
        .map(|(s, _)| s)
}

#[derive(Debug, Error)]
pub enum ProfileError {
    #[error("profile is missing the `# language:` header")]
    MissingTag,
    #[error("line {line}: {reason}")]
    BadLine { line: usize, reason: String },
    #[error("ranks are not dense in 0..{0}")]
    SparseRanks(usize),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Ranked trigrams for one language (rank 0 is the most frequent).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LanguageProfile {
    pub language_tag: String,
    pub source: String,
    pub script: Script,
    trigram_ranks: HashMap<String, usize>,
}

impl LanguageProfile {
    /// Builds a profile from trigrams ordered by descending frequency.
    pub fn from_ranked(tag: impl Into<String>, source: impl Into<String>, trigrams: &[String]) -> Self {
        let trigram_ranks: HashMap<String, usize> = trigrams
            .iter()
            .take(PROFILE_SIZE)
            .enumerate()
            .map(|(rank, t)| (t.clone(), rank))
            .collect();
        let letters: Vec<char> = trigram_ranks
            .keys()
            .flat_map(|t| t.chars())
            .filter(|c| c.is_alphabetic())
            .collect();
        Self {
            language_tag: tag.into(),
            source: source.into(),
            script: dominant_script(&letters).unwrap_or(Script::Other),
            trigram_ranks,
        }
    }

    /// Parses the profile file format: `# language: <tag>` and optional
    /// `# source: <text>` headers, then one `trigram<TAB>rank` per line.
    pub fn parse(text: &str) -> Result<Self, ProfileError> {
        let mut tag = None;
        let mut source = String::new();
        let mut entries: Vec<(usize, String)> = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if let Some(header) = line.strip_prefix('#') {
                let header = header.trim();
                if let Some(v) = header.strip_prefix("language:") {
                    tag = Some(v.trim().to_owned());
                } else if let Some(v) = header.strip_prefix("source:") {
                    source = v.trim().to_owned();
                }
                continue;
            }
            if line.is_empty() {
                continue;
            }
            let bad = |reason: &str| ProfileError::BadLine {
                line: i + 1,
                reason: reason.to_owned(),
            };
            let (gram, rank) = line.rsplit_once('\t').ok_or_else(|| bad("expected trigram<TAB>rank"))?;
            if gram.chars().count() != 3 {
                return Err(bad("trigram must have three characters"));
            }
            let rank: usize = rank.trim().parse().map_err(|_| bad("rank is not an integer"))?;
            entries.push((rank, gram.to_owned()));
        }
        let tag = tag.ok_or(ProfileError::MissingTag)?;
        entries.sort();
        if entries.iter().enumerate().any(|(i, (rank, _))| *rank != i) {
            return Err(ProfileError::SparseRanks(entries.len()));
        }
        let ranked: Vec<String> = entries.into_iter().map(|(_, g)| g).collect();
        Ok(Self::from_ranked(tag, source, &ranked))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ProfileError> {
        Self::parse(&fs::read_to_string(path)?)
    }

    /// The profiles compiled into the crate: eng, deu, fra, spa, por, ita,
    /// nld, rus and cmn.
    pub fn bundled() -> Vec<LanguageProfile> {
        BUNDLED
            .iter()
            .map(|(tag, text)| {
                let profile = Self::parse(text).expect("bundled profile parses");
                debug_assert_eq!(&profile.language_tag, tag);
                profile
            })
            .collect()
    }

    pub fn rank(&self, trigram: &str) -> Option<usize> {
        self.trigram_ranks.get(trigram).copied()
    }

    pub fn len(&self) -> usize {
        self.trigram_ranks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trigram_ranks.is_empty()
    }

    /// Trigrams in rank order.
    pub fn ranked(&self) -> Vec<&str> {
        let mut v: Vec<(&str, usize)> = self.trigram_ranks.iter().map(|(t, &r)| (t.as_str(), r)).collect();
        v.sort_by_key(|&(_, r)| r);
        v.into_iter().map(|(t, _)| t).collect()
    }
}

/// Lowercased letters of `text`, split into words at every non-letter.
fn words(text: &str) -> Vec<Vec<char>> {
    let mut out = Vec::new();
    let mut current = Vec::new();
    for c in text.chars().flat_map(char::to_lowercase) {
        if c.is_alphabetic() {
            current.push(c);
        } else if !current.is_empty() {
            out.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        out.push(current);
    }
    out
}

/// The text's own ranked trigram list, most frequent first, ties
/// lexicographic, truncated to [`PROFILE_SIZE`].
pub fn text_trigrams(text: &str) -> Vec<String> {
    let mut counts: HashMap<String, usize> = HashMap::new();
    for word in words(text) {
        let padded: Vec<char> = std::iter::once(' ')
            .chain(word)
            .chain(std::iter::once(' '))
            .collect();
        for w in padded.windows(3) {
            *counts.entry(w.iter().collect()).or_insert(0) += 1;
        }
    }
    let mut ranked: Vec<(String, usize)> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranked.truncate(PROFILE_SIZE);
    ranked.into_iter().map(|(t, _)| t).collect()
}

/// Sum over the text's ranked trigrams of `|text rank - profile rank|`,
/// with [`PROFILE_SIZE`] for trigrams the profile lacks.
pub fn out_of_place_distance(text_ranked: &[String], profile: &LanguageProfile) -> usize {
    text_ranked
        .iter()
        .enumerate()
        .map(|(rank, t)| profile.rank(t).map_or(PROFILE_SIZE, |p| p.abs_diff(rank)))
        .sum()
}

#[derive(Clone, Debug, PartialEq)]
pub struct Detection {
    pub language_tag: String,
    /// `(runner-up distance - best distance) / runner-up distance`; 1 when
    /// only one profile matched the script, 0 when undetermined.
    pub confidence: f64,
}

impl Detection {
    fn undetermined() -> Self {
        Self {
            language_tag: UNDETERMINED.to_owned(),
            confidence: 0.0,
        }
    }

    pub fn is(&self, tag: &str) -> bool {
        self.language_tag == tag && self.confidence > 0.0
    }
}

pub fn detect_language(text: &str, profiles: &[LanguageProfile]) -> Detection {
    let letters: Vec<char> = text.chars().filter(|c| c.is_alphabetic()).collect();
    if letters.len() < MIN_LETTERS {
        return Detection::undetermined();
    }
    let Some(script) = dominant_script(&letters) else {
        return Detection::undetermined();
    };
    let ranked = text_trigrams(text);
    let mut scored: Vec<(usize, &str)> = profiles
        .iter()
        .filter(|p| p.script == script)
        .map(|p| (out_of_place_distance(&ranked, p), p.language_tag.as_str()))
        .collect();
    scored.sort();
    match scored.as_slice() {
        [] => Detection::undetermined(),
        [(_, tag)] => Detection {
            language_tag: (*tag).to_owned(),
            confidence: 1.0,
        },
        [(best, tag), (runner_up, _), ..] => Detection {
            language_tag: (*tag).to_owned(),
            confidence: if *runner_up == 0 {
                0.0
            } else {
                (runner_up - best) as f64 / *runner_up as f64
            },
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_profiles_are_dense() {
        let profiles = LanguageProfile::bundled();
        assert_eq!(profiles.len(), 9);
        for p in &profiles {
            assert!(!p.is_empty() && p.len() <= PROFILE_SIZE);
            let ranked = p.ranked();
            for (i, t) in ranked.iter().enumerate() {
                assert_eq!(p.rank(t), Some(i));
            }
        }
        let scripts: Vec<_> = profiles.iter().map(|p| (p.language_tag.as_str(), p.script)).collect();
        assert!(scripts.contains(&("rus", Script::Cyrillic)));
        assert!(scripts.contains(&("cmn", Script::Han)));
        assert!(scripts.contains(&("eng", Script::Latin)));
    }

    #[test]
    fn english_pangram() {
        let d = detect_language("the quick brown fox jumps over the lazy dog", &LanguageProfile::bundled());
        assert_eq!(d.language_tag, "eng");
        assert!(d.confidence > 0.0);
    }

    #[test]
    fn short_text_floor() {
        let profiles = LanguageProfile::bundled();
        assert_eq!(detect_language("", &profiles), Detection::undetermined());
        assert_eq!(detect_language("crash 123 !!", &profiles), Detection::undetermined());
    }

    #[test]
    fn script_filter_leaves_no_candidates() {
        let latin: Vec<_> = LanguageProfile::bundled()
            .into_iter()
            .filter(|p| p.script == Script::Latin)
            .collect();
        let d = detect_language("Приложение падает при сохранении файла", &latin);
        assert_eq!(d, Detection::undetermined());
    }

    #[test]
    fn text_trigram_shape() {
        assert_eq!(text_trigrams("a"), vec![" a ".to_string()]);
        assert_eq!(text_trigrams("Bug!"), vec![" bu", "bug", "ug "]);
    }

    #[test]
    fn parse_errors() {
        assert!(matches!(LanguageProfile::parse("abc\t0\n"), Err(ProfileError::MissingTag)));
        assert!(matches!(
            LanguageProfile::parse("# language: x\nabc\t1\n"),
            Err(ProfileError::SparseRanks(1))
        ));
        assert!(matches!(
            LanguageProfile::parse("# language: x\nabcd\t0\n"),
            Err(ProfileError::BadLine { line: 2, .. })
        ));
    }
}
