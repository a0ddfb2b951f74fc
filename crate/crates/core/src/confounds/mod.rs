//! Confounding-factor treatments: language consistency and code-snippet
//! presence, each paired with a random baseline of the same size.

mod language;
mod snippet;

pub use language::{
    detect_language, dominant_script, out_of_place_distance, script_of, text_trigrams, Detection,
    LanguageProfile, ProfileError, Script, MIN_LETTERS, PROFILE_SIZE, UNDETERMINED,
};
pub use snippet::{detect_code_snippet, is_fence_line};

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::dataset::{sample, Dataset, DatasetError, LabeledIssue};

pub const ENGLISH: &str = "eng";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TreatmentKind {
    ConsistentLanguage,
    CodeSnippetPresence,
}

impl TreatmentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TreatmentKind::ConsistentLanguage => "consistent_language",
            TreatmentKind::CodeSnippetPresence => "code_snippet_presence",
        }
    }
}

impl fmt::Display for TreatmentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TreatmentKind {
    type Err = TreatmentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "consistent_language" | "language" => Ok(TreatmentKind::ConsistentLanguage),
            "code_snippet_presence" | "snippet" => Ok(TreatmentKind::CodeSnippetPresence),
            other => Err(TreatmentError::UnknownKind(other.to_owned())),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TreatmentSpec {
    kind: TreatmentKind,
    size: usize,
    seed: u64,
}

impl TreatmentSpec {
    pub fn new(kind: TreatmentKind, size: usize, seed: u64) -> Result<Self, TreatmentError> {
        if size == 0 {
            return Err(TreatmentError::ZeroSize);
        }
        Ok(Self { kind, size, seed })
    }

    pub fn kind(&self) -> TreatmentKind {
        self.kind
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

#[derive(Debug, Error)]
pub enum TreatmentError {
    #[error("treatment size must be positive")]
    ZeroSize,
    #[error("unknown treatment kind {0:?} (expected consistent_language or code_snippet_presence)")]
    UnknownKind(String),
    #[error("{arm} arm needs {requested} issues but only {available} qualify")]
    Insufficient {
        arm: &'static str,
        available: usize,
        requested: usize,
    },
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

/// Whether `issue` passes the treatment predicate. The language check runs
/// on the concatenated title and body; the snippet check on the body only.
pub fn qualifies(kind: TreatmentKind, issue: &LabeledIssue, profiles: &[LanguageProfile]) -> bool {
    match kind {
        TreatmentKind::ConsistentLanguage => detect_language(&issue.text(), profiles).is(ENGLISH),
        TreatmentKind::CodeSnippetPresence => detect_code_snippet(&issue.body),
    }
}

/// Builds `(treatment, baseline)` arms of `spec.size()` labeled issues each.
///
/// The treatment arm samples uniformly from labeled issues passing the
/// predicate; the baseline samples uniformly from all labeled issues. The
/// baseline uses a seed derived from `spec.seed()` so the arms are drawn
/// independently.
pub fn build_treatment(
    dataset: &Dataset,
    spec: &TreatmentSpec,
    profiles: &[LanguageProfile],
) -> Result<(Dataset, Dataset), TreatmentError> {
    let labeled: Vec<&LabeledIssue> = dataset.iter().filter(|i| i.label.is_some()).collect();
    let qualifying: Vec<&LabeledIssue> = labeled
        .iter()
        .copied()
        .filter(|i| qualifies(spec.kind, i, profiles))
        .collect();
    let check = |arm, available: usize| {
        if available < spec.size {
            Err(TreatmentError::Insufficient {
                arm,
                available,
                requested: spec.size,
            })
        } else {
            Ok(())
        }
    };
    check("treatment", qualifying.len())?;
    check("baseline", labeled.len())?;

    let treatment = Dataset::new(
        sample(&qualifying, spec.size, spec.seed),
        format!(
            "{} treatment of {} (seed {}) from: {}",
            spec.kind, spec.size, spec.seed, dataset.provenance
        ),
    )?;
    let baseline_seed = spec.seed ^ 0x9e37_79b9_7f4a_7c15;
    let baseline = Dataset::new(
        sample(&labeled, spec.size, baseline_seed),
        format!(
            "random baseline of {} (seed {}) from: {}",
            spec.size, spec.seed, dataset.provenance
        ),
    )?;
    Ok((treatment, baseline))
}
