//! Labeled issue corpora: loading, label normalization, class-balanced
//! sampling, stratified folds and exports for external tools.

mod io;
mod tfidf;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::SeededRng;
use crate::text::{concatenate, tokenize, RawIssue, TokenSequence};

pub use io::{
    load_csv, load_fold_plan, read_csv, read_fasttext, save_csv, save_fold_plan, write_csv,
    write_fasttext,
    LoadReport,
};
pub use tfidf::{export_tfidf, tfidf_matrix, TfidfMatrix, TfidfSummary};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Bug,
    Enhancement,
    Question,
}

impl Label {
    pub const ALL: [Label; 3] = [Label::Bug, Label::Enhancement, Label::Question];

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Bug => "bug",
            Label::Enhancement => "enhancement",
            Label::Question => "question",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    /// Canonical label names in index order.
    pub fn names() -> Vec<String> {
        Self::ALL.iter().map(|l| l.as_str().to_owned()).collect()
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        normalize_label(s).ok_or_else(|| format!("unknown label {s:?}"))
    }
}

/// Case-insensitive exact match against `bug`, `enhancement`, `question`.
/// Surrounding whitespace is ignored; anything else is rejected.
pub fn normalize_label(raw: &str) -> Option<Label> {
    let raw = raw.trim();
    Label::ALL
        .into_iter()
        .find(|label| raw.eq_ignore_ascii_case(label.as_str()))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledIssue {
    pub id: String,
    pub title: String,
    pub body: String,
    pub label: Option<Label>,
    pub source_repo: Option<String>,
}

impl LabeledIssue {
    pub fn new(id: impl Into<String>, label: Option<Label>, title: impl Into<String>, body: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            title: title.into(),
            body: body.into(),
            label,
            source_repo: None,
        }
    }

    pub fn raw(&self) -> RawIssue {
        RawIssue::new(self.title.clone(), self.body.clone())
    }

    pub fn text(&self) -> String {
        concatenate(&self.raw())
    }

    pub fn tokens(&self) -> TokenSequence {
        tokenize(&self.text())
    }
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("duplicate issue id {0:?}")]
    DuplicateId(String),
    #[error("issue {0:?} has no label")]
    Unlabeled(String),
    #[error("class {label} has only {available} issues, {requested} requested")]
    InsufficientClass {
        label: Label,
        available: usize,
        requested: usize,
    },
    #[error("k must be at least 2, got {0}")]
    InvalidK(usize),
    #[error("{0}")]
    Csv(String),
    #[error("unknown labels at {}", format_rows(.0))]
    UnknownLabels(Vec<(u64, String)>),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn format_rows(rows: &[(u64, String)]) -> String {
    rows.iter()
        .map(|(row, label)| format!("line {row} ({label:?})"))
        .collect::<Vec<_>>()
        .join(", ")
}

/// An ordered collection of issues with unique ids.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dataset {
    issues: Vec<LabeledIssue>,
    pub provenance: String,
}

impl Dataset {
    pub fn new(issues: Vec<LabeledIssue>, provenance: impl Into<String>) -> Result<Self, DatasetError> {
        let mut seen = BTreeSet::new();
        for issue in &issues {
            if !seen.insert(issue.id.as_str()) {
                return Err(DatasetError::DuplicateId(issue.id.clone()));
            }
        }
        Ok(Self {
            issues,
            provenance: provenance.into(),
        })
    }

    pub fn issues(&self) -> &[LabeledIssue] {
        &self.issues
    }

    pub fn len(&self) -> usize {
        self.issues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.issues.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, LabeledIssue> {
        self.issues.iter()
    }

    /// Issue count per canonical label; unlabeled issues are not counted.
    pub fn class_histogram(&self) -> BTreeMap<Label, usize> {
        let mut hist = BTreeMap::new();
        for label in self.issues.iter().filter_map(|i| i.label) {
            *hist.entry(label).or_insert(0) += 1;
        }
        hist
    }

    /// Share of each label among labeled issues.
    pub fn class_proportions(&self) -> BTreeMap<Label, f64> {
        let hist = self.class_histogram();
        let total: usize = hist.values().sum();
        hist.into_iter()
            .map(|(l, c)| (l, if total == 0 { 0.0 } else { c as f64 / total as f64 }))
            .collect()
    }

    /// `(tokens, label name)` pairs for training. Fails on unlabeled issues.
    pub fn training_corpus(&self) -> Result<Vec<(TokenSequence, String)>, DatasetError> {
        self.issues
            .iter()
            .map(|issue| match issue.label {
                Some(label) => Ok((issue.tokens(), label.as_str().to_owned())),
                None => Err(DatasetError::Unlabeled(issue.id.clone())),
            })
            .collect()
    }

    /// Issues whose ids satisfy `keep`, in the original order.
    pub fn filter(&self, keep: impl Fn(&LabeledIssue) -> bool) -> Dataset {
        Dataset {
            issues: self.issues.iter().filter(|i| keep(i)).cloned().collect(),
            provenance: self.provenance.clone(),
        }
    }

    /// Labeled members of one class, sorted by id.
    fn members_by_id(&self, label: Label) -> Vec<&LabeledIssue> {
        let mut members: Vec<_> = self.issues.iter().filter(|i| i.label == Some(label)).collect();
        members.sort_by(|a, b| a.id.cmp(&b.id));
        members
    }
}

impl<'a> IntoIterator for &'a Dataset {
    type Item = &'a LabeledIssue;
    type IntoIter = std::slice::Iter<'a, LabeledIssue>;

    fn into_iter(self) -> Self::IntoIter {
        self.issues.iter()
    }
}

/// Draws `per_class` issues of every canonical label without replacement.
///
/// Each class is sorted by id and shuffled with one generator seeded by
/// `seed`, visiting classes in canonical order; the first `per_class`
/// members are kept. Output groups classes in canonical order.
pub fn balance(dataset: &Dataset, per_class: usize, seed: u64) -> Result<Dataset, DatasetError> {
    let mut rng = SeededRng::new(seed);
    let mut issues = Vec::with_capacity(per_class * Label::ALL.len());
    for label in Label::ALL {
        let mut members = dataset.members_by_id(label);
        if members.len() < per_class {
            return Err(DatasetError::InsufficientClass {
                label,
                available: members.len(),
                requested: per_class,
            });
        }
        rng.shuffle(&mut members);
        issues.extend(members.into_iter().take(per_class).cloned());
    }
    Ok(Dataset {
        issues,
        provenance: format!(
            "balanced sample of {per_class} per class (seed {seed}) from: {}",
            dataset.provenance
        ),
    })
}

/// Uniform sample of `size` issues without replacement, keyed on sorted ids.
pub fn sample(issues: &[&LabeledIssue], size: usize, seed: u64) -> Vec<LabeledIssue> {
    let mut pool: Vec<&LabeledIssue> = issues.to_vec();
    pool.sort_by(|a, b| a.id.cmp(&b.id));
    SeededRng::new(seed).shuffle(&mut pool);
    pool.into_iter().take(size).cloned().collect()
}

/// Assignment of every issue id to one of `k` folds.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub assignment: BTreeMap<String, usize>,
}

impl FoldPlan {
    pub fn fold_of(&self, id: &str) -> Option<usize> {
        self.assignment.get(id).copied()
    }

    /// `(train, test)` split for fold `i`, preserving dataset order.
    pub fn split(&self, dataset: &Dataset, fold: usize) -> (Dataset, Dataset) {
        let in_fold = |issue: &LabeledIssue| self.fold_of(&issue.id) == Some(fold);
        (dataset.filter(|i| !in_fold(i)), dataset.filter(in_fold))
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &fold in self.assignment.values() {
            sizes[fold] += 1;
        }
        sizes
    }
}

/// Stratified k-fold assignment.
///
/// Classes are visited in canonical order; each class is sorted by id,
/// shuffled, and dealt round-robin. The deal continues where the previous
/// class stopped, so overall fold sizes stay balanced as well.
pub fn stratified_kfold(dataset: &Dataset, k: usize, seed: u64) -> Result<FoldPlan, DatasetError> {
    if k < 2 {
        return Err(DatasetError::InvalidK(k));
    }
    if let Some(issue) = dataset.iter().find(|i| i.label.is_none()) {
        return Err(DatasetError::Unlabeled(issue.id.clone()));
    }
    let mut rng = SeededRng::new(seed);
    let mut assignment = BTreeMap::new();
    let mut next = 0usize;
    for label in Label::ALL {
        let mut members = dataset.members_by_id(label);
        if members.is_empty() {
            continue;
        }
        if members.len() < k {
            return Err(DatasetError::InsufficientClass {
                label,
                available: members.len(),
                requested: k,
            });
        }
        rng.shuffle(&mut members);
        for issue in members {
            assignment.insert(issue.id.clone(), next % k);
            next += 1;
        }
    }
    Ok(FoldPlan { k, assignment })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pool(per_class: usize) -> Dataset {
        let mut issues = Vec::new();
        for label in Label::ALL {
            for i in 0..per_class {
                issues.push(LabeledIssue::new(format!("{label}-{i:04}"), Some(label), format!("{label} {i}"), ""));
            }
        }
        Dataset::new(issues, "test pool").unwrap()
    }

    #[test]
    fn label_normalization() {
        assert_eq!(normalize_label("Bug"), Some(Label::Bug));
        assert_eq!(normalize_label("enhancement"), Some(Label::Enhancement));
        assert_eq!(normalize_label("QUESTION"), Some(Label::Question));
        assert_eq!(normalize_label("kind/bug"), None);
        assert_eq!(normalize_label("feature"), None);
        assert_eq!(normalize_label(""), None);
    }

    #[test]
    fn duplicate_ids_rejected() {
        let a = LabeledIssue::new("1", Some(Label::Bug), "a", "");
        assert!(matches!(
            Dataset::new(vec![a.clone(), a], ""),
            Err(DatasetError::DuplicateId(id)) if id == "1"
        ));
    }

    #[test]
    fn balance_examples() {
        let data = pool(25);
        let out = balance(&data, 10, 7).unwrap();
        assert_eq!(out.len(), 30);
        assert!(out.class_histogram().values().all(|&c| c == 10));
        assert_eq!(out, balance(&data, 10, 7).unwrap());
        assert_ne!(out, balance(&data, 10, 8).unwrap());
        assert!(balance(&data, 0, 1).unwrap().is_empty());
        let err = balance(&data, 26, 1).unwrap_err();
        assert!(matches!(err, DatasetError::InsufficientClass { label: Label::Bug, available: 25, .. }));
        assert!(err.to_string().contains("bug"));
    }

    #[test]
    fn kfold_exact_divisibility() {
        let plan = stratified_kfold(&pool(10), 10, 1).unwrap();
        for fold in 0..10 {
            let (_, test) = plan.split(&pool(10), fold);
            assert_eq!(test.len(), 3);
            assert!(test.class_histogram().values().all(|&c| c == 1));
        }
    }

    #[test]
    fn kfold_uneven_sizes() {
        let mut issues = pool(10).issues().to_vec();
        issues.push(LabeledIssue::new("extra", Some(Label::Question), "q", ""));
        let data = Dataset::new(issues, "").unwrap();
        let plan = stratified_kfold(&data, 10, 3).unwrap();
        assert_eq!(plan.assignment.len(), 31);
        let sizes = plan.fold_sizes();
        assert_eq!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap(), 1);
    }

    #[test]
    fn kfold_preconditions() {
        assert!(matches!(stratified_kfold(&pool(10), 1, 0), Err(DatasetError::InvalidK(1))));
        assert!(matches!(
            stratified_kfold(&pool(5), 10, 0),
            Err(DatasetError::InsufficientClass { available: 5, requested: 10, .. })
        ));
        let unlabeled = Dataset::new(vec![LabeledIssue::new("u", None, "t", "")], "").unwrap();
        assert!(matches!(stratified_kfold(&unlabeled, 2, 0), Err(DatasetError::Unlabeled(_))));
    }

    #[test]
    fn kfold_ignores_row_order() {
        let data = pool(12);
        let mut reversed = data.issues().to_vec();
        reversed.reverse();
        let reversed = Dataset::new(reversed, "").unwrap();
        assert_eq!(
            stratified_kfold(&data, 4, 9).unwrap(),
            stratified_kfold(&reversed, 4, 9).unwrap()
        );
    }
}
