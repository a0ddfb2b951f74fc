//! tf-idf document-term matrix for external baselines.
//!
//! `weight(t, d) = tf(t, d) * ln(N / df(t))`, where `tf` is the raw count of
//! `t` among the tokens of the concatenated title and body, `df` the number
//! of documents containing `t` and `N` the number of documents. No
//! smoothing, so terms present in every document weigh zero.
//!
//! The matrix file has one line per issue: the label followed by
//! `term_index:weight` pairs in ascending index order (zero weights are
//! written too). Term indices are 0-based positions in the lexicographically
//! sorted vocabulary, listed in the `<matrix>.vocab` sidecar as
//! `index<TAB>term` lines.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use super::{Dataset, DatasetError, Label};

/// `(term index, weight)` pairs of one document, by term index.
pub type SparseRow = Vec<(usize, f64)>;

#[derive(Clone, Debug, PartialEq)]
pub struct TfidfMatrix {
    pub terms: Vec<String>,
    pub rows: Vec<(Option<Label>, SparseRow)>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TfidfSummary {
    pub documents: usize,
    pub terms: usize,
    pub entries: usize,
    pub matrix_path: PathBuf,
    pub vocab_path: PathBuf,
}

pub fn tfidf_matrix(dataset: &Dataset) -> TfidfMatrix {
    let counts: Vec<BTreeMap<String, u64>> = dataset
        .iter()
        .map(|issue| {
            let mut tf = BTreeMap::new();
            for token in issue.tokens().iter() {
                *tf.entry(token.to_owned()).or_insert(0) += 1;
            }
            tf
        })
        .collect();
    let mut df: BTreeMap<&str, u64> = BTreeMap::new();
    for doc in &counts {
        for term in doc.keys() {
            *df.entry(term).or_insert(0) += 1;
        }
    }
    let terms: Vec<String> = df.keys().map(|t| t.to_string()).collect::<BTreeSet<_>>().into_iter().collect();
    let index: BTreeMap<&str, usize> = terms.iter().enumerate().map(|(i, t)| (t.as_str(), i)).collect();
    let n = counts.len() as f64;
    let rows = dataset
        .iter()
        .zip(&counts)
        .map(|(issue, tf)| {
            let row = tf
                .iter()
                .map(|(term, &count)| {
                    let idf = (n / df[term.as_str()] as f64).ln();
                    (index[term.as_str()], count as f64 * idf)
                })
                .collect();
            (issue.label, row)
        })
        .collect();
    TfidfMatrix { terms, rows }
}

fn sidecar(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".vocab");
    PathBuf::from(name)
}

pub fn export_tfidf(dataset: &Dataset, path: impl AsRef<Path>) -> Result<TfidfSummary, DatasetError> {
    let path = path.as_ref();
    let matrix = tfidf_matrix(dataset);
    let mut out = BufWriter::new(File::create(path)?);
    let mut entries = 0;
    for (label, row) in &matrix.rows {
        out.write_all(label.map_or("unlabeled", |l| l.as_str()).as_bytes())?;
        for (index, weight) in row {
            write!(out, " {index}:{weight}")?;
        }
        out.write_all(b"\n")?;
        entries += row.len();
    }
    out.flush()?;

    let vocab_path = sidecar(path);
    let mut vocab = BufWriter::new(File::create(&vocab_path)?);
    for (i, term) in matrix.terms.iter().enumerate() {
        writeln!(vocab, "{i}\t{term}")?;
    }
    vocab.flush()?;

    Ok(TfidfSummary {
        documents: matrix.rows.len(),
        terms: matrix.terms.len(),
        entries,
        matrix_path: path.to_path_buf(),
        vocab_path,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::LabeledIssue;

    fn data(docs: &[&str]) -> Dataset {
        Dataset::new(
            docs.iter()
                .enumerate()
                .map(|(i, d)| LabeledIssue::new(i.to_string(), Some(Label::Bug), *d, ""))
                .collect(),
            "",
        )
        .unwrap()
    }

    #[test]
    fn term_in_every_document_weighs_zero() {
        let m = tfidf_matrix(&data(&["crash app", "crash save"]));
        let crash = m.terms.iter().position(|t| t == "crash").unwrap();
        for (_, row) in &m.rows {
            let w = row.iter().find(|(i, _)| *i == crash).unwrap().1;
            assert_eq!(w, 0.0);
        }
    }

    #[test]
    fn single_document() {
        let m = tfidf_matrix(&data(&["bug bug"]));
        assert_eq!(m.rows[0].1, vec![(0, 0.0)]);
    }

    #[test]
    fn sidecar_name() {
        assert_eq!(sidecar(Path::new("/tmp/m.svm")), PathBuf::from("/tmp/m.svm.vocab"));
    }
}
