//! CSV (`id,label,title,body`, RFC 4180), fastText line format and fold files.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use super::{normalize_label, Dataset, DatasetError, FoldPlan, LabeledIssue};
use crate::text::{tokenize, TokenSequence};

const REQUIRED: [&str; 4] = ["id", "label", "title", "body"];
const OPTIONAL_REPO: &str = "source_repo";
const FASTTEXT_PREFIX: &str = "__label__";

/// A loaded dataset plus what was dropped on the way in.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LoadReport {
    pub dataset: Dataset,
    /// Rows carrying more than one canonical label; these are skipped.
    pub multi_label_skipped: usize,
}

pub fn load_csv(path: impl AsRef<Path>) -> Result<LoadReport, DatasetError> {
    let path = path.as_ref();
    let file = File::open(path)?;
    read_csv(file, path.display().to_string())
}

fn csv_error(err: csv::Error) -> DatasetError {
    match err.position() {
        Some(pos) => DatasetError::Csv(format!("malformed CSV at line {}: {err}", pos.line())),
        None => DatasetError::Csv(format!("malformed CSV: {err}")),
    }
}

/// Canonical labels named by a raw label cell. `Ok(None)` for an empty cell.
fn parse_label_cell(cell: &str) -> Result<Option<Vec<super::Label>>, ()> {
    let parts: Vec<&str> = cell
        .split([',', ';', '|'])
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .collect();
    if parts.is_empty() {
        return Ok(None);
    }
    let mut labels = Vec::new();
    for part in parts {
        let label = normalize_label(part).ok_or(())?;
        if !labels.contains(&label) {
            labels.push(label);
        }
    }
    Ok(Some(labels))
}

pub fn read_csv(reader: impl Read, provenance: impl Into<String>) -> Result<LoadReport, DatasetError> {
    let mut csv = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = csv.headers().map_err(csv_error)?.clone();
    let column = |name: &str| headers.iter().position(|h| h.trim() == name);
    let mut idx = [0usize; 4];
    for (slot, name) in idx.iter_mut().zip(REQUIRED) {
        *slot = column(name)
            .ok_or_else(|| DatasetError::Csv(format!("missing column {name:?} in header")))?;
    }
    let repo_idx = column(OPTIONAL_REPO);

    let mut issues = Vec::new();
    let mut unknown = Vec::new();
    let mut multi_label_skipped = 0;
    for record in csv.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |i: usize| record.get(i).unwrap_or_default();
        let label = match parse_label_cell(field(idx[1])) {
            Err(()) => {
                unknown.push((line, field(idx[1]).to_owned()));
                continue;
            }
            Ok(None) => None,
            Ok(Some(labels)) if labels.len() > 1 => {
                multi_label_skipped += 1;
                continue;
            }
            Ok(Some(labels)) => Some(labels[0]),
        };
        issues.push(LabeledIssue {
            id: field(idx[0]).to_owned(),
            label,
            title: field(idx[2]).to_owned(),
            body: field(idx[3]).to_owned(),
            source_repo: repo_idx
                .map(|i| field(i).to_owned())
                .filter(|r| !r.is_empty()),
        });
    }
    if !unknown.is_empty() {
        return Err(DatasetError::UnknownLabels(unknown));
    }
    Ok(LoadReport {
        dataset: Dataset::new(issues, provenance)?,
        multi_label_skipped,
    })
}

pub fn save_csv(dataset: &Dataset, path: impl AsRef<Path>) -> Result<(), DatasetError> {
    write_csv(dataset, File::create(path)?)
}

/// Writes `id,label,title,body`, plus `source_repo` when any issue has one.
pub fn write_csv(dataset: &Dataset, writer: impl Write) -> Result<(), DatasetError> {
    let with_repo = dataset.iter().any(|i| i.source_repo.is_some());
    let mut csv = csv::WriterBuilder::new()
        .quote_style(csv::QuoteStyle::Necessary)
        .from_writer(writer);
    let mut header = REQUIRED.to_vec();
    if with_repo {
        header.push(OPTIONAL_REPO);
    }
    csv.write_record(&header).map_err(csv_error)?;
    for issue in dataset {
        let mut row = vec![
            issue.id.as_str(),
            issue.label.map_or("", |l| l.as_str()),
            issue.title.as_str(),
            issue.body.as_str(),
        ];
        if with_repo {
            row.push(issue.source_repo.as_deref().unwrap_or(""));
        }
        csv.write_record(&row).map_err(csv_error)?;
    }
    csv.flush()?;
    Ok(())
}

/// One `__label__<name> <text>` line per issue, newlines flattened to spaces.
pub fn write_fasttext(dataset: &Dataset, mut writer: impl Write) -> Result<(), DatasetError> {
    for issue in dataset {
        let label = issue
            .label
            .ok_or_else(|| DatasetError::Unlabeled(issue.id.clone()))?;
        let text = issue.text().replace(['\r', '\n'], " ");
        writeln!(writer, "{FASTTEXT_PREFIX}{label} {text}")?;
    }
    Ok(())
}

/// Reads fastText supervised lines. The first `__label__` token names the
/// class; blank lines are skipped, lines without a label are an error.
pub fn read_fasttext(reader: impl Read) -> Result<Vec<(TokenSequence, String)>, DatasetError> {
    let mut corpus = Vec::new();
    for (n, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut label = None;
        let mut rest = Vec::new();
        for word in line.split_whitespace() {
            match word.strip_prefix(FASTTEXT_PREFIX) {
                Some(name) if !name.is_empty() => {
                    label.get_or_insert_with(|| name.to_owned());
                }
                _ => rest.push(word),
            }
        }
        let label = label
            .ok_or_else(|| DatasetError::Csv(format!("line {}: missing {FASTTEXT_PREFIX} prefix", n + 1)))?;
        corpus.push((tokenize(&rest.join(" ")), label));
    }
    Ok(corpus)
}

/// `id,fold` rows, sorted by id.
pub fn save_fold_plan(plan: &FoldPlan, path: impl AsRef<Path>) -> Result<(), DatasetError> {
    let mut csv = csv::Writer::from_writer(File::create(path)?);
    csv.write_record(["id", "fold"]).map_err(csv_error)?;
    for (id, fold) in &plan.assignment {
        csv.write_record([id.as_str(), &fold.to_string()]).map_err(csv_error)?;
    }
    csv.flush()?;
    Ok(())
}

pub fn load_fold_plan(path: impl AsRef<Path>, k: usize) -> Result<FoldPlan, DatasetError> {
    let mut csv = csv::Reader::from_reader(File::open(path)?);
    let mut assignment = BTreeMap::new();
    for record in csv.records() {
        let record = record.map_err(csv_error)?;
        let fold: usize = record
            .get(1)
            .and_then(|f| f.parse().ok())
            .filter(|&f| f < k)
            .ok_or_else(|| DatasetError::Csv(format!("bad fold in row {:?}", record)))?;
        assignment.insert(record.get(0).unwrap_or_default().to_owned(), fold);
    }
    Ok(FoldPlan { k, assignment })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Label;

    fn read(text: &str) -> Result<LoadReport, DatasetError> {
        read_csv(text.as_bytes(), "inline")
    }

    #[test]
    fn three_rows() {
        let report = read(
            "id,label,title,body\n1,bug,Crash,App dies\n2,enhancement,Dark mode,\n3,Question,How?,see docs\n",
        )
        .unwrap();
        let data = report.dataset;
        assert_eq!(data.len(), 3);
        assert_eq!(data.issues()[2].label, Some(Label::Question));
        assert_eq!(data.issues()[1].body, "");
    }

    #[test]
    fn unknown_label_names_the_row() {
        let err = read("id,label,title,body\n1,bug,a,b\n2,feature,c,d\n3,bogus,e,f\n").unwrap_err();
        match &err {
            DatasetError::UnknownLabels(rows) => {
                assert_eq!(rows, &vec![(3, "feature".to_string()), (4, "bogus".to_string())]);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(err.to_string().contains("line 3 (\"feature\")"));
    }

    #[test]
    fn multiline_body_is_preserved() {
        let body = "Steps:\n1. open \"file\"\n2. save, then crash\r\n";
        let text = format!("id,label,title,body\n7,bug,Crash,\"{}\"\n", body.replace('"', "\"\""));
        let data = read(&text).unwrap().dataset;
        assert_eq!(data.issues()[0].body.as_bytes(), body.as_bytes());
    }

    #[test]
    fn malformed_csv_reports_line() {
        let err = read("id,label,title,body\n1,bug,a,b\n2,bug,only-three\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 3"), "{msg}");
        assert!(matches!(read("id,title\n"), Err(DatasetError::Csv(_))));
    }

    #[test]
    fn multi_label_rows_are_skipped_and_counted() {
        let report = read("id,label,title,body\n1,bug;question,a,b\n2,bug,c,d\n3,bug|bug,e,f\n").unwrap();
        assert_eq!(report.multi_label_skipped, 1);
        assert_eq!(report.dataset.len(), 2);
    }

    #[test]
    fn fasttext_lines() {
        let mut issue = LabeledIssue::new("1", Some(Label::Bug), "Crash", "line one\nline two");
        issue.source_repo = Some("o/r".into());
        let data = Dataset::new(vec![issue], "").unwrap();
        let mut out = Vec::new();
        write_fasttext(&data, &mut out).unwrap();
        assert_eq!(String::from_utf8(out.clone()).unwrap(), "__label__bug Crash line one line two\n");

        let corpus = read_fasttext(out.as_slice()).unwrap();
        assert_eq!(corpus[0].1, "bug");
        assert_eq!(corpus[0].0, tokenize("crash line one line two"));
        assert!(read_fasttext("no label here\n".as_bytes()).is_err());
    }
}
