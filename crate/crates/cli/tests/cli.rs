use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpStream;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};
use std::time::Duration;

use tagger_core::dataset::save_csv;
use tagger_core::evaluation::EvaluationReport;
use tagger_core::synthetic::separable_corpus;

const KEY: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../webhook/tests/fixtures/test_app_key.pem");

fn tagger(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_issue-tagger"))
        .args(args)
        .env_remove("TAGGER_WEBHOOK_SECRET")
        .output()
        .unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

struct Workspace {
    dir: tempfile::TempDir,
}

impl Workspace {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        save_csv(&separable_corpus(30, 1), dir.path().join("data.csv")).unwrap();
        Self { dir }
    }

    fn path(&self, name: &str) -> String {
        self.dir.path().join(name).display().to_string()
    }

    fn trained(&self) -> String {
        let model = self.path("model.bin");
        let out = tagger(&["train", "-i", &self.path("data.csv"), "-o", &model, "--min-count", "1", "--dim", "16"]);
        assert!(out.status.success(), "{}", stderr(&out));
        model
    }
}

#[test]
fn help_lists_flags_and_exits_zero() {
    let out = tagger(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
    for command in ["train", "predict", "evaluate", "compare", "dataset", "confounds", "serve"] {
        assert!(stdout(&out).contains(command));
    }
    let out = tagger(&["evaluate", "--help"]);
    for flag in ["--protocol", "--test", "--k", "--seed", "--report", "--per-fold", "--jobs", "--min-count"] {
        assert!(stdout(&out).contains(flag), "{flag}");
    }
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(tagger(&[]).status.code(), Some(1));
    assert_eq!(tagger(&["train", "--bogus"]).status.code(), Some(1));
    assert_eq!(tagger(&["predict", "-m", "x.bin"]).status.code(), Some(1));
    let out = tagger(&["train", "-i", "/no/such/file.csv", "-o", "m.bin"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("/no/such/file.csv"));
}

#[test]
fn train_then_predict() {
    let ws = Workspace::new();
    let model = ws.trained();
    let out = tagger(&["predict", "-m", &model, "--text", "the app crashes with an exception"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let line = stdout(&out);
    let (label, scores) = line.trim_end().split_once('\t').unwrap();
    assert_eq!(label, "bug");
    let total: f64 = scores
        .split(' ')
        .map(|s| s.split_once('=').unwrap().1.parse::<f64>().unwrap())
        .sum();
    assert!((total - 1.0).abs() < 1e-6);

    let texts = ws.path("texts.txt");
    std::fs::write(&texts, "how do I\n\nplease add an option\n").unwrap();
    let out = tagger(&["predict", "-m", &model, "--file", &texts]);
    assert_eq!(stdout(&out).lines().count(), 3);
    assert!(stdout(&out).lines().nth(1).unwrap().contains("0.333333333"));
}

#[test]
fn unreadable_model_exits_two() {
    let ws = Workspace::new();
    let out = tagger(&["predict", "-m", &ws.path("data.csv"), "--text", "x"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn evaluate_both_protocols_and_compare() {
    let ws = Workspace::new();
    let data = ws.path("data.csv");
    let out = tagger(&["evaluate", "-d", &data, "-k", "3", "--report", &ws.path("cv.json"), "--min-count", "1"]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("macro F-measure"));
    let report = EvaluationReport::from_json(&std::fs::read_to_string(ws.path("cv.json")).unwrap()).unwrap();
    assert_eq!(report.folds, Some(3));
    assert_eq!(report.confusion.total(), 90);

    let out = tagger(&["evaluate", "-d", &data, "--protocol", "holdout", "--test", &data, "--report", &ws.path("ho.json"), "--min-count", "1"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let out = tagger(&["compare", "--baseline", &ws.path("cv.json"), "--treatment", &ws.path("ho.json")]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("F-measure"));

    assert_eq!(tagger(&["evaluate", "-d", &data, "--protocol", "holdout"]).status.code(), Some(1));
    assert_eq!(tagger(&["evaluate", "-d", &data, "--test", &data]).status.code(), Some(1));
    assert_eq!(tagger(&["evaluate", "-d", &data, "--dim", "0"]).status.code(), Some(1));
}

#[test]
fn dataset_commands_write_files() {
    let ws = Workspace::new();
    let data = ws.path("data.csv");
    let ok = |args: &[&str]| {
        let out = tagger(args);
        assert!(out.status.success(), "{args:?}: {}", stderr(&out));
    };
    ok(&["dataset", "balance", "-i", &data, "-o", &ws.path("b.csv"), "--per-class", "5"]);
    assert_eq!(std::fs::read_to_string(ws.path("b.csv")).unwrap().lines().count(), 16);
    ok(&["dataset", "kfold", "-i", &data, "-o", &ws.path("folds.csv"), "-k", "3"]);
    assert!(std::fs::read_to_string(ws.path("folds.csv")).unwrap().starts_with("id,fold"));
    ok(&["dataset", "export-tfidf", "-i", &data, "-o", &ws.path("m.mtx")]);
    assert!(Path::new(&ws.path("m.mtx.vocab")).exists());
    ok(&["dataset", "export-fasttext", "-i", &data, "-o", &ws.path("ft.txt")]);
    assert!(std::fs::read_to_string(ws.path("ft.txt")).unwrap().starts_with("__label__"));
    ok(&[
        "dataset", "treatment", "-i", &data, "--kind", "consistent_language", "--size", "10",
        "--treatment-out", &ws.path("t.csv"), "--baseline-out", &ws.path("base.csv"),
    ]);
    for arm in ["t.csv", "base.csv"] {
        assert_eq!(std::fs::read_to_string(ws.path(arm)).unwrap().lines().count(), 11);
    }
    let out = tagger(&[
        "dataset", "treatment", "-i", &data, "--kind", "snippet", "--size", "10",
        "--treatment-out", &ws.path("t.csv"), "--baseline-out", &ws.path("base.csv"),
    ]);
    assert_eq!(out.status.code(), Some(1));
    ok(&["dataset", "balance", "-i", &data, "-o", &ws.path("empty.csv"), "--per-class", "0"]);
    assert_eq!(std::fs::read_to_string(ws.path("empty.csv")).unwrap().lines().count(), 1);
    let out = tagger(&["dataset", "balance", "-i", &data, "-o", &ws.path("x.csv"), "--per-class", "31"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn confound_detectors() {
    let out = tagger(&["confounds", "detect-language", "--text", "The quick brown fox jumps over the lazy dog and runs away"]);
    assert!(stdout(&out).starts_with("eng\t"));
    let out = tagger(&["confounds", "detect-snippet", "--text", "see\n```\ncode\n```"]);
    assert_eq!(stdout(&out).trim(), "true");
    let out = tagger(&["confounds", "detect-snippet", "--text", "inline `code` only"]);
    assert_eq!(stdout(&out).trim(), "false");
}

#[test]
fn serve_requires_secret_from_environment() {
    let ws = Workspace::new();
    let model = ws.trained();
    let out = tagger(&["serve", "-m", &model, "--port", "0"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("TAGGER_WEBHOOK_SECRET"));
    assert_eq!(tagger(&["serve", "--secret", "x"]).status.code(), Some(1));
}

fn http(addr: &str, request: &str) -> String {
    let mut stream = TcpStream::connect(addr).unwrap();
    stream.set_read_timeout(Some(Duration::from_secs(5))).unwrap();
    stream.write_all(request.as_bytes()).unwrap();
    let mut response = String::new();
    stream.read_to_string(&mut response).unwrap();
    response
}

#[test]
fn serve_answers_and_stops_on_sigint() {
    let ws = Workspace::new();
    let model: PathBuf = ws.trained().into();
    let mut child = Command::new(env!("CARGO_BIN_EXE_issue-tagger"))
        .args(["serve", "--host", "127.0.0.1", "--port", "0"])
        .env("TAGGER_WEBHOOK_SECRET", "cli-test-secret")
        .env("TAGGER_APP_ID", "1")
        .env("TAGGER_APP_PRIVATE_KEY_PATH", KEY)
        .env("TAGGER_MODEL_PATH", &model)
        .env("TAGGER_API_BASE", "http://127.0.0.1:9")
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let mut first = String::new();
    BufReader::new(child.stdout.take().unwrap()).read_line(&mut first).unwrap();
    let addr = first.trim().strip_prefix("listening on ").unwrap().to_owned();

    let health = http(&addr, "GET /healthz HTTP/1.1\r\nhost: x\r\nconnection: close\r\n\r\n");
    assert!(health.starts_with("HTTP/1.1 200"), "{health}");
    assert!(health.contains("model_fingerprint"));
    let body = "{}";
    let unsigned = http(
        &addr,
        &format!(
            "POST /webhook HTTP/1.1\r\nhost: x\r\nx-github-event: issues\r\nx-github-delivery: 1\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
            body.len()
        ),
    );
    assert!(unsigned.starts_with("HTTP/1.1 401"), "{unsigned}");

    let status = Command::new("kill").args(["-INT", &child.id().to_string()]).status().unwrap();
    assert!(status.success());
    let out = child.wait_with_output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(!stderr(&out).contains("cli-test-secret"));
}
