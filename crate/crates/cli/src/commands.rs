use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use tagger_core::classifier::{self, train_with_labels, Model, ModelFormatError, TrainConfig};
use tagger_core::confounds::{build_treatment, detect_code_snippet, detect_language, LanguageProfile, TreatmentError, TreatmentSpec};
use tagger_core::dataset::{self, Dataset, DatasetError, Label};
use tagger_core::evaluation::{self, Aggregation, CvOptions, EvalError, EvaluationReport};
use tagger_webhook::{
    ConfigError, HttpClientConfig, HttpPlatformClient, ServiceConfig, ServiceEnv, ServiceState,
};

use crate::args::*;

/// Failure with the process exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

pub const EXIT_VALIDATION: u8 = 1;
pub const EXIT_RUNTIME: u8 = 2;

impl CliError {
    pub fn validation(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_VALIDATION,
            message: message.into(),
        }
    }

    pub fn runtime(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_RUNTIME,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

type CliResult = Result<(), CliError>;

fn io_error(action: &str, path: &Path, err: impl fmt::Display) -> CliError {
    CliError::runtime(format!("{action} {}: {err}", path.display()))
}

fn require_file(path: &Path) -> CliResult {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::validation(format!("input file not found: {}", path.display())))
    }
}

fn dataset_error(path: &Path, err: DatasetError) -> CliError {
    match err {
        DatasetError::Io(e) => io_error("reading", path, e),
        other => CliError::validation(format!("{}: {other}", path.display())),
    }
}

fn load_dataset(path: &Path) -> Result<Dataset, CliError> {
    require_file(path)?;
    let report = dataset::load_csv(path).map_err(|e| dataset_error(path, e))?;
    if report.multi_label_skipped > 0 {
        eprintln!(
            "note: skipped {} multi-label rows in {}",
            report.multi_label_skipped,
            path.display()
        );
    }
    Ok(report.dataset)
}

fn load_model(path: &Path) -> Result<Model, CliError> {
    classifier::load(path).map_err(|e| match e {
        ModelFormatError::Io(e) => io_error("reading model", path, e),
        other => CliError::runtime(format!("model {} is unreadable: {other}", path.display())),
    })
}

fn validated(config: TrainConfig) -> Result<TrainConfig, CliError> {
    config
        .validate()
        .map_err(|e| CliError::validation(e.to_string()))?;
    Ok(config)
}

fn write_file(path: &Path, contents: &str) -> CliResult {
    fs::write(path, contents).map_err(|e| io_error("writing", path, e))
}

fn training_corpus(data: &Dataset, path: &Path) -> Result<Vec<(tagger_core::text::TokenSequence, String)>, CliError> {
    data.training_corpus().map_err(|e| dataset_error(path, e))
}

pub fn train(cmd: TrainCmd) -> CliResult {
    let config = validated(cmd.train.config())?;
    let data = load_dataset(&cmd.input)?;
    let corpus = training_corpus(&data, &cmd.input)?;
    let (model, history) = train_with_labels(&corpus, &Label::names(), &config)
        .map_err(|e| CliError::validation(format!("training failed: {e}")))?;
    classifier::save(&model, &cmd.output).map_err(|e| io_error("writing model", &cmd.output, e))?;
    let size = fs::metadata(&cmd.output).map(|m| m.len()).unwrap_or(0);
    println!("trained on {} issues", corpus.len());
    println!("config: {}", config.fingerprint());
    println!("final loss: {:.6}", history.final_loss());
    println!("vocabulary: {} words", model.vocab().len());
    println!("model: {} ({} bytes)", cmd.output.display(), size);
    Ok(())
}

fn print_prediction(model: &Model, text: &str, out: &mut impl Write) -> std::io::Result<()> {
    let p = model.predict_text(text);
    let scores: Vec<String> = model
        .labels()
        .iter()
        .zip(&p.scores)
        .map(|(l, s)| format!("{l}={s:.9}"))
        .collect();
    writeln!(out, "{}\t{}", p.argmax_label, scores.join(" "))
}

pub fn predict(cmd: PredictCmd) -> CliResult {
    let model = load_model(&cmd.model)?;
    let stdout = std::io::stdout();
    let mut out = BufWriter::new(stdout.lock());
    let write_err = |e: std::io::Error| CliError::runtime(format!("writing output: {e}"));
    if let Some(text) = &cmd.text {
        print_prediction(&model, text, &mut out).map_err(write_err)?;
    }
    if let Some(path) = &cmd.file {
        require_file(path)?;
        let file = fs::File::open(path).map_err(|e| io_error("reading", path, e))?;
        for line in BufReader::new(file).lines() {
            let line = line.map_err(|e| io_error("reading", path, e))?;
            print_prediction(&model, &line, &mut out).map_err(write_err)?;
        }
    }
    out.flush().map_err(write_err)
}

fn eval_error(err: EvalError) -> CliError {
    match err {
        EvalError::Pool(msg) => CliError::runtime(msg),
        other => CliError::validation(other.to_string()),
    }
}

pub fn evaluate(cmd: EvaluateCmd) -> CliResult {
    let config = validated(cmd.train.config())?;
    let report = match cmd.protocol {
        ProtocolArg::Cv => {
            if cmd.test.is_some() {
                return Err(CliError::validation("--test applies only to --protocol holdout"));
            }
            if cmd.jobs == 0 {
                return Err(CliError::validation("--jobs must be at least 1"));
            }
            let data = load_dataset(&cmd.data)?;
            let options = CvOptions {
                aggregation: if cmd.per_fold {
                    Aggregation::PerFoldMean
                } else {
                    Aggregation::Pooled
                },
                jobs: cmd.jobs,
            };
            evaluation::cross_validate(&data, cmd.k.unwrap_or(10), &config, cmd.seed, options).map_err(eval_error)?
        }
        ProtocolArg::Holdout => {
            let test_path = cmd
                .test
                .as_ref()
                .ok_or_else(|| CliError::validation("--protocol holdout requires --test <CSV>"))?;
            if cmd.k.is_some() || cmd.per_fold {
                return Err(CliError::validation("--k and --per-fold apply only to --protocol cv"));
            }
            let train = load_dataset(&cmd.data)?;
            let test = load_dataset(test_path)?;
            evaluation::evaluate_holdout(&train, &test, &config).map_err(eval_error)?
        }
    };
    print!("{report}");
    if let Some(path) = &cmd.report {
        write_file(path, &report.to_json())?;
        println!("report: {}", path.display());
    }
    Ok(())
}

fn read_report(path: &Path) -> Result<EvaluationReport, CliError> {
    require_file(path)?;
    let text = fs::read_to_string(path).map_err(|e| io_error("reading", path, e))?;
    EvaluationReport::from_json(&text)
        .map_err(|e| CliError::validation(format!("{} is not an evaluation report: {e}", path.display())))
}

pub fn compare(cmd: CompareCmd) -> CliResult {
    let baseline = read_report(&cmd.baseline)?;
    let treatment = read_report(&cmd.treatment)?;
    let comparison = evaluation::compare_reports(&baseline, &treatment).map_err(eval_error)?;
    println!("treatment minus baseline, percentage points:");
    print!("{comparison}");
    Ok(())
}

fn load_profiles(dir: Option<&PathBuf>) -> Result<Vec<LanguageProfile>, CliError> {
    let Some(dir) = dir else {
        return Ok(LanguageProfile::bundled());
    };
    if !dir.is_dir() {
        return Err(CliError::validation(format!("profile directory not found: {}", dir.display())));
    }
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| io_error("reading", dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "tri"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(CliError::validation(format!("no .tri profiles in {}", dir.display())));
    }
    paths
        .iter()
        .map(|p| LanguageProfile::load(p).map_err(|e| CliError::validation(format!("{}: {e}", p.display()))))
        .collect()
}

fn treatment_error(err: TreatmentError) -> CliError {
    match err {
        TreatmentError::Dataset(DatasetError::Io(e)) => CliError::runtime(e.to_string()),
        other => CliError::validation(other.to_string()),
    }
}

pub fn dataset(cmd: DatasetCmd) -> CliResult {
    match cmd {
        DatasetCmd::Balance {
            input,
            output,
            per_class,
            seed,
        } => {
            let data = load_dataset(&input)?;
            let balanced = dataset::balance(&data, per_class, seed).map_err(|e| dataset_error(&input, e))?;
            dataset::save_csv(&balanced, &output).map_err(|e| dataset_error(&output, e))?;
            println!("wrote {} issues to {}", balanced.len(), output.display());
        }
        DatasetCmd::Kfold { input, output, k, seed } => {
            let data = load_dataset(&input)?;
            let plan = dataset::stratified_kfold(&data, k, seed).map_err(|e| dataset_error(&input, e))?;
            dataset::save_fold_plan(&plan, &output).map_err(|e| dataset_error(&output, e))?;
            let sizes: Vec<String> = plan.fold_sizes().iter().map(usize::to_string).collect();
            println!("wrote {k} folds to {} (sizes {})", output.display(), sizes.join(" "));
        }
        DatasetCmd::ExportTfidf { input, output } => {
            let data = load_dataset(&input)?;
            let summary = dataset::export_tfidf(&data, &output).map_err(|e| dataset_error(&output, e))?;
            println!(
                "wrote {} documents x {} terms ({} entries) to {}; vocabulary in {}",
                summary.documents,
                summary.terms,
                summary.entries,
                summary.matrix_path.display(),
                summary.vocab_path.display()
            );
        }
        DatasetCmd::ExportFasttext { input, output } => {
            let data = load_dataset(&input)?;
            let file = fs::File::create(&output).map_err(|e| io_error("writing", &output, e))?;
            let mut out = BufWriter::new(file);
            dataset::write_fasttext(&data, &mut out).map_err(|e| dataset_error(&output, e))?;
            out.flush().map_err(|e| io_error("writing", &output, e))?;
            println!("wrote {} lines to {}", data.len(), output.display());
        }
        DatasetCmd::Treatment {
            input,
            kind,
            size,
            seed,
            treatment_out,
            baseline_out,
            profiles,
        } => {
            let spec = TreatmentSpec::new(kind, size, seed).map_err(treatment_error)?;
            let profiles = load_profiles(profiles.as_ref())?;
            let data = load_dataset(&input)?;
            let (treatment, baseline) = build_treatment(&data, &spec, &profiles).map_err(treatment_error)?;
            dataset::save_csv(&treatment, &treatment_out).map_err(|e| dataset_error(&treatment_out, e))?;
            dataset::save_csv(&baseline, &baseline_out).map_err(|e| dataset_error(&baseline_out, e))?;
            println!("treatment ({kind}): {} issues -> {}", treatment.len(), treatment_out.display());
            println!("baseline: {} issues -> {}", baseline.len(), baseline_out.display());
        }
    }
    Ok(())
}

fn read_source(source: &TextSource) -> Result<String, CliError> {
    match (&source.text, &source.file) {
        (Some(text), _) => Ok(text.clone()),
        (None, Some(path)) => {
            require_file(path)?;
            fs::read_to_string(path).map_err(|e| io_error("reading", path, e))
        }
        (None, None) => Err(CliError::validation("one of --text or --file is required")),
    }
}

pub fn confounds(cmd: ConfoundsCmd) -> CliResult {
    match cmd {
        ConfoundsCmd::DetectLanguage { source, profiles } => {
            let profiles = load_profiles(profiles.as_ref())?;
            let text = read_source(&source)?;
            let d = detect_language(&text, &profiles);
            println!("{}\t{:.4}", d.language_tag, d.confidence);
        }
        ConfoundsCmd::DetectSnippet { source } => {
            println!("{}", detect_code_snippet(&read_source(&source)?));
        }
    }
    Ok(())
}

fn config_error(err: ConfigError) -> CliError {
    CliError::validation(err.to_string())
}

pub fn serve(cmd: ServeCmd) -> CliResult {
    let env = ServiceEnv::from_env().map_err(config_error)?;
    let model_path = cmd
        .model
        .or(env.model_path.clone())
        .ok_or_else(|| CliError::validation("no model: pass --model or set TAGGER_MODEL_PATH"))?;
    let model = Arc::new(load_model(&model_path)?);
    let key = fs::read(&env.private_key_path).map_err(|e| io_error("reading app key", &env.private_key_path, e))?;
    let mut client_config = HttpClientConfig::new(env.app_id.clone(), key);
    if let Some(base) = &env.api_base {
        client_config.api_base = base.clone();
    }
    let client = HttpPlatformClient::new(client_config).map_err(|e| CliError::validation(e.to_string()))?;
    let mut service_config = ServiceConfig::new(env.secret.clone().into_bytes());
    service_config.confidence_floor = env.confidence_floor;
    let state = Arc::new(ServiceState::new(model, Arc::new(client), service_config));
    let port = cmd.port.unwrap_or(env.port);

    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| CliError::runtime(format!("starting runtime: {e}")))?;
    runtime.block_on(async move {
        let address = format!("{}:{port}", cmd.host);
        let listener = tokio::net::TcpListener::bind(&address)
            .await
            .map_err(|e| CliError::runtime(format!("cannot listen on {address}: {e}")))?;
        let local = listener
            .local_addr()
            .map_err(|e| CliError::runtime(e.to_string()))?;
        tracing::info!(address = %local, model = %model_path.display(), fingerprint = state.model_fingerprint(), "serving");
        println!("listening on {local}");
        tagger_webhook::run(listener, state, tagger_webhook::shutdown_signal())
            .await
            .map_err(|e| CliError::runtime(format!("server error: {e}")))?;
        tracing::info!("shut down");
        Ok(())
    })
}
