//! Linear bag-of-features classifier.
//!
//! A document's hidden vector is the count-weighted mean of its feature rows
//! in the input matrix `A`; logits are `Bᵀ · hidden`; probabilities come from
//! a softmax (flat, or factored along a Huffman tree). Training minimizes the
//! mean negative log-likelihood of the gold labels with per-example SGD.

mod io;
mod softmax;
mod vocab;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::SeededRng;
use crate::text::{featurize, tokenize, FeatureBag, FeatureConfig, TokenSequence};

pub use io::{load, model_fingerprint, save, ModelFormatError, FORMAT_VERSION, MAGIC};
pub use softmax::{softmax, HuffmanTree};
pub use vocab::{build_vocabulary, Vocabulary};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossMode {
    FlatSoftmax,
    HierarchicalSoftmax,
}

impl LossMode {
    fn tag(self) -> &'static str {
        match self {
            LossMode::FlatSoftmax => "softmax",
            LossMode::HierarchicalSoftmax => "hs",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub dim: usize,
    pub epochs: usize,
    /// Initial learning rate; decays linearly to zero over training.
    pub learning_rate: f64,
    pub min_count: u64,
    pub word_ngrams: usize,
    pub char_ngram_min: usize,
    pub char_ngram_max: usize,
    pub hashing_buckets: u64,
    pub loss_mode: LossMode,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            dim: 100,
            epochs: 5,
            learning_rate: 0.1,
            min_count: 14,
            word_ngrams: 1,
            char_ngram_min: 3,
            char_ngram_max: 6,
            hashing_buckets: 2_000_000,
            loss_mode: LossMode::FlatSoftmax,
            seed: crate::rng::DEFAULT_SEED,
        }
    }
}

impl TrainConfig {
    /// Settings for small deployments: frequency-pruned words only, no
    /// hashed subword or word n-gram rows.
    pub fn compact() -> Self {
        Self {
            char_ngram_min: 0,
            char_ngram_max: 0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |msg: String| Err(TrainError::InvalidConfig(msg));
        if self.dim == 0 {
            return bad("dim must be at least 1".into());
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1".into());
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad(format!("learning rate must be positive, got {}", self.learning_rate));
        }
        if self.min_count == 0 {
            return bad("min_count must be at least 1".into());
        }
        if self.word_ngrams == 0 {
            return bad("word_ngrams must be at least 1".into());
        }
        let (lo, hi) = (self.char_ngram_min, self.char_ngram_max);
        if !((lo == 0 && hi == 0) || (1 <= lo && lo <= hi)) {
            return bad(format!("invalid character n-gram range {lo}..={hi}"));
        }
        if (hi > 0 || self.word_ngrams > 1) && self.hashing_buckets == 0 {
            return bad("hashed features need at least one bucket".into());
        }
        Ok(())
    }

    /// Feature extraction settings. Buckets collapse to zero when no hashed
    /// features are produced, so the input matrix holds only word rows.
    pub fn feature_config(&self) -> FeatureConfig {
        let hashed = self.char_ngram_max > 0 || self.word_ngrams > 1;
        FeatureConfig {
            min_n: self.char_ngram_min,
            max_n: self.char_ngram_max,
            word_ngrams: self.word_ngrams,
            buckets: if hashed { self.hashing_buckets } else { 0 },
        }
    }

    /// Stable one-line summary of every setting.
    pub fn fingerprint(&self) -> String {
        format!(
            "dim={} epoch={} lr={} minCount={} wordNgrams={} minn={} maxn={} bucket={} loss={} seed={}",
            self.dim,
            self.epochs,
            self.learning_rate,
            self.min_count,
            self.word_ngrams,
            self.char_ngram_min,
            self.char_ngram_max,
            self.hashing_buckets,
            self.loss_mode.tag(),
            self.seed
        )
    }
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error("training corpus is empty")]
    EmptyCorpus,
    #[error("example {index} has unknown label {label:?}")]
    UnknownLabel { index: usize, label: String },
    #[error("label {0:?} has no training examples")]
    MissingLabel(String),
    #[error("label set must be nonempty and unique")]
    BadLabelSet,
}

/// Row-major dense `f32` matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f32>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f32>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data length mismatch");
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> f32 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, value: f32) {
        self.data[r * self.cols + c] = value;
    }

    pub fn row(&self, r: usize) -> &[f32] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f32] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }
}

/// Class distribution for one document.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Prediction {
    pub scores: Vec<f64>,
    pub argmax: usize,
    pub argmax_label: String,
}

impl Prediction {
    pub fn top_score(&self) -> f64 {
        self.scores[self.argmax]
    }
}

/// Trained model. Immutable once built; share it by reference or `Arc`.
#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    vocab: Vocabulary,
    /// `(vocab + buckets) × dim` input embeddings.
    input: Matrix,
    /// `dim × labels` output weights.
    output: Matrix,
    labels: Vec<String>,
    label_counts: Vec<u64>,
    config: TrainConfig,
    tree: Option<HuffmanTree>,
}

impl Model {
    /// Assembles a model from parts, checking shapes and finiteness.
    pub fn from_parts(
        vocab: Vocabulary,
        input: Matrix,
        output: Matrix,
        labels: Vec<String>,
        label_counts: Vec<u64>,
        config: TrainConfig,
    ) -> Result<Self, String> {
        let unique: BTreeSet<&String> = labels.iter().collect();
        if labels.is_empty() || unique.len() != labels.len() {
            return Err("labels must be nonempty and unique".into());
        }
        if label_counts.len() != labels.len() {
            return Err("one count per label required".into());
        }
        let buckets = config.feature_config().buckets as usize;
        if input.rows() != vocab.len() + buckets || input.cols() != config.dim {
            return Err(format!(
                "input matrix is {}x{}, expected {}x{}",
                input.rows(),
                input.cols(),
                vocab.len() + buckets,
                config.dim
            ));
        }
        if output.rows() != config.dim || output.cols() != labels.len() {
            return Err(format!(
                "output matrix is {}x{}, expected {}x{}",
                output.rows(),
                output.cols(),
                config.dim,
                labels.len()
            ));
        }
        if !input.as_slice().iter().chain(output.as_slice()).all(|x| x.is_finite()) {
            return Err("non-finite weight".into());
        }
        let tree = match config.loss_mode {
            LossMode::HierarchicalSoftmax => Some(HuffmanTree::new(&label_counts)),
            LossMode::FlatSoftmax => None,
        };
        Ok(Self {
            vocab,
            input,
            output,
            labels,
            label_counts,
            config,
            tree,
        })
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn input(&self) -> &Matrix {
        &self.input
    }

    pub fn output(&self) -> &Matrix {
        &self.output
    }

    pub fn input_mut(&mut self) -> &mut Matrix {
        &mut self.input
    }

    pub fn output_mut(&mut self) -> &mut Matrix {
        &mut self.output
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label_counts(&self) -> &[u64] {
        &self.label_counts
    }

    pub fn label_index(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn dim(&self) -> usize {
        self.config.dim
    }

    pub fn featurize(&self, tokens: &TokenSequence) -> FeatureBag {
        featurize(tokens, &self.vocab, &self.config.feature_config())
    }

    /// Tokenizes and classifies raw text.
    pub fn predict_text(&self, text: &str) -> Prediction {
        forward(&self.featurize(&tokenize(text)), self)
    }

    /// Count-weighted mean of the bag's input rows, accumulated in `f64`.
    /// Ids outside the matrix are ignored.
    pub fn hidden(&self, bag: &FeatureBag) -> Vec<f64> {
        let mut hidden = vec![0.0f64; self.dim()];
        let mut total = 0u64;
        for (&id, &count) in &bag.entries {
            let Some(row) = self.input_row(id) else { continue };
            total += u64::from(count);
            for (h, &a) in hidden.iter_mut().zip(row) {
                *h += f64::from(count) * f64::from(a);
            }
        }
        if total > 0 {
            let scale = 1.0 / total as f64;
            hidden.iter_mut().for_each(|h| *h *= scale);
        }
        hidden
    }

    pub fn logits(&self, hidden: &[f64]) -> Vec<f64> {
        let mut logits = vec![0.0f64; self.labels.len()];
        for (d, &h) in hidden.iter().enumerate() {
            for (z, &b) in logits.iter_mut().zip(self.output.row(d)) {
                *z += h * f64::from(b);
            }
        }
        logits
    }

    pub fn probabilities(&self, logits: &[f64]) -> Vec<f64> {
        match &self.tree {
            Some(tree) => tree.probabilities(logits),
            None => softmax(logits),
        }
    }

    fn log_prob(&self, logits: &[f64], label: usize) -> f64 {
        match &self.tree {
            Some(tree) => tree.log_prob(logits, label),
            None => {
                let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let lse = max + logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
                logits[label] - lse
            }
        }
    }

    /// d log P(label) / d logits.
    fn log_prob_gradient(&self, logits: &[f64], label: usize) -> Vec<f64> {
        match &self.tree {
            Some(tree) => tree.log_prob_gradient(logits, label),
            None => {
                let mut grad: Vec<f64> = softmax(logits).into_iter().map(|p| -p).collect();
                grad[label] += 1.0;
                grad
            }
        }
    }

    fn input_row(&self, id: u64) -> Option<&[f32]> {
        usize::try_from(id)
            .ok()
            .filter(|&r| r < self.input.rows())
            .map(|r| self.input.row(r))
    }
}

/// Classifies one feature bag. An empty bag maps to the zero hidden vector.
pub fn forward(bag: &FeatureBag, model: &Model) -> Prediction {
    let hidden = model.hidden(bag);
    let scores = model.probabilities(&model.logits(&hidden));
    let argmax = argmax(&scores);
    Prediction {
        argmax_label: model.labels[argmax].clone(),
        scores,
        argmax,
    }
}

/// Index of the largest score; the lowest index wins ties.
pub fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

/// Mean negative log-probability of the gold labels.
pub fn loss(dataset: &[(FeatureBag, usize)], model: &Model) -> f64 {
    if dataset.is_empty() {
        return 0.0;
    }
    let total: f64 = dataset
        .iter()
        .map(|(bag, label)| -model.log_prob(&model.logits(&model.hidden(bag)), *label))
        .sum();
    total / dataset.len() as f64
}

/// Gradient of [`loss`] with respect to the touched input rows and the
/// whole output matrix.
#[derive(Clone, Debug, Default)]
pub struct Gradient {
    pub input: BTreeMap<u64, Vec<f64>>,
    /// Row-major `dim × labels`.
    pub output: Vec<f64>,
}

pub fn gradient(dataset: &[(FeatureBag, usize)], model: &Model) -> Gradient {
    let dim = model.dim();
    let labels = model.labels.len();
    let mut grad = Gradient {
        input: BTreeMap::new(),
        output: vec![0.0; dim * labels],
    };
    if dataset.is_empty() {
        return grad;
    }
    let scale = 1.0 / dataset.len() as f64;
    for (bag, label) in dataset {
        let hidden = model.hidden(bag);
        let logits = model.logits(&hidden);
        // d loss / d logits = -(d log p / d logits)
        let dz: Vec<f64> = model
            .log_prob_gradient(&logits, *label)
            .into_iter()
            .map(|g| -g * scale)
            .collect();
        let mut dh = vec![0.0; dim];
        for d in 0..dim {
            let row = model.output.row(d);
            for j in 0..labels {
                grad.output[d * labels + j] += hidden[d] * dz[j];
                dh[d] += f64::from(row[j]) * dz[j];
            }
        }
        let total: u64 = bag
            .entries
            .iter()
            .filter(|(&id, _)| model.input_row(id).is_some())
            .map(|(_, &c)| u64::from(c))
            .sum();
        if total == 0 {
            continue;
        }
        for (&id, &count) in &bag.entries {
            if model.input_row(id).is_none() {
                continue;
            }
            let weight = f64::from(count) / total as f64;
            let row = grad.input.entry(id).or_insert_with(|| vec![0.0; dim]);
            for (g, &h) in row.iter_mut().zip(&dh) {
                *g += weight * h;
            }
        }
    }
    grad
}

/// Per-epoch record of the training objective.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainHistory {
    /// Loss over the whole training set before the first update.
    pub initial_loss: f64,
    /// Loss over the whole training set after each epoch.
    pub epoch_losses: Vec<f64>,
}

impl TrainHistory {
    pub fn final_loss(&self) -> f64 {
        self.epoch_losses.last().copied().unwrap_or(self.initial_loss)
    }
}

/// Trains on `(tokens, label)` pairs with labels taken in sorted order.
pub fn train(corpus: &[(TokenSequence, String)], config: &TrainConfig) -> Result<Model, TrainError> {
    let labels: Vec<String> = corpus
        .iter()
        .map(|(_, l)| l.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    train_with_labels(corpus, &labels, config).map(|(model, _)| model)
}

/// Trains with an explicit label order, returning the loss history too.
///
/// `A` starts uniform in `[-1/dim, 1/dim]`, `B` at zero. Each epoch visits a
/// fresh seeded permutation of the corpus; the learning rate decays linearly
/// from `learning_rate` to zero over `epochs × corpus` updates.
pub fn train_with_labels(
    corpus: &[(TokenSequence, String)],
    labels: &[String],
    config: &TrainConfig,
) -> Result<(Model, TrainHistory), TrainError> {
    config.validate()?;
    if corpus.is_empty() {
        return Err(TrainError::EmptyCorpus);
    }
    let unique: BTreeSet<&String> = labels.iter().collect();
    if labels.is_empty() || unique.len() != labels.len() {
        return Err(TrainError::BadLabelSet);
    }
    let mut label_counts = vec![0u64; labels.len()];
    let mut targets = Vec::with_capacity(corpus.len());
    for (index, (_, label)) in corpus.iter().enumerate() {
        let Some(j) = labels.iter().position(|l| l == label) else {
            return Err(TrainError::UnknownLabel {
                index,
                label: label.clone(),
            });
        };
        label_counts[j] += 1;
        targets.push(j);
    }
    if let Some(j) = label_counts.iter().position(|&c| c == 0) {
        return Err(TrainError::MissingLabel(labels[j].clone()));
    }

    let docs: Vec<TokenSequence> = corpus.iter().map(|(t, _)| t.clone()).collect();
    let vocab = build_vocabulary(&docs, config.min_count);
    let features = config.feature_config();
    let rows = vocab.len() + features.buckets as usize;
    let dim = config.dim;

    let mut rng = SeededRng::new(config.seed);
    let bound = 1.0 / dim as f64;
    let init: Vec<f32> = (0..rows * dim)
        .map(|_| ((2.0 * rng.unit_f64() - 1.0) * bound) as f32)
        .collect();
    let input = Matrix::from_vec(rows, dim, init);
    let output = Matrix::zeros(dim, labels.len());
    let mut model = Model::from_parts(
        vocab,
        input,
        output,
        labels.to_vec(),
        label_counts,
        config.clone(),
    )
    .map_err(TrainError::InvalidConfig)?;

    let examples: Vec<(FeatureBag, usize)> = docs
        .iter()
        .zip(targets)
        .map(|(tokens, target)| (model.featurize(tokens), target))
        .collect();

    let initial_loss = loss(&examples, &model);
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    let total_steps = (config.epochs * examples.len()) as f64;
    let mut step = 0usize;
    let mut order: Vec<usize> = (0..examples.len()).collect();
    for _ in 0..config.epochs {
        rng.shuffle(&mut order);
        for &i in &order {
            let lr = config.learning_rate * (1.0 - step as f64 / total_steps);
            let (bag, target) = &examples[i];
            sgd_step(&mut model, bag, *target, lr);
            step += 1;
        }
        epoch_losses.push(loss(&examples, &model));
    }
    Ok((
        model,
        TrainHistory {
            initial_loss,
            epoch_losses,
        },
    ))
}

fn sgd_step(model: &mut Model, bag: &FeatureBag, target: usize, lr: f64) {
    let dim = model.dim();
    let hidden = model.hidden(bag);
    let logits = model.logits(&hidden);
    let ascent = model.log_prob_gradient(&logits, target);
    let mut grad_hidden = vec![0.0f64; dim];
    for d in 0..dim {
        let row = model.output.row_mut(d);
        for (j, b) in row.iter_mut().enumerate() {
            let alpha = lr * ascent[j];
            grad_hidden[d] += alpha * f64::from(*b);
            *b = (f64::from(*b) + alpha * hidden[d]) as f32;
        }
    }
    let rows = model.input.rows() as u64;
    let total: u64 = bag
        .entries
        .iter()
        .filter(|(&id, _)| id < rows)
        .map(|(_, &c)| u64::from(c))
        .sum();
    if total == 0 {
        return;
    }
    for (&id, &count) in &bag.entries {
        if id >= rows {
            continue;
        }
        let weight = f64::from(count) / total as f64;
        for (a, g) in model.input.row_mut(id as usize).iter_mut().zip(&grad_hidden) {
            *a = (f64::from(*a) + weight * g) as f32;
        }
    }
}

impl fmt::Display for Prediction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.argmax_label)
    }
}
