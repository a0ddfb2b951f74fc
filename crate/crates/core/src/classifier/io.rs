//! Versioned binary model format. All integers and floats are little-endian.
//!
//! ```text
//! magic           4 bytes  "ITGM"
//! version         u32
//! config          u32 dim, u32 epochs, f64 learning_rate, u64 min_count,
//!                 u32 word_ngrams, u32 char_ngram_min, u32 char_ngram_max,
//!                 u64 hashing_buckets, u8 loss_mode (0 flat, 1 hierarchical),
//!                 u64 seed
//! labels          u32 count, then per label: u32 byte length, UTF-8, u64 frequency
//! vocabulary      u32 count, then per word:  u32 byte length, UTF-8, u64 frequency
//! input matrix    u64 rows, u32 cols, rows*cols f32
//! output matrix   u32 rows, u32 cols, rows*cols f32
//! ```

use std::fs;
use std::io::Write;
use std::path::Path;

use sha2::{Digest, Sha256};
use thiserror::Error;

use super::{LossMode, Matrix, Model, TrainConfig, Vocabulary};

pub const MAGIC: &[u8; 4] = b"ITGM";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ModelFormatError {
    #[error("bad magic bytes: not a model file")]
    BadMagic,
    #[error("unsupported model format version {0}")]
    UnsupportedVersion(u32),
    #[error("truncated payload")]
    Truncated,
    #[error("corrupt model: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub fn save(model: &Model, path: impl AsRef<Path>) -> Result<(), ModelFormatError> {
    let mut file = std::io::BufWriter::new(fs::File::create(path)?);
    file.write_all(&to_bytes(model))?;
    file.flush()?;
    Ok(())
}

pub fn load(path: impl AsRef<Path>) -> Result<Model, ModelFormatError> {
    from_bytes(&fs::read(path)?)
}

/// Hex SHA-256 of a serialized model.
pub fn model_fingerprint(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl Model {
    pub fn to_bytes(&self) -> Vec<u8> {
        to_bytes(self)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ModelFormatError> {
        from_bytes(bytes)
    }

    pub fn fingerprint(&self) -> String {
        model_fingerprint(&self.to_bytes())
    }
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u32).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

fn put_floats(out: &mut Vec<u8>, data: &[f32]) {
    out.reserve(data.len() * 4);
    for x in data {
        out.extend_from_slice(&x.to_le_bytes());
    }
}

fn to_bytes(model: &Model) -> Vec<u8> {
    let cfg = model.config();
    let mut out = Vec::with_capacity(64 + model.input().as_slice().len() * 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());

    out.extend_from_slice(&(cfg.dim as u32).to_le_bytes());
    out.extend_from_slice(&(cfg.epochs as u32).to_le_bytes());
    out.extend_from_slice(&cfg.learning_rate.to_le_bytes());
    out.extend_from_slice(&cfg.min_count.to_le_bytes());
    out.extend_from_slice(&(cfg.word_ngrams as u32).to_le_bytes());
    out.extend_from_slice(&(cfg.char_ngram_min as u32).to_le_bytes());
    out.extend_from_slice(&(cfg.char_ngram_max as u32).to_le_bytes());
    out.extend_from_slice(&cfg.hashing_buckets.to_le_bytes());
    out.push(match cfg.loss_mode {
        LossMode::FlatSoftmax => 0,
        LossMode::HierarchicalSoftmax => 1,
    });
    out.extend_from_slice(&cfg.seed.to_le_bytes());

    out.extend_from_slice(&(model.labels().len() as u32).to_le_bytes());
    for (label, count) in model.labels().iter().zip(model.label_counts()) {
        put_str(&mut out, label);
        out.extend_from_slice(&count.to_le_bytes());
    }

    out.extend_from_slice(&(model.vocab().len() as u32).to_le_bytes());
    for (word, count) in model.vocab().entries() {
        put_str(&mut out, word);
        out.extend_from_slice(&count.to_le_bytes());
    }

    let input = model.input();
    out.extend_from_slice(&(input.rows() as u64).to_le_bytes());
    out.extend_from_slice(&(input.cols() as u32).to_le_bytes());
    put_floats(&mut out, input.as_slice());

    let output = model.output();
    out.extend_from_slice(&(output.rows() as u32).to_le_bytes());
    out.extend_from_slice(&(output.cols() as u32).to_le_bytes());
    put_floats(&mut out, output.as_slice());
    out
}

struct Reader<'a> {
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ModelFormatError> {
        if self.buf.len() < n {
            return Err(ModelFormatError::Truncated);
        }
        let (head, tail) = self.buf.split_at(n);
        self.buf = tail;
        Ok(head)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N], ModelFormatError> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }

    fn u8(&mut self) -> Result<u8, ModelFormatError> {
        Ok(self.array::<1>()?[0])
    }

    fn u32(&mut self) -> Result<u32, ModelFormatError> {
        Ok(u32::from_le_bytes(self.array()?))
    }

    fn u64(&mut self) -> Result<u64, ModelFormatError> {
        Ok(u64::from_le_bytes(self.array()?))
    }

    fn f64(&mut self) -> Result<f64, ModelFormatError> {
        Ok(f64::from_le_bytes(self.array()?))
    }

    fn string(&mut self) -> Result<String, ModelFormatError> {
        let len = self.u32()? as usize;
        let bytes = self.take(len)?;
        String::from_utf8(bytes.to_vec())
            .map_err(|_| ModelFormatError::Corrupt("string is not UTF-8".into()))
    }

    fn floats(&mut self, count: usize) -> Result<Vec<f32>, ModelFormatError> {
        let bytes = count
            .checked_mul(4)
            .ok_or_else(|| ModelFormatError::Corrupt("matrix size overflows".into()))?;
        Ok(self
            .take(bytes)?
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("chunk of 4")))
            .collect())
    }
}

fn from_bytes(bytes: &[u8]) -> Result<Model, ModelFormatError> {
    let mut r = Reader { buf: bytes };
    if r.take(4)? != MAGIC {
        return Err(ModelFormatError::BadMagic);
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(ModelFormatError::UnsupportedVersion(version));
    }

    let dim = r.u32()? as usize;
    let epochs = r.u32()? as usize;
    let learning_rate = r.f64()?;
    let min_count = r.u64()?;
    let word_ngrams = r.u32()? as usize;
    let char_ngram_min = r.u32()? as usize;
    let char_ngram_max = r.u32()? as usize;
    let hashing_buckets = r.u64()?;
    let loss_mode = match r.u8()? {
        0 => LossMode::FlatSoftmax,
        1 => LossMode::HierarchicalSoftmax,
        other => return Err(ModelFormatError::Corrupt(format!("unknown loss mode {other}"))),
    };
    let seed = r.u64()?;
    let config = TrainConfig {
        dim,
        epochs,
        learning_rate,
        min_count,
        word_ngrams,
        char_ngram_min,
        char_ngram_max,
        hashing_buckets,
        loss_mode,
        seed,
    };
    config
        .validate()
        .map_err(|e| ModelFormatError::Corrupt(e.to_string()))?;

    let n_labels = r.u32()? as usize;
    let mut labels = Vec::new();
    let mut label_counts = Vec::new();
    for _ in 0..n_labels {
        labels.push(r.string()?);
        label_counts.push(r.u64()?);
    }

    let n_words = r.u32()? as usize;
    let mut entries = Vec::new();
    for _ in 0..n_words {
        let word = r.string()?;
        entries.push((word, r.u64()?));
    }
    let vocab = Vocabulary::from_entries(entries, min_count);
    if vocab.len() != n_words {
        return Err(ModelFormatError::Corrupt("duplicate vocabulary entry".into()));
    }

    let rows = usize::try_from(r.u64()?)
        .map_err(|_| ModelFormatError::Corrupt("input matrix too large".into()))?;
    let cols = r.u32()? as usize;
    let count = rows
        .checked_mul(cols)
        .ok_or_else(|| ModelFormatError::Corrupt("matrix size overflows".into()))?;
    let input = Matrix::from_vec(rows, cols, r.floats(count)?);

    let out_rows = r.u32()? as usize;
    let out_cols = r.u32()? as usize;
    let output = Matrix::from_vec(out_rows, out_cols, r.floats(out_rows * out_cols)?);
    if !r.buf.is_empty() {
        return Err(ModelFormatError::Corrupt(format!(
            "{} trailing bytes",
            r.buf.len()
        )));
    }

    Model::from_parts(vocab, input, output, labels, label_counts, config)
        .map_err(ModelFormatError::Corrupt)
}
