//! Versioned binary checkpoints.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic "FSTC" | version u32 | config_len u32 | config text (UTF-8)
//! then per tensor, in declared parameter order:
//!   name_len u32 | name | rank u32 | dims u32 x rank | values f32 x prod(dims)
//! ```
//!
//! The config text is the run's key-value configuration plus a `vocab` line
//! listing vocabulary tokens in id order, which makes a checkpoint
//! self-contained for scoring.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::corpus::Vocabulary;
use crate::encoder::{init_encoder, EncoderParams};
use crate::numeric::Tensor;

use super::config::TrainConfig;

pub const MAGIC: [u8; 4] = *b"FSTC";
pub const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("checkpoint io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad magic bytes: not a checkpoint file")]
    BadMagic,
    #[error("unsupported checkpoint version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),
    #[error("tensor {name} has {found} values, expected {expected}")]
    SizeMismatch { name: String, expected: usize, found: usize },
    #[error("checkpoint config error: {0}")]
    Config(String),
}

/// In-memory form of a checkpoint file.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub version: u32,
    pub config_text: String,
    pub tensors: Vec<(String, Tensor<f32>)>,
}

/// Config text stored in checkpoints: run config plus the vocabulary.
pub fn checkpoint_config_text(config: &TrainConfig, vocab: &Vocabulary) -> String {
    let mut text = config.to_kv_text();
    text.push_str("vocab = ");
    text.push_str(&vocab.ordered_tokens().join(" "));
    text.push('\n');
    text
}

pub fn save_checkpoint(
    params: &EncoderParams<f32>,
    config_text: &str,
    path: &Path,
) -> Result<(), CheckpointError> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    let config_bytes = config_text.as_bytes();
    w.write_all(&(config_bytes.len() as u32).to_le_bytes())?;
    w.write_all(config_bytes)?;
    for (name, tensor) in params.named_values() {
        let name_bytes = name.as_bytes();
        w.write_all(&(name_bytes.len() as u32).to_le_bytes())?;
        w.write_all(name_bytes)?;
        w.write_all(&(tensor.shape().len() as u32).to_le_bytes())?;
        for &dim in tensor.shape() {
            w.write_all(&(dim as u32).to_le_bytes())?;
        }
        for &v in tensor.values() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

fn read_u32<R: Read>(r: &mut R, what: &str) -> Result<u32, CheckpointError> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)
        .map_err(|_| CheckpointError::Corrupt(format!("truncated while reading {what}")))?;
    Ok(u32::from_le_bytes(buf))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, CheckpointError> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(|_| CheckpointError::BadMagic)?;
    if magic != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let version = read_u32(&mut r, "version")?;
    if version != VERSION {
        return Err(CheckpointError::Version { found: version, expected: VERSION });
    }
    let config_len = read_u32(&mut r, "config length")? as usize;
    let mut config_bytes = vec![0u8; config_len];
    r.read_exact(&mut config_bytes)
        .map_err(|_| CheckpointError::Corrupt("truncated config text".into()))?;
    let config_text = String::from_utf8(config_bytes)
        .map_err(|_| CheckpointError::Corrupt("config text is not UTF-8".into()))?;

    let mut tensors = Vec::new();
    loop {
        let mut len_buf = [0u8; 4];
        match r.read_exact(&mut len_buf) {
            Ok(()) => {}
            Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => break,
            Err(e) => return Err(e.into()),
        }
        let name_len = u32::from_le_bytes(len_buf) as usize;
        let mut name_bytes = vec![0u8; name_len];
        r.read_exact(&mut name_bytes)
            .map_err(|_| CheckpointError::Corrupt("truncated tensor name".into()))?;
        let name = String::from_utf8(name_bytes)
            .map_err(|_| CheckpointError::Corrupt("tensor name is not UTF-8".into()))?;
        let rank = read_u32(&mut r, "tensor rank")? as usize;
        let mut dims = Vec::with_capacity(rank);
        for _ in 0..rank {
            dims.push(read_u32(&mut r, "tensor dimension")? as usize);
        }
        let count: usize = dims.iter().product();
        let mut values = Vec::with_capacity(count);
        let mut buf = [0u8; 4];
        for i in 0..count {
            r.read_exact(&mut buf).map_err(|_| CheckpointError::SizeMismatch {
                name: name.clone(),
                expected: count,
                found: i,
            })?;
            values.push(f32::from_le_bytes(buf));
        }
        tensors.push((name, Tensor::from_values(&dims, values)));
    }
    Ok(Checkpoint { version, config_text, tensors })
}

impl Checkpoint {
    /// Rebuild the run configuration, vocabulary and encoder parameters.
    /// Tensor names and shapes are validated against the configuration.
    pub fn restore(&self) -> Result<(TrainConfig, Vocabulary, EncoderParams<f32>), CheckpointError> {
        let mut vocab_line: Option<&str> = None;
        let mut config_lines: Vec<&str> = Vec::new();
        for line in self.config_text.lines() {
            match line.split_once('=') {
                Some((k, v)) if k.trim() == "vocab" => vocab_line = Some(v.trim()),
                _ => config_lines.push(line),
            }
        }
        let config = TrainConfig::from_kv_text(&config_lines.join("\n"))
            .map_err(|e| CheckpointError::Config(e.to_string()))?;
        let tokens = vocab_line
            .ok_or_else(|| CheckpointError::Config("checkpoint has no vocab line".into()))?;
        let vocab = Vocabulary::from_ordered_tokens(
            tokens.split_whitespace().map(String::from).collect::<Vec<_>>(),
        );

        let enc_config = config.encoder_config(vocab.size(), 0);
        let mut params: EncoderParams<f32> = init_encoder(&enc_config);
        let expected: Vec<(String, Vec<usize>)> = params
            .named_values()
            .iter()
            .map(|(n, t)| (n.clone(), t.shape().to_vec()))
            .collect();
        if expected.len() != self.tensors.len() {
            return Err(CheckpointError::Corrupt(format!(
                "expected {} tensors, found {}",
                expected.len(),
                self.tensors.len()
            )));
        }
        for ((name, shape), (found_name, tensor)) in expected.iter().zip(&self.tensors) {
            if name != found_name {
                return Err(CheckpointError::Corrupt(format!(
                    "tensor order mismatch: expected {name}, found {found_name}"
                )));
            }
            if shape != tensor.shape() {
                return Err(CheckpointError::SizeMismatch {
                    name: name.clone(),
                    expected: shape.iter().product(),
                    found: tensor.scalar_count(),
                });
            }
        }
        let mut tensor_iter = self.tensors.iter();
        for p in params.params_mut() {
            let (_, tensor) = tensor_iter.next().expect("counts checked above");
            p.value = tensor.clone();
            p.zero_grad();
        }
        Ok((config, vocab, params))
    }
}
