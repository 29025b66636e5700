//! Self-describing binary checkpoint container.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic   b"HMCP"
//! u32     format version (currently 1)
//! u32 x7  num_layers, hidden_size, num_heads, ff_size, max_len,
//!         vocab_size, num_labels
//! f64     dropout
//! u64     init seed
//! u8      task (0 = punctuation, 1 = spacing)
//! u32     label count, then one u32 codepoint per label
//! [u8;32] SHA-256 of the vocabulary file
//! f64     best validation loss (NaN when trained without validation)
//! u32     epoch of the best model
//! u32     tensor count, then per tensor:
//!         u32 name length, name bytes,
//!         u32 rows, u32 cols, rows*cols f32 values
//! ```

use std::path::Path;

use ndarray::Array2;

use super::{ModelConfig, Parameters, TokenClassifier};
use crate::tokenizer::Vocab;
use crate::types::{LabelScheme, Task};

const MAGIC: &[u8; 4] = b"HMCP";
const VERSION: u32 = 1;

fn push_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("not a checkpoint file (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    BadVersion(u32),
    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),
    #[error("vocabulary does not match the one this checkpoint was trained with")]
    VocabMismatch,
    #[error("non-finite value in tensor {0}")]
    NonFinite(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A trained model: parameters plus everything needed to use them.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: ModelConfig,
    pub params: Parameters,
    pub vocab_hash: [u8; 32],
    pub scheme: LabelScheme,
    pub best_val_loss: f64,
    pub epoch_of_best: u32,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        push_u32(&mut out, VERSION);
        for v in [
            self.config.num_layers,
            self.config.hidden_size,
            self.config.num_heads,
            self.config.ff_size,
            self.config.max_len,
            self.config.vocab_size,
            self.config.num_labels,
        ] {
            push_u32(&mut out, v as u32);
        }
        out.extend_from_slice(&self.config.dropout.to_le_bytes());
        out.extend_from_slice(&self.config.seed.to_le_bytes());
        out.push(match self.scheme.task() {
            Task::Punctuation => 0,
            Task::Spacing => 1,
        });
        push_u32(&mut out, self.scheme.len() as u32);
        for &label in self.scheme.labels() {
            push_u32(&mut out, label as u32);
        }
        out.extend_from_slice(&self.vocab_hash);
        out.extend_from_slice(&self.best_val_loss.to_le_bytes());
        push_u32(&mut out, self.epoch_of_best);

        let tensors = self.params.named();
        push_u32(&mut out, tensors.len() as u32);
        for (name, tensor) in tensors {
            push_u32(&mut out, name.len() as u32);
            out.extend_from_slice(name.as_bytes());
            push_u32(&mut out, tensor.nrows() as u32);
            push_u32(&mut out, tensor.ncols() as u32);
            for &v in tensor.iter() {
                out.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CheckpointError> {
        let mut r = Reader { buf: bytes, pos: 0 };
        if r.bytes(4)? != MAGIC {
            return Err(CheckpointError::BadMagic);
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(CheckpointError::BadVersion(version));
        }
        let config = ModelConfig {
            num_layers: r.u32()? as usize,
            hidden_size: r.u32()? as usize,
            num_heads: r.u32()? as usize,
            ff_size: r.u32()? as usize,
            max_len: r.u32()? as usize,
            vocab_size: r.u32()? as usize,
            num_labels: r.u32()? as usize,
            dropout: r.f64()?,
            seed: r.u64()?,
        };
        config
            .validate()
            .map_err(|e| CheckpointError::Corrupt(e.to_string()))?;

        let task = match r.u8()? {
            0 => Task::Punctuation,
            1 => Task::Spacing,
            other => return Err(CheckpointError::Corrupt(format!("unknown task tag {other}"))),
        };
        let scheme = LabelScheme::for_task(task);
        let n_labels = r.u32()? as usize;
        if n_labels != scheme.len() {
            return Err(CheckpointError::Corrupt(format!(
                "{n_labels} labels stored for the {task} scheme"
            )));
        }
        for &expected in scheme.labels() {
            let stored = char::from_u32(r.u32()?)
                .ok_or_else(|| CheckpointError::Corrupt("label is not a codepoint".into()))?;
            if stored != expected {
                return Err(CheckpointError::Corrupt(format!(
                    "stored label {stored:?} where scheme expects {expected:?}"
                )));
            }
        }
        if config.num_labels != scheme.len() {
            return Err(CheckpointError::Corrupt(
                "config num_labels disagrees with the scheme".into(),
            ));
        }

        let mut vocab_hash = [0u8; 32];
        vocab_hash.copy_from_slice(r.bytes(32)?);
        let best_val_loss = r.f64()?;
        let epoch_of_best = r.u32()?;

        let mut params = Parameters::zeros_like(&config);
        let expected = params.named().len();
        let n_tensors = r.u32()? as usize;
        if n_tensors != expected {
            return Err(CheckpointError::Corrupt(format!(
                "{n_tensors} tensors stored, config implies {expected}"
            )));
        }
        for (expected_name, tensor) in params.named_mut() {
            let name_len = r.u32()? as usize;
            let name = std::str::from_utf8(r.bytes(name_len)?)
                .map_err(|_| CheckpointError::Corrupt("tensor name is not UTF-8".into()))?;
            if name != expected_name {
                return Err(CheckpointError::Corrupt(format!(
                    "tensor `{name}` where `{expected_name}` was expected"
                )));
            }
            let rows = r.u32()? as usize;
            let cols = r.u32()? as usize;
            if (rows, cols) != tensor.dim() {
                return Err(CheckpointError::Corrupt(format!(
                    "tensor `{name}` has shape {rows}x{cols}, config implies {:?}",
                    tensor.dim()
                )));
            }
            let mut data = Array2::zeros((rows, cols));
            for v in data.iter_mut() {
                let raw = r.f32()?;
                if !raw.is_finite() {
                    return Err(CheckpointError::NonFinite(name.to_string()));
                }
                *v = raw as f64;
            }
            *tensor = data;
        }
        if r.pos != bytes.len() {
            return Err(CheckpointError::Corrupt("trailing bytes".into()));
        }
        Ok(Checkpoint { config, params, vocab_hash, scheme, best_val_loss, epoch_of_best })
    }

    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, CheckpointError> {
        Self::from_bytes(&std::fs::read(path)?)
    }

    /// Confirms `vocab` is the vocabulary this checkpoint was trained
    /// with.
    pub fn verify_vocab(&self, vocab: &Vocab) -> Result<(), CheckpointError> {
        if vocab.sha256() != self.vocab_hash {
            return Err(CheckpointError::VocabMismatch);
        }
        Ok(())
    }

    pub fn into_model(self) -> TokenClassifier {
        TokenClassifier { config: self.config, params: self.params }
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn bytes(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| CheckpointError::Corrupt("unexpected end of file".into()))?;
        let slice = &self.buf[self.pos..end];
        self.pos = end;
        Ok(slice)
    }

    fn u8(&mut self) -> Result<u8, CheckpointError> {
        Ok(self.bytes(1)?[0])
    }

    fn u32(&mut self) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.bytes(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64, CheckpointError> {
        Ok(u64::from_le_bytes(self.bytes(8)?.try_into().expect("8 bytes")))
    }

    fn f32(&mut self) -> Result<f32, CheckpointError> {
        Ok(f32::from_le_bytes(self.bytes(4)?.try_into().expect("4 bytes")))
    }

    fn f64(&mut self) -> Result<f64, CheckpointError> {
        Ok(f64::from_le_bytes(self.bytes(8)?.try_into().expect("8 bytes")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Checkpoint {
        let config = ModelConfig {
            num_layers: 1,
            hidden_size: 8,
            num_heads: 2,
            ff_size: 8,
            max_len: 8,
            vocab_size: 6,
            num_labels: 7,
            dropout: 0.1,
            seed: 9,
        };
        let params = Parameters::init(&config);
        Checkpoint {
            config,
            params,
            vocab_hash: [7u8; 32],
            scheme: LabelScheme::punctuation(),
            best_val_loss: 1.25,
            epoch_of_best: 3,
        }
    }

    #[test]
    fn byte_round_trip_preserves_everything_at_f32_precision() {
        let ckpt = sample();
        let bytes = ckpt.to_bytes();
        let back = Checkpoint::from_bytes(&bytes).unwrap();
        assert_eq!(back.config, ckpt.config);
        assert_eq!(back.scheme, ckpt.scheme);
        assert_eq!(back.vocab_hash, ckpt.vocab_hash);
        assert_eq!(back.best_val_loss, ckpt.best_val_loss);
        assert_eq!(back.epoch_of_best, ckpt.epoch_of_best);
        // Values survive the f32 narrowing bit-for-bit on rewrite.
        assert_eq!(back.to_bytes(), bytes);
        for ((_, a), (_, b)) in ckpt.params.named().iter().zip(back.params.named().iter()) {
            for (&x, &y) in a.iter().zip(b.iter()) {
                assert!((x - y).abs() <= (x as f32).abs() as f64 * 1e-7 + 1e-12);
            }
        }
    }

    #[test]
    fn serialization_is_deterministic() {
        assert_eq!(sample().to_bytes(), sample().to_bytes());
    }

    #[test]
    fn bad_magic_is_rejected() {
        let mut bytes = sample().to_bytes();
        bytes[0] = b'X';
        assert!(matches!(Checkpoint::from_bytes(&bytes), Err(CheckpointError::BadMagic)));
    }

    #[test]
    fn truncated_file_is_corrupt() {
        let bytes = sample().to_bytes();
        let err = Checkpoint::from_bytes(&bytes[..bytes.len() - 3]).unwrap_err();
        assert!(matches!(err, CheckpointError::Corrupt(_)));
    }

    #[test]
    fn vocab_hash_mismatch_is_detected() {
        let ckpt = sample();
        let (vocab, _) = Vocab::build(&[], &["子".to_string()]);
        assert!(matches!(ckpt.verify_vocab(&vocab), Err(CheckpointError::VocabMismatch)));
    }
}
