//! Training loop with best-on-validation checkpointing.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::LabeledCorpus;
use crate::model::{
    AdamW, Checkpoint, ModelConfig, ModelError, TokenClassifier, DEFAULT_BETA1, DEFAULT_BETA2,
    DEFAULT_EPS, DEFAULT_WEIGHT_DECAY,
};
use crate::tokenizer::{encode, Encoded, EncodeError, Vocab};
use crate::types::{LabelScheme, NormalizedSequence};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            batch_size: 16,
            epochs: 15,
            lr: 5e-5,
            seed: 42,
            weight_decay: DEFAULT_WEIGHT_DECAY,
            beta1: DEFAULT_BETA1,
            beta2: DEFAULT_BETA2,
            eps: DEFAULT_EPS,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
}

#[derive(Debug)]
pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub history: Vec<EpochStats>,
    pub warnings: Vec<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("training config invalid: {0}")]
    InvalidConfig(String),
    #[error("training set is empty")]
    EmptyTrainSet,
    #[error("{context} scheme does not match the model scheme")]
    SchemeMismatch { context: &'static str },
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error(transparent)]
    Encode(#[from] EncodeError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Encodes a batch of sequences padded to the longest member.
pub fn encode_batch(
    seqs: &[&NormalizedSequence],
    vocab: &Vocab,
    scheme: &LabelScheme,
) -> Result<Vec<Encoded>, EncodeError> {
    let max_chars = seqs.iter().map(|s| s.len()).max().unwrap_or(0);
    seqs.iter().map(|s| encode(s, vocab, scheme, max_chars + 2)).collect()
}

/// Mean validation loss over a corpus in eval mode.
fn corpus_loss(
    model: &TokenClassifier,
    corpus: &LabeledCorpus,
    vocab: &Vocab,
    batch_size: usize,
) -> Result<f64, TrainError> {
    let mut total = 0.0;
    let mut count = 0usize;
    for chunk in corpus.sequences.chunks(batch_size) {
        let refs: Vec<&NormalizedSequence> = chunk.iter().collect();
        let batch = encode_batch(&refs, vocab, &corpus.scheme)?;
        for enc in &batch {
            let logits = model.forward(&enc.ids, &enc.attention_mask)?;
            let (sum, n) = crate::model::cross_entropy_loss(&logits, &enc.label_ids)
                .map(|(mean, n)| (mean * n as f64, n))?;
            total += sum;
            count += n;
        }
    }
    Ok(total / count.max(1) as f64)
}

/// Trains a model: per epoch a seeded shuffle, per-batch padding, exact
/// gradients, AdamW updates, then a validation pass. Keeps the parameters
/// of the epoch with the lowest validation loss.
pub fn train(
    model_config: &ModelConfig,
    training: &TrainingConfig,
    vocab: &Vocab,
    train_set: &LabeledCorpus,
    val_set: &LabeledCorpus,
) -> Result<TrainOutcome, TrainError> {
    if training.batch_size == 0 || training.epochs == 0 {
        return Err(TrainError::InvalidConfig(
            "batch_size and epochs must be at least 1".into(),
        ));
    }
    if train_set.is_empty() {
        return Err(TrainError::EmptyTrainSet);
    }
    if val_set.scheme != train_set.scheme {
        return Err(TrainError::SchemeMismatch { context: "validation" });
    }
    let scheme = &train_set.scheme;
    if model_config.num_labels != scheme.len() {
        return Err(TrainError::SchemeMismatch { context: "train" });
    }

    let mut model = TokenClassifier::init(model_config.clone())?;
    let mut opt = AdamW::new(training.lr)
        .with_weight_decay(training.weight_decay)
        .with_betas(training.beta1, training.beta2)
        .with_eps(training.eps);
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(training.seed);
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(training.seed.wrapping_add(0x9E37_79B9));

    let mut warnings = Vec::new();
    let mut history = Vec::with_capacity(training.epochs);
    let mut best: Option<(f64, crate::model::Parameters, usize)> = None;

    let mut order: Vec<usize> = (0..train_set.len()).collect();
    for epoch in 1..=training.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut epoch_sum = 0.0;
        let mut epoch_positions = 0usize;
        for (batch_idx, chunk) in order.chunks(training.batch_size).enumerate() {
            let refs: Vec<&NormalizedSequence> =
                chunk.iter().map(|&i| &train_set.sequences[i]).collect();
            let batch = encode_batch(&refs, vocab, scheme)?;
            let result = match model.backward_batch(&batch, Some(&mut dropout_rng)) {
                Ok(r) => r,
                Err(ModelError::NonFinite(_)) => {
                    return Err(TrainError::NonFiniteLoss { epoch, batch: batch_idx })
                }
                Err(e) => return Err(e.into()),
            };
            if !result.loss.is_finite() {
                return Err(TrainError::NonFiniteLoss { epoch, batch: batch_idx });
            }
            epoch_sum += result.loss * result.positions as f64;
            epoch_positions += result.positions;
            opt.step(&mut model.params, &result.grads);
        }
        let train_loss = epoch_sum / epoch_positions.max(1) as f64;

        let val_loss = if val_set.is_empty() {
            None
        } else {
            Some(corpus_loss(&model, val_set, vocab, training.batch_size)?)
        };
        if let Some(v) = val_loss {
            let improved = best.as_ref().map_or(true, |(b, _, _)| v < *b);
            if improved {
                best = Some((v, model.params.clone(), epoch));
            }
        }
        history.push(EpochStats { epoch, train_loss, val_loss });
    }

    let (best_val_loss, params, epoch_of_best) = match best {
        Some((v, p, e)) => (v, p, e),
        None => {
            warnings.push(
                "no validation data: keeping the final epoch as best".to_string(),
            );
            (f64::NAN, model.params.clone(), training.epochs)
        }
    };

    let checkpoint = Checkpoint {
        config: model_config.clone(),
        params,
        vocab_hash: vocab.sha256(),
        scheme: scheme.clone(),
        best_val_loss,
        epoch_of_best: epoch_of_best as u32,
    };
    Ok(TrainOutcome { checkpoint, history, warnings })
}

/// Renders history as `epoch,train_loss,val_loss` CSV.
pub fn history_csv(history: &[EpochStats]) -> String {
    let mut out = String::from("epoch,train_loss,val_loss\n");
    for row in history {
        match row.val_loss {
            Some(v) => out.push_str(&format!("{},{},{}\n", row.epoch, row.train_loss, v)),
            None => out.push_str(&format!("{},{},\n", row.epoch, row.train_loss)),
        }
    }
    out
}
