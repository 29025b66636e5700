//! Inserting predicted punctuation or spacing back into raw text, with
//! windowed inference for texts longer than the encoder budget.

use crate::model::{Checkpoint, CheckpointError, ModelError, TokenClassifier};
use crate::tokenizer::{Vocab, CLS_ID, SEP_ID};
use crate::types::{is_inventory_mark, LabelScheme, Task, NO_MARK};

/// Overlap context carried on each side of a window.
pub const DEFAULT_OVERLAP: usize = 32;

#[derive(Debug, thiserror::Error)]
pub enum RestoreError {
    #[error(transparent)]
    Vocab(#[from] CheckpointError),
    #[error("overlap {overlap} leaves no window core for max_len {max_len}")]
    OverlapTooLarge { overlap: usize, max_len: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// One predicted insertion.
#[derive(Debug, Clone, PartialEq)]
pub struct Insertion {
    /// Character index (in the stripped input) the mark follows.
    pub position: usize,
    /// The predicted label.
    pub label: char,
    /// Softmax probability of the predicted label.
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RestorationResult {
    pub output: String,
    pub insertions: Vec<Insertion>,
    /// True when inventory marks or spaces had to be stripped from the
    /// input first.
    pub stripped_input: bool,
}

/// Removes the six inventory marks and spaces; everything else is kept in
/// order.
pub fn strip_marks(text: &str) -> String {
    text.chars()
        .filter(|&c| !is_inventory_mark(c) && c != ' ')
        .collect()
}

/// A checkpoint bound to its vocabulary, ready for restoration.
#[derive(Debug, Clone)]
pub struct Restorer {
    model: TokenClassifier,
    scheme: LabelScheme,
    vocab: Vocab,
}

impl Restorer {
    pub fn new(checkpoint: Checkpoint, vocab: Vocab) -> Result<Self, RestoreError> {
        checkpoint.verify_vocab(&vocab)?;
        let scheme = checkpoint.scheme.clone();
        Ok(Self { model: checkpoint.into_model(), scheme, vocab })
    }

    pub fn scheme(&self) -> &LabelScheme {
        &self.scheme
    }

    /// Predicts a label per character and inserts the corresponding mark
    /// (or a space, for the spacing task) after each labeled character.
    /// Long texts are split into windows of at most `max_len - 2`
    /// characters with `overlap` characters of context on each side;
    /// predictions are taken only from the non-overlap core.
    pub fn restore(&self, text: &str, overlap: usize) -> Result<RestorationResult, RestoreError> {
        let stripped = strip_marks(text);
        let stripped_input = stripped.chars().count() != text.chars().count();
        let chars: Vec<char> = stripped.chars().collect();
        let n = chars.len();
        if n == 0 {
            return Ok(RestorationResult {
                output: String::new(),
                insertions: Vec::new(),
                stripped_input,
            });
        }

        let budget = self.model.config.max_len - 2;
        let windows: Vec<(usize, usize, usize, usize)> = if n <= budget {
            // A single window regardless of overlap.
            vec![(0, n, 0, n)]
        } else {
            if budget <= 2 * overlap {
                return Err(RestoreError::OverlapTooLarge {
                    overlap,
                    max_len: self.model.config.max_len,
                });
            }
            let core = budget - 2 * overlap;
            let mut spans = Vec::new();
            let mut start = 0;
            while start < n {
                let core_end = (start + core).min(n);
                let win_start = start.saturating_sub(overlap);
                let win_end = (core_end + overlap).min(n);
                spans.push((win_start, win_end, start, core_end));
                start = core_end;
            }
            spans
        };

        let mut labels: Vec<(char, f64)> = Vec::with_capacity(n);
        for (win_start, win_end, core_start, core_end) in windows {
            let mut ids = Vec::with_capacity(win_end - win_start + 2);
            ids.push(CLS_ID);
            ids.extend(chars[win_start..win_end].iter().map(|&c| self.vocab.char_id(c)));
            ids.push(SEP_ID);
            let mask = vec![1u8; ids.len()];
            let predicted = self.model.predict_with_probs(&ids, &mask)?;
            for pos in core_start..core_end {
                let (label_idx, prob) = predicted[pos - win_start];
                labels.push((self.scheme.labels()[label_idx], prob));
            }
        }
        debug_assert_eq!(labels.len(), n);

        let mut output = String::with_capacity(n * 3);
        let mut insertions = Vec::new();
        for (i, (&c, &(label, prob))) in chars.iter().zip(&labels).enumerate() {
            output.push(c);
            if label == NO_MARK {
                continue;
            }
            let mark = match self.scheme.task() {
                Task::Punctuation => label,
                Task::Spacing => ' ',
            };
            output.push(mark);
            insertions.push(Insertion { position: i, label, probability: prob });
        }
        Ok(RestorationResult { output, insertions, stripped_input })
    }
}
