//! Punctuation and spacing restoration for classical Chinese (hanmun)
//! corpora.
//!
//! The pipeline: [`normalizer`] canonicalizes raw digitized text down to
//! six punctuation marks, [`dataset`] turns it into CoNLL-format
//! token-classification data (plus the derived spacing task), [`model`]
//! is a from-scratch transformer-encoder token classifier with exact
//! gradients, [`pipeline`] trains and evaluates it, and [`restore`] puts
//! predicted marks back into raw text.

pub mod dataset;
pub mod model;
pub mod normalizer;
pub mod pipeline;
pub mod restore;
pub mod tokenizer;
pub mod types;

pub use dataset::{derive_spacing, label_distribution, read_conll, split, write_conll, LabeledCorpus, SplitSpec};
pub use model::{AdamW, Checkpoint, ModelConfig, TokenClassifier};
pub use normalizer::{extract_labels, is_chinese_only, normalize, split_sequences, NormalizationRules};
pub use pipeline::{evaluate, train, MetricsReport, TrainingConfig};
pub use restore::{strip_marks, RestorationResult, Restorer};
pub use tokenizer::Vocab;
pub use types::{LabelScheme, NormalizedSequence, RawDocument, Source, Task};
