//! Labeled corpora: CoNLL serialization, the spacing-task derivation,
//! partitioning and label statistics.

mod conll;
mod split;
mod stats;

pub use conll::{conll_to_string, read_conll, write_conll, ConllError, ConllWarning};
pub use split::{split, SplitManifest, SplitOutcome, SplitSpec};
pub use stats::{label_distribution, render_distribution, LabelCount};

use std::collections::BTreeMap;

use crate::types::{LabelScheme, NormalizedSequence, Source, Task, NO_MARK, SPACING_MARK};

/// A collection of labeled sequences under one scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledCorpus {
    pub scheme: LabelScheme,
    pub sequences: Vec<NormalizedSequence>,
    /// Sequence counts per source, when the corpus was built from
    /// documents with known provenance. Empty after a plain CoNLL read.
    pub provenance: BTreeMap<Source, usize>,
}

/// A sequence or label violated the corpus invariants.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CorpusError {
    #[error("sequence {index} is empty")]
    EmptySequence { index: usize },
    #[error("sequence {index} carries label `{label}` outside the scheme")]
    LabelOutsideScheme { index: usize, label: char },
    #[error("expected a {expected} corpus, got {actual}")]
    WrongScheme { expected: Task, actual: Task },
}

impl LabeledCorpus {
    pub fn new(scheme: LabelScheme) -> Self {
        Self { scheme, sequences: Vec::new(), provenance: BTreeMap::new() }
    }

    pub fn push(&mut self, seq: NormalizedSequence) {
        self.sequences.push(seq);
    }

    pub fn push_from(&mut self, seq: NormalizedSequence, source: Source) {
        self.sequences.push(seq);
        *self.provenance.entry(source).or_insert(0) += 1;
    }

    pub fn len(&self) -> usize {
        self.sequences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }

    pub fn total_chars(&self) -> usize {
        self.sequences.iter().map(|s| s.len()).sum()
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        for (index, seq) in self.sequences.iter().enumerate() {
            if seq.is_empty() {
                return Err(CorpusError::EmptySequence { index });
            }
            if let Some(&label) = seq.labels.iter().find(|&&l| !self.scheme.contains(l)) {
                return Err(CorpusError::LabelOutsideScheme { index, label });
            }
        }
        Ok(())
    }
}

/// Derives the 2-label spacing corpus from a punctuation corpus: every
/// mark label becomes the segment boundary `_`, `O` stays `O`.
pub fn derive_spacing(corpus: &LabeledCorpus) -> Result<LabeledCorpus, CorpusError> {
    if corpus.scheme.task() != Task::Punctuation {
        return Err(CorpusError::WrongScheme {
            expected: Task::Punctuation,
            actual: corpus.scheme.task(),
        });
    }
    let sequences = corpus
        .sequences
        .iter()
        .map(|seq| {
            let labels = seq
                .labels
                .iter()
                .map(|&l| if l == NO_MARK { NO_MARK } else { SPACING_MARK })
                .collect();
            NormalizedSequence::new(seq.chars.clone(), labels)
        })
        .collect();
    Ok(LabeledCorpus {
        scheme: LabelScheme::spacing(),
        sequences,
        provenance: corpus.provenance.clone(),
    })
}
