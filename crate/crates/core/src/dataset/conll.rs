//! CoNLL-style serialization: one `char<TAB>label` line per character,
//! a blank line terminating each sequence, UTF-8 with LF line endings.

use std::io::{self, BufRead, Write};

use super::LabeledCorpus;
use crate::types::{LabelScheme, NormalizedSequence};

#[derive(Debug, thiserror::Error)]
pub enum ConllError {
    #[error("line {line}: unknown label `{label}` for the {task} scheme")]
    UnknownLabel { line: usize, label: String, task: String },
    #[error("line {line}: expected `char<TAB>label`")]
    Malformed { line: usize },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Non-fatal issues found while reading.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConllWarning {
    /// Consecutive blank lines produce an empty sequence; it is skipped.
    EmptySequence { line: usize },
}

impl std::fmt::Display for ConllWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ConllWarning::EmptySequence { line } => {
                write!(f, "line {line}: empty sequence skipped")
            }
        }
    }
}

/// Writes a corpus in CoNLL format. The stream ends with the blank line
/// that terminates the final sequence.
pub fn write_conll<W: Write>(corpus: &LabeledCorpus, mut out: W) -> io::Result<()> {
    let mut buf = String::new();
    for seq in &corpus.sequences {
        buf.clear();
        for (&c, &l) in seq.chars.iter().zip(&seq.labels) {
            buf.push(c);
            buf.push('\t');
            buf.push(l);
            buf.push('\n');
        }
        buf.push('\n');
        out.write_all(buf.as_bytes())?;
    }
    Ok(())
}

/// Serializes a corpus to an in-memory CoNLL string.
pub fn conll_to_string(corpus: &LabeledCorpus) -> String {
    let mut bytes = Vec::new();
    write_conll(corpus, &mut bytes).expect("writing to a Vec cannot fail");
    String::from_utf8(bytes).expect("CoNLL output is UTF-8")
}

/// Reads a CoNLL stream under the given scheme.
pub fn read_conll<R: BufRead>(
    reader: R,
    scheme: &LabelScheme,
) -> Result<(LabeledCorpus, Vec<ConllWarning>), ConllError> {
    let mut corpus = LabeledCorpus::new(scheme.clone());
    let mut warnings = Vec::new();
    let mut chars: Vec<char> = Vec::new();
    let mut labels: Vec<char> = Vec::new();
    let mut saw_any_line = false;

    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.is_empty() {
            if chars.is_empty() {
                if saw_any_line {
                    warnings.push(ConllWarning::EmptySequence { line: line_no });
                }
            } else {
                corpus.push(NormalizedSequence::new(
                    std::mem::take(&mut chars),
                    std::mem::take(&mut labels),
                ));
            }
            saw_any_line = true;
            continue;
        }
        saw_any_line = true;
        let (tok, label) = line
            .split_once('\t')
            .ok_or(ConllError::Malformed { line: line_no })?;
        let mut tok_chars = tok.chars();
        let (Some(c), None) = (tok_chars.next(), tok_chars.next()) else {
            return Err(ConllError::Malformed { line: line_no });
        };
        let mut label_chars = label.chars();
        let (Some(l), None) = (label_chars.next(), label_chars.next()) else {
            return Err(ConllError::UnknownLabel {
                line: line_no,
                label: label.to_string(),
                task: scheme.task().to_string(),
            });
        };
        if !scheme.contains(l) {
            return Err(ConllError::UnknownLabel {
                line: line_no,
                label: label.to_string(),
                task: scheme.task().to_string(),
            });
        }
        chars.push(c);
        labels.push(l);
    }
    // A final sequence without the trailing blank line is accepted.
    if !chars.is_empty() {
        corpus.push(NormalizedSequence::new(chars, labels));
    }
    Ok((corpus, warnings))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::LabelScheme;

    fn corpus_of(seqs: Vec<(&str, &str)>) -> LabeledCorpus {
        let mut corpus = LabeledCorpus::new(LabelScheme::punctuation());
        for (chars, labels) in seqs {
            corpus.push(NormalizedSequence::new(
                chars.chars().collect(),
                labels.chars().collect(),
            ));
        }
        corpus
    }

    #[test]
    fn write_matches_the_format_exactly() {
        let corpus = corpus_of(vec![("子曰", "O:")]);
        assert_eq!(conll_to_string(&corpus), "子\tO\n曰\t:\n\n");
    }

    #[test]
    fn empty_corpus_writes_an_empty_stream() {
        let corpus = LabeledCorpus::new(LabelScheme::punctuation());
        assert_eq!(conll_to_string(&corpus), "");
    }

    #[test]
    fn read_write_round_trip_is_bytewise_stable() {
        let corpus = corpus_of(vec![("子曰學矣", "O:O。"), ("學而時習之", "OOOOO")]);
        let bytes = conll_to_string(&corpus);
        let (back, warnings) = read_conll(bytes.as_bytes(), &LabelScheme::punctuation()).unwrap();
        assert!(warnings.is_empty());
        assert_eq!(back.sequences, corpus.sequences);
        assert_eq!(conll_to_string(&back), bytes);
    }

    #[test]
    fn unknown_label_reports_its_line() {
        let text = "子\tO\n曰\tX\n\n";
        let err = read_conll(text.as_bytes(), &LabelScheme::punctuation()).unwrap_err();
        match err {
            ConllError::UnknownLabel { line, label, .. } => {
                assert_eq!(line, 2);
                assert_eq!(label, "X");
            }
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn consecutive_blank_lines_warn_and_skip() {
        let text = "子\tO\n\n\n曰\t。\n\n";
        let (corpus, warnings) = read_conll(text.as_bytes(), &LabelScheme::punctuation()).unwrap();
        assert_eq!(corpus.len(), 2);
        assert_eq!(warnings, vec![ConllWarning::EmptySequence { line: 3 }]);
    }

    #[test]
    fn missing_tab_is_malformed() {
        let err = read_conll("子 O\n\n".as_bytes(), &LabelScheme::punctuation()).unwrap_err();
        assert!(matches!(err, ConllError::Malformed { line: 1 }));
    }

    #[test]
    fn final_sequence_without_trailing_blank_is_accepted() {
        let (corpus, _) = read_conll("子\tO\n曰\t:".as_bytes(), &LabelScheme::punctuation()).unwrap();
        assert_eq!(corpus.len(), 1);
    }
}
