//! Character-level vocabulary and sequence encoding.
//!
//! Every character is a single token. The vocabulary file holds one token
//! per line (`id = line number - 1`), with the four special tokens on the
//! first four lines.

use std::collections::HashMap;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::dataset::LabeledCorpus;
use crate::types::{LabelScheme, NormalizedSequence};

pub const PAD_ID: usize = 0;
pub const UNK_ID: usize = 1;
pub const CLS_ID: usize = 2;
pub const SEP_ID: usize = 3;
pub const SPECIAL_TOKENS: [&str; 4] = ["[PAD]", "[UNK]", "[CLS]", "[SEP]"];

/// Sentinel excluded from loss and metrics at special-token and padding
/// positions.
pub const IGNORE_LABEL: i32 = -100;

#[derive(Debug, thiserror::Error)]
pub enum VocabError {
    #[error("vocabulary must start with {expected:?} on line {line}")]
    BadSpecial { line: usize, expected: &'static str },
    #[error("duplicate token `{token}` on line {line}")]
    Duplicate { line: usize, token: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, thiserror::Error)]
pub enum EncodeError {
    #[error("sequence of {len} characters exceeds the budget of {budget} (max_len {max_len})")]
    TooLong { len: usize, budget: usize, max_len: usize },
    #[error("label `{label}` is not in the {task} scheme")]
    UnknownLabel { label: char, task: String },
}

#[derive(Debug, thiserror::Error)]
pub enum DecodeError {
    #[error("token id {id} is outside the vocabulary (size {size})")]
    IdOutOfRange { id: usize, size: usize },
}

/// Token <-> id table over single characters plus the special tokens.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocab {
    fn from_tokens(tokens: Vec<String>) -> Result<Self, VocabError> {
        let mut index = HashMap::with_capacity(tokens.len());
        for (id, tok) in tokens.iter().enumerate() {
            if index.insert(tok.clone(), id).is_some() {
                return Err(VocabError::Duplicate { line: id + 1, token: tok.clone() });
            }
        }
        Ok(Self { tokens, index })
    }

    /// Builds a vocabulary from corpora: the special tokens, then `base`
    /// in order, then every character of the corpora not already present
    /// in first-appearance order. Returns the vocabulary and the number
    /// of tokens added beyond `base`.
    pub fn build(corpora: &[&LabeledCorpus], base: &[String]) -> (Self, usize) {
        let mut tokens: Vec<String> = SPECIAL_TOKENS.iter().map(|s| s.to_string()).collect();
        let mut seen: HashMap<String, ()> = tokens.iter().cloned().map(|t| (t, ())).collect();
        for tok in base {
            if seen.insert(tok.clone(), ()).is_none() {
                tokens.push(tok.clone());
            }
        }
        let mut added = 0;
        for corpus in corpora {
            for seq in &corpus.sequences {
                for &c in &seq.chars {
                    let tok = c.to_string();
                    if seen.insert(tok.clone(), ()).is_none() {
                        tokens.push(tok);
                        added += 1;
                    }
                }
            }
        }
        (Self::from_tokens(tokens).expect("construction cannot duplicate"), added)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn token_id(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    /// Id for a character, falling back to `[UNK]`.
    pub fn char_id(&self, c: char) -> usize {
        let mut buf = [0u8; 4];
        self.index.get(c.encode_utf8(&mut buf) as &str).copied().unwrap_or(UNK_ID)
    }

    /// One token per line; line number minus one is the id.
    pub fn to_file_string(&self) -> String {
        let mut out = String::new();
        for tok in &self.tokens {
            out.push_str(tok);
            out.push('\n');
        }
        out
    }

    pub fn from_file_string(text: &str) -> Result<Self, VocabError> {
        let tokens: Vec<String> = text.lines().map(str::to_string).collect();
        for (i, expected) in SPECIAL_TOKENS.iter().enumerate() {
            if tokens.get(i).map(String::as_str) != Some(*expected) {
                return Err(VocabError::BadSpecial { line: i + 1, expected });
            }
        }
        Self::from_tokens(tokens)
    }

    pub fn save(&self, path: &Path) -> Result<(), VocabError> {
        std::fs::write(path, self.to_file_string())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, VocabError> {
        Self::from_file_string(&std::fs::read_to_string(path)?)
    }

    /// SHA-256 of the serialized vocabulary, used to bind checkpoints to
    /// the vocabulary they were trained with.
    pub fn sha256(&self) -> [u8; 32] {
        let digest = Sha256::digest(self.to_file_string().as_bytes());
        digest.into()
    }
}

/// One encoded sequence: `[CLS] chars [SEP]` plus padding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Encoded {
    pub ids: Vec<usize>,
    pub attention_mask: Vec<u8>,
    pub label_ids: Vec<i32>,
}

impl Encoded {
    /// Number of content characters (real tokens minus CLS and SEP).
    pub fn char_count(&self) -> usize {
        self.attention_mask.iter().filter(|&&m| m == 1).count() - 2
    }
}

/// Encodes a sequence to fixed length `max_len`: ids `[CLS] c... [SEP] [PAD]...`,
/// mask 1 over real tokens, label ids aligned to characters with the
/// ignore sentinel at CLS/SEP/PAD positions.
pub fn encode(
    seq: &NormalizedSequence,
    vocab: &Vocab,
    scheme: &LabelScheme,
    max_len: usize,
) -> Result<Encoded, EncodeError> {
    let n = seq.len();
    if n + 2 > max_len {
        return Err(EncodeError::TooLong { len: n, budget: max_len - 2, max_len });
    }
    let mut ids = Vec::with_capacity(max_len);
    let mut mask = Vec::with_capacity(max_len);
    let mut label_ids = Vec::with_capacity(max_len);

    ids.push(CLS_ID);
    mask.push(1);
    label_ids.push(IGNORE_LABEL);
    for (&c, &l) in seq.chars.iter().zip(&seq.labels) {
        ids.push(vocab.char_id(c));
        mask.push(1);
        let label = scheme.index_of(l).ok_or(EncodeError::UnknownLabel {
            label: l,
            task: scheme.task().to_string(),
        })?;
        label_ids.push(label as i32);
    }
    ids.push(SEP_ID);
    mask.push(1);
    label_ids.push(IGNORE_LABEL);
    while ids.len() < max_len {
        ids.push(PAD_ID);
        mask.push(0);
        label_ids.push(IGNORE_LABEL);
    }
    Ok(Encoded { ids, attention_mask: mask, label_ids })
}

/// Inverse of [`encode`] over the character portion: specials and padding
/// are dropped, `[UNK]` renders as U+FFFD.
pub fn decode(ids: &[usize], vocab: &Vocab) -> Result<String, DecodeError> {
    let mut out = String::new();
    for &id in ids {
        if id >= vocab.len() {
            return Err(DecodeError::IdOutOfRange { id, size: vocab.len() });
        }
        match id {
            PAD_ID | CLS_ID | SEP_ID => {}
            UNK_ID => out.push('\u{FFFD}'),
            _ => out.push_str(vocab.token(id).expect("checked range")),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::LabelScheme;

    fn corpus_of(text: &str) -> LabeledCorpus {
        let mut corpus = LabeledCorpus::new(LabelScheme::punctuation());
        let chars: Vec<char> = text.chars().collect();
        let labels = vec!['O'; chars.len()];
        corpus.push(NormalizedSequence::new(chars, labels));
        corpus
    }

    #[test]
    fn build_extends_base_with_unseen_characters() {
        let base = vec!["子".to_string(), "曰".to_string()];
        let corpus = corpus_of("子學");
        let (vocab, added) = Vocab::build(&[&corpus], &base);
        assert_eq!(added, 1);
        assert_eq!(vocab.len(), 7);
        assert_eq!(vocab.token_id("子"), Some(4));
        assert_eq!(vocab.token_id("曰"), Some(5));
        assert_eq!(vocab.token_id("學"), Some(6));
    }

    #[test]
    fn empty_inputs_give_the_four_specials() {
        let (vocab, added) = Vocab::build(&[], &[]);
        assert_eq!(vocab.len(), 4);
        assert_eq!(added, 0);
    }

    #[test]
    fn building_twice_is_deterministic() {
        let corpus = corpus_of("學而時習之不亦說乎");
        let (a, _) = Vocab::build(&[&corpus], &[]);
        let (b, _) = Vocab::build(&[&corpus], &[]);
        assert_eq!(a, b);
        assert_eq!(a.sha256(), b.sha256());
    }

    #[test]
    fn encode_layout_matches_the_contract() {
        let corpus = corpus_of("子曰");
        let (vocab, _) = Vocab::build(&[&corpus], &[]);
        let seq = NormalizedSequence::new(vec!['子', '曰'], vec!['O', ':']);
        let enc = encode(&seq, &vocab, &LabelScheme::punctuation(), 6).unwrap();
        assert_eq!(enc.ids, vec![CLS_ID, 4, 5, SEP_ID, PAD_ID, PAD_ID]);
        assert_eq!(enc.attention_mask, vec![1, 1, 1, 1, 0, 0]);
        assert_eq!(enc.label_ids, vec![IGNORE_LABEL, 0, 2, IGNORE_LABEL, IGNORE_LABEL, IGNORE_LABEL]);
        assert_eq!(enc.char_count(), 2);
    }

    #[test]
    fn oov_maps_to_unk_and_keeps_its_label() {
        let corpus = corpus_of("子");
        let (vocab, _) = Vocab::build(&[&corpus], &[]);
        let seq = NormalizedSequence::new(vec!['學'], vec!['。']);
        let enc = encode(&seq, &vocab, &LabelScheme::punctuation(), 4).unwrap();
        assert_eq!(enc.ids[1], UNK_ID);
        assert_eq!(enc.label_ids[1], 6);
    }

    #[test]
    fn too_long_is_rejected() {
        let corpus = corpus_of("子曰");
        let (vocab, _) = Vocab::build(&[&corpus], &[]);
        let seq = NormalizedSequence::new(vec!['子', '曰'], vec!['O', 'O']);
        assert!(matches!(
            encode(&seq, &vocab, &LabelScheme::punctuation(), 3),
            Err(EncodeError::TooLong { .. })
        ));
    }

    #[test]
    fn decode_inverts_encode_for_in_vocab_text() {
        let corpus = corpus_of("學而時習之");
        let (vocab, _) = Vocab::build(&[&corpus], &[]);
        let seq = NormalizedSequence::new("學而時習之".chars().collect(), vec!['O'; 5]);
        let enc = encode(&seq, &vocab, &LabelScheme::punctuation(), 16).unwrap();
        assert_eq!(decode(&enc.ids, &vocab).unwrap(), "學而時習之");
    }

    #[test]
    fn decode_edge_cases() {
        let corpus = corpus_of("子");
        let (vocab, _) = Vocab::build(&[&corpus], &[]);
        assert_eq!(decode(&[PAD_ID, PAD_ID], &vocab).unwrap(), "");
        assert_eq!(decode(&[4], &vocab).unwrap(), "子");
        assert_eq!(decode(&[UNK_ID], &vocab).unwrap(), "\u{FFFD}");
        assert!(matches!(
            decode(&[99], &vocab),
            Err(DecodeError::IdOutOfRange { id: 99, .. })
        ));
    }

    #[test]
    fn file_round_trip_preserves_ids() {
        let corpus = corpus_of("温故而知新");
        let (vocab, _) = Vocab::build(&[&corpus], &[]);
        let text = vocab.to_file_string();
        let back = Vocab::from_file_string(&text).unwrap();
        assert_eq!(back, vocab);
    }

    #[test]
    fn file_missing_specials_is_rejected() {
        let err = Vocab::from_file_string("[PAD]\n[UNK]\n子\n").unwrap_err();
        assert!(matches!(err, VocabError::BadSpecial { line: 3, .. }));
    }

    #[test]
    fn label_positions_align_with_real_characters() {
        let corpus = corpus_of("子曰學");
        let (vocab, _) = Vocab::build(&[&corpus], &[]);
        let seq = NormalizedSequence::new(vec!['子', '曰', '學'], vec!['O', ':', '。']);
        let enc = encode(&seq, &vocab, &LabelScheme::punctuation(), 8).unwrap();
        for (i, (&label, &m)) in enc.label_ids.iter().zip(&enc.attention_mask).enumerate() {
            let is_char = i >= 1 && i <= 3;
            assert_eq!(label != IGNORE_LABEL, is_char);
            if label != IGNORE_LABEL {
                assert_eq!(m, 1);
            }
        }
    }
}
