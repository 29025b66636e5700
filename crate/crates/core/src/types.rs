//! Shared domain types: documents, label schemes and labeled sequences.

use std::fmt;

/// The six punctuation marks retained after normalization.
pub const INVENTORY: [char; 6] = ['!', ':', '?', '，', '、', '。'];

/// Label assigned to a character with no mark following it.
pub const NO_MARK: char = 'O';

/// Label assigned to a segment boundary in the spacing task.
pub const SPACING_MARK: char = '_';

/// Returns true if `c` is one of the six retained punctuation marks.
pub fn is_inventory_mark(c: char) -> bool {
    INVENTORY.contains(&c)
}

/// Returns true if `c` is a CJK unified ideograph (base block, the
/// extension blocks, or a compatibility ideograph).
pub fn is_cjk_ideograph(c: char) -> bool {
    matches!(u32::from(c),
        0x4E00..=0x9FFF      // CJK Unified Ideographs
        | 0x3400..=0x4DBF    // Extension A
        | 0x20000..=0x2A6DF  // Extension B
        | 0x2A700..=0x2B73F  // Extension C
        | 0x2B740..=0x2B81F  // Extension D
        | 0x2B820..=0x2CEAF  // Extension E
        | 0x2CEB0..=0x2EBEF  // Extension F
        | 0x2EBF0..=0x2EE5F  // Extension I
        | 0x30000..=0x3134F  // Extension G
        | 0x31350..=0x323AF  // Extension H
        | 0xF900..=0xFAFF    // Compatibility Ideographs
    )
}

/// Origin of a raw document.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Source {
    /// Court annal records.
    Ajd,
    /// Digitized Confucian texts.
    Drc,
    /// Anything else.
    Other,
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Source::Ajd => write!(f, "AJD"),
            Source::Drc => write!(f, "DRC"),
            Source::Other => write!(f, "OTHER"),
        }
    }
}

impl std::str::FromStr for Source {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "AJD" => Ok(Source::Ajd),
            "DRC" => Ok(Source::Drc),
            "OTHER" => Ok(Source::Other),
            other => Err(format!("unknown source `{other}`")),
        }
    }
}

/// A raw digitized source text, prior to normalization.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawDocument {
    pub id: String,
    pub text: String,
    pub source: Source,
}

impl RawDocument {
    pub fn new(id: impl Into<String>, text: impl Into<String>, source: Source) -> Self {
        let id = id.into();
        assert!(!id.is_empty(), "document id must be non-empty");
        Self { id, text: text.into(), source }
    }

    /// Builds a document from raw bytes, rejecting invalid UTF-8.
    pub fn from_bytes(id: impl Into<String>, bytes: &[u8], source: Source) -> Result<Self, InvalidEncoding> {
        let text = std::str::from_utf8(bytes).map_err(|e| InvalidEncoding { offset: e.valid_up_to() })?;
        Ok(Self::new(id, text, source))
    }
}

/// Input bytes were not valid UTF-8.
#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
#[error("invalid UTF-8 encoding at byte offset {offset}")]
pub struct InvalidEncoding {
    pub offset: usize,
}

/// The task a label scheme belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Task {
    Punctuation,
    Spacing,
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Task::Punctuation => write!(f, "punctuation"),
            Task::Spacing => write!(f, "spacing"),
        }
    }
}

/// Ordered label set for one task. Label `O` (no mark) is always index 0.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelScheme {
    task: Task,
    labels: Vec<char>,
}

impl LabelScheme {
    /// The 7-label punctuation scheme: `O` plus the six retained marks.
    pub fn punctuation() -> Self {
        let mut labels = vec![NO_MARK];
        labels.extend(INVENTORY);
        Self { task: Task::Punctuation, labels }
    }

    /// The 2-label spacing scheme: `O` and `_`.
    pub fn spacing() -> Self {
        Self { task: Task::Spacing, labels: vec![NO_MARK, SPACING_MARK] }
    }

    pub fn for_task(task: Task) -> Self {
        match task {
            Task::Punctuation => Self::punctuation(),
            Task::Spacing => Self::spacing(),
        }
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn labels(&self) -> &[char] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Index of `label` within the scheme, if present.
    pub fn index_of(&self, label: char) -> Option<usize> {
        self.labels.iter().position(|&l| l == label)
    }

    pub fn contains(&self, label: char) -> bool {
        self.labels.contains(&label)
    }

    /// The non-`O` labels, i.e. the marks this scheme can attach to a character.
    pub fn marks(&self) -> &[char] {
        &self.labels[1..]
    }
}

/// A run of characters with one label per character. The label is the
/// mark that followed the character in the source text, or `O`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NormalizedSequence {
    pub chars: Vec<char>,
    pub labels: Vec<char>,
}

impl NormalizedSequence {
    pub fn new(chars: Vec<char>, labels: Vec<char>) -> Self {
        assert_eq!(chars.len(), labels.len(), "one label per character");
        Self { chars, labels }
    }

    pub fn len(&self) -> usize {
        self.chars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chars.is_empty()
    }

    /// The characters as a `String`, without any labels applied.
    pub fn text(&self) -> String {
        self.chars.iter().collect()
    }

    /// Re-inserts each non-`O` label after its character, producing
    /// canonical punctuated text.
    pub fn to_marked_text(&self) -> String {
        let mut out = String::new();
        for (&c, &l) in self.chars.iter().zip(&self.labels) {
            out.push(c);
            if l != NO_MARK {
                out.push(l);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn punctuation_scheme_is_seven_labels_in_order() {
        let s = LabelScheme::punctuation();
        assert_eq!(s.labels(), &['O', '!', ':', '?', '，', '、', '。']);
        assert_eq!(s.index_of('O'), Some(0));
        assert_eq!(s.index_of(':'), Some(2));
    }

    #[test]
    fn spacing_scheme_is_two_labels() {
        let s = LabelScheme::spacing();
        assert_eq!(s.labels(), &['O', '_']);
    }

    #[test]
    fn cjk_detection_covers_extensions_and_rejects_hangul_latin() {
        assert!(is_cjk_ideograph('學'));
        assert!(is_cjk_ideograph('\u{20000}'));
        assert!(!is_cjk_ideograph('시'));
        assert!(!is_cjk_ideograph('a'));
        assert!(!is_cjk_ideograph('。'));
    }

    #[test]
    fn invalid_utf8_is_rejected_with_offset() {
        let err = RawDocument::from_bytes("d1", &[0xE5, 0xAD, 0xFF], Source::Other).unwrap_err();
        assert_eq!(err.offset, 0);
    }

    #[test]
    fn marked_text_round_trip() {
        let seq = NormalizedSequence::new(vec!['子', '曰', '學', '矣'], vec!['O', ':', 'O', '。']);
        assert_eq!(seq.to_marked_text(), "子曰:學矣。");
    }
}
