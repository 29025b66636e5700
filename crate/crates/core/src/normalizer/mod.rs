//! Canonicalizes raw digitized text down to the six retained punctuation
//! marks and converts the result into per-character label sequences.
//!
//! The normalization order is: mark replacement, bracket-span deletion,
//! quote resolution, explicit deletions, a sweep of residual punctuation,
//! then removal of leading marks and collapse of consecutive-mark runs.

mod rules;

pub use rules::{NormalizationRules, QuoteDirection, RulesError};

use crate::types::{is_cjk_ideograph, is_inventory_mark, LabelScheme, NormalizedSequence, RawDocument, NO_MARK};

/// Output of [`normalize`]: the canonical text plus any warnings raised
/// while cleaning it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Normalized {
    pub text: String,
    pub warnings: Vec<NormalizeWarning>,
}

/// Non-fatal issues found during normalization.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NormalizeWarning {
    /// An opening bracket had no matching close; everything from the
    /// opener to the end of the document was dropped. The offset is the
    /// character index in the whitespace-stripped input.
    UnbalancedBracket { offset: usize },
}

impl std::fmt::Display for NormalizeWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            NormalizeWarning::UnbalancedBracket { offset } => {
                write!(f, "unbalanced bracket at character offset {offset}; dropped span to end")
            }
        }
    }
}

/// The input to [`extract_labels`] violated the canonical-text contract.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ExtractError {
    #[error("sequence begins with punctuation mark `{mark}`")]
    LeadingMark { mark: char },
    #[error("consecutive punctuation marks at character index {index}")]
    ConsecutiveMarks { index: usize },
}

/// Reduces a raw document to canonical text containing only content
/// characters and the six retained marks, with no mark leading the text
/// and no two marks adjacent.
pub fn normalize(doc: &RawDocument, rules: &NormalizationRules) -> Normalized {
    let mut warnings = Vec::new();

    // Layout whitespace in digitized sources carries no signal.
    let mut chars: Vec<char> = doc.text.chars().filter(|c| !c.is_whitespace()).collect();

    for c in chars.iter_mut() {
        if let Some(to) = rules.replacement(*c) {
            *c = to;
        }
    }

    let chars = delete_bracket_spans(&chars, rules, &mut warnings);
    let chars = resolve_quotes(&chars, rules);

    let chars: Vec<char> = chars
        .into_iter()
        .filter(|&c| !rules.is_deleted(c))
        .filter(|&c| rules.is_inventory(c) || !is_sweepable(c))
        .collect();

    Normalized { text: collapse_marks(&chars, rules), warnings }
}

fn delete_bracket_spans(
    chars: &[char],
    rules: &NormalizationRules,
    warnings: &mut Vec<NormalizeWarning>,
) -> Vec<char> {
    let mut out = Vec::with_capacity(chars.len());
    // (length of `out` when the opener was seen, expected closer, offset)
    let mut stack: Vec<(usize, char, usize)> = Vec::new();
    for (i, &c) in chars.iter().enumerate() {
        if let Some(close) = rules.bracket_close_for(c) {
            stack.push((out.len(), close, i));
            continue;
        }
        if rules.is_bracket_close(c) {
            if let Some(pos) = stack.iter().rposition(|&(_, expected, _)| expected == c) {
                out.truncate(stack[pos].0);
                stack.truncate(pos);
            }
            // A stray closer is dropped either way.
            continue;
        }
        out.push(c);
    }
    if let Some(&(mark, _, offset)) = stack.first() {
        out.truncate(mark);
        warnings.push(NormalizeWarning::UnbalancedBracket { offset });
    }
    out
}

fn resolve_quotes(chars: &[char], rules: &NormalizationRules) -> Vec<char> {
    let mut out: Vec<char> = Vec::with_capacity(chars.len());
    for &c in chars {
        let Some(direction) = rules.quote_direction(c) else {
            out.push(c);
            continue;
        };
        let after_mark = out.last().is_some_and(|&prev| rules.is_known_mark(prev));
        // A quote directly after another mark is dropped. An opening quote
        // is dropped too: its comma replacement would bind to the token it
        // precedes. Only a closing quote keeps its segmenting function.
        if after_mark || out.is_empty() || direction == QuoteDirection::Open {
            continue;
        }
        out.push('，');
    }
    out
}

/// Residual punctuation-like codepoints outside the retained inventory.
fn is_sweepable(c: char) -> bool {
    let u = u32::from(c);
    (c.is_ascii() && !c.is_ascii_alphanumeric())
        || (0x00A1..=0x00BF).contains(&u)
        || (0x2000..=0x206F).contains(&u)
        || (0x2500..=0x25FF).contains(&u)
        || (0x3000..=0x303F).contains(&u)
        || (0xFE30..=0xFE4F).contains(&u)
        || (0xFF00..=0xFF65).contains(&u)
        || u == 0x30FB
}

fn collapse_marks(chars: &[char], rules: &NormalizationRules) -> String {
    let mut out = String::with_capacity(chars.len() * 3);
    // Starting "after a mark" strips any leading marks.
    let mut after_mark = true;
    for &c in chars {
        if rules.is_inventory(c) {
            if !after_mark {
                out.push(c);
                after_mark = true;
            }
            // Within a run only the first mark, bound to the preceding
            // token, is kept.
        } else {
            out.push(c);
            after_mark = false;
        }
    }
    out
}

/// True iff every codepoint is a CJK unified ideograph or a retained
/// punctuation mark. Sequences containing Hangul, Latin or anything else
/// are rejected.
pub fn is_chinese_only(text: &str) -> bool {
    text.chars().all(|c| is_cjk_ideograph(c) || is_inventory_mark(c))
}

/// Splits canonical text into characters and per-character labels: each
/// character's label is the mark that immediately followed it, or `O`.
pub fn extract_labels(text: &str, scheme: &LabelScheme) -> Result<NormalizedSequence, ExtractError> {
    let mut chars = Vec::new();
    let mut labels: Vec<char> = Vec::new();
    for c in text.chars() {
        if scheme.marks().contains(&c) {
            match labels.last_mut() {
                None => return Err(ExtractError::LeadingMark { mark: c }),
                Some(last) if *last != NO_MARK => {
                    return Err(ExtractError::ConsecutiveMarks { index: chars.len() })
                }
                Some(last) => *last = c,
            }
        } else {
            chars.push(c);
            labels.push(NO_MARK);
        }
    }
    Ok(NormalizedSequence::new(chars, labels))
}

/// Splits a sequence so every piece fits an encoder budget of
/// `max_len - 2` characters (two slots are reserved for the special
/// tokens added at encoding time). Cuts land immediately after the last
/// labeled character inside the budget window when one exists, otherwise
/// at the window boundary.
pub fn split_sequences(seq: &NormalizedSequence, max_len: usize) -> Vec<NormalizedSequence> {
    assert!(max_len >= 3, "max_len must leave a non-empty character budget");
    let budget = max_len - 2;
    let n = seq.len();
    if n <= budget {
        return vec![seq.clone()];
    }
    let mut out = Vec::new();
    let mut start = 0;
    while n - start > budget {
        let window = &seq.labels[start..start + budget];
        let cut = match window.iter().rposition(|&l| l != NO_MARK) {
            Some(p) => start + p + 1,
            None => start + budget,
        };
        out.push(NormalizedSequence::new(
            seq.chars[start..cut].to_vec(),
            seq.labels[start..cut].to_vec(),
        ));
        start = cut;
    }
    out.push(NormalizedSequence::new(
        seq.chars[start..].to_vec(),
        seq.labels[start..].to_vec(),
    ));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::Source;

    fn doc(text: &str) -> RawDocument {
        RawDocument::new("t", text, Source::Other)
    }

    fn norm(text: &str) -> String {
        normalize(&doc(text), &NormalizationRules::default_rules()).text
    }

    #[test]
    fn semicolon_becomes_ideographic_period() {
        assert_eq!(norm("曰；學矣"), "曰。學矣");
    }

    #[test]
    fn text_without_marks_is_unchanged() {
        assert_eq!(norm("學而時習之"), "學而時習之");
    }

    #[test]
    fn quotes_are_resolved_by_position() {
        // Opening quote dropped; closing quote after the period dropped.
        assert_eq!(norm("子曰「學矣。」可也"), "子曰學矣。可也");
        // A closing quote after a content character keeps its segmenting
        // function as a comma.
        assert_eq!(norm("子曰「學矣」可也"), "子曰學矣，可也");
    }

    #[test]
    fn fullwidth_marks_map_to_ascii_codepoints() {
        assert_eq!(norm("何如！可乎？曰："), "何如!可乎?曰:");
    }

    #[test]
    fn bracket_contents_are_deleted_including_nesting() {
        assert_eq!(norm("學（注【內】釋）而"), "學而");
        assert_eq!(norm("讀《論語》者"), "讀者");
    }

    #[test]
    fn unbalanced_bracket_drops_to_end_with_warning() {
        let result = normalize(&doc("學而（注釋時習"), &NormalizationRules::default_rules());
        assert_eq!(result.text, "學而");
        assert_eq!(result.warnings, vec![NormalizeWarning::UnbalancedBracket { offset: 2 }]);
    }

    #[test]
    fn leading_and_consecutive_marks_are_eliminated() {
        assert_eq!(norm("。學而，。時習"), "學而，時習");
        assert_eq!(norm("、、學"), "學");
    }

    #[test]
    fn whitespace_is_removed() {
        assert_eq!(norm("學而\n時習 之"), "學而時習之");
    }

    #[test]
    fn damaged_text_markers_are_deleted() {
        assert_eq!(norm("學○而□時"), "學而時");
    }

    #[test]
    fn normalize_is_idempotent_on_the_examples() {
        for text in ["曰；學矣", "子曰「學矣。」可也", "。學而，。時習", "學（注）而"] {
            let once = norm(text);
            assert_eq!(norm(&once), once, "idempotence failed for {text:?}");
        }
    }

    #[test]
    fn chinese_only_detection() {
        assert!(is_chinese_only("學而時習之。"));
        assert!(!is_chinese_only("學而 hello。"));
        assert!(!is_chinese_only("學而시습。"));
    }

    #[test]
    fn extract_labels_binds_marks_to_preceding_characters() {
        let seq = extract_labels("子曰:學矣。", &LabelScheme::punctuation()).unwrap();
        assert_eq!(seq.chars, vec!['子', '曰', '學', '矣']);
        assert_eq!(seq.labels, vec!['O', ':', 'O', '。']);
    }

    #[test]
    fn extract_labels_all_o_without_marks() {
        let seq = extract_labels("學而時習之", &LabelScheme::punctuation()).unwrap();
        assert_eq!(seq.labels, vec!['O'; 5]);
    }

    #[test]
    fn extract_labels_rejects_contract_violations() {
        let scheme = LabelScheme::punctuation();
        assert_eq!(
            extract_labels(":學", &scheme),
            Err(ExtractError::LeadingMark { mark: ':' })
        );
        assert_eq!(
            extract_labels("子。，學", &scheme),
            Err(ExtractError::ConsecutiveMarks { index: 1 })
        );
    }

    #[test]
    fn extract_then_reinsert_is_identity_on_canonical_text() {
        let scheme = LabelScheme::punctuation();
        for text in ["子曰:學矣。", "學而時習之", "知之者，不如好之者。"] {
            let seq = extract_labels(text, &scheme).unwrap();
            assert_eq!(seq.to_marked_text(), text);
        }
    }

    #[test]
    fn split_under_budget_is_a_no_op() {
        let seq = extract_labels("子曰壹", &LabelScheme::punctuation()).unwrap();
        let parts = split_sequences(&seq, 512);
        assert_eq!(parts, vec![seq]);
    }

    #[test]
    fn split_cuts_after_last_labeled_position_in_window() {
        // Ten characters, the only mark after index 6, budget 8.
        let chars: Vec<char> = "甲乙丙丁戊己庚辛壬癸".chars().collect();
        let mut labels = vec![NO_MARK; 10];
        labels[6] = '。';
        let seq = NormalizedSequence::new(chars, labels);
        let parts = split_sequences(&seq, 10);
        assert_eq!(parts.len(), 2);
        assert_eq!(parts[0].len(), 7);
        assert_eq!(parts[1].len(), 3);
        assert_eq!(parts[0].labels[6], '。');
    }

    #[test]
    fn split_falls_back_to_budget_boundary() {
        let chars: Vec<char> = "甲乙丙丁戊己庚辛壬癸".chars().collect();
        let seq = NormalizedSequence::new(chars, vec![NO_MARK; 10]);
        let parts = split_sequences(&seq, 7);
        assert_eq!(parts.iter().map(|p| p.len()).collect::<Vec<_>>(), vec![5, 5]);
    }

    #[test]
    fn split_preserves_order_and_content() {
        let seq = extract_labels("知之者，不如好之者。好之者，不如樂之者。", &LabelScheme::punctuation()).unwrap();
        let parts = split_sequences(&seq, 7);
        let mut chars = Vec::new();
        let mut labels = Vec::new();
        for p in &parts {
            assert!(p.len() <= 5);
            chars.extend(p.chars.iter().copied());
            labels.extend(p.labels.iter().copied());
        }
        assert_eq!(chars, seq.chars);
        assert_eq!(labels, seq.labels);
    }
}
