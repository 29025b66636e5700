//! Normalization rule tables and the rule-file parser.
//!
//! Rules ship as data so that differences between source institutions'
//! notations stay configuration rather than code. The file format is one
//! entry per line, `kind<TAB>from<TAB>to`, codepoints written as `U+XXXX`;
//! `#` starts a comment.

use std::collections::{BTreeMap, BTreeSet};

use crate::types::INVENTORY;

/// Whether a quotation mark opens or closes a quotation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuoteDirection {
    Open,
    Close,
}

/// Parsed rule tables driving [`normalize`](super::normalize).
#[derive(Debug, Clone)]
pub struct NormalizationRules {
    replace: BTreeMap<char, char>,
    delete: BTreeSet<char>,
    brackets: Vec<(char, char)>,
    quotes: BTreeMap<char, QuoteDirection>,
    inventory: BTreeSet<char>,
}

/// A rule file could not be parsed or violates the rule invariants.
#[derive(Debug, thiserror::Error)]
pub enum RulesError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("rule conflict: {0}")]
    Conflict(String),
}

fn parse_codepoint(field: &str, line: usize) -> Result<char, RulesError> {
    let hex = field
        .strip_prefix("U+")
        .or_else(|| field.strip_prefix("u+"))
        .ok_or_else(|| RulesError::Parse {
            line,
            message: format!("expected U+XXXX codepoint, got `{field}`"),
        })?;
    let value = u32::from_str_radix(hex, 16).map_err(|_| RulesError::Parse {
        line,
        message: format!("bad hex codepoint `{field}`"),
    })?;
    char::from_u32(value).ok_or(RulesError::Parse {
        line,
        message: format!("`{field}` is not a Unicode scalar value"),
    })
}

impl NormalizationRules {
    /// Parses a rule file.
    pub fn parse(text: &str) -> Result<Self, RulesError> {
        let mut rules = NormalizationRules {
            replace: BTreeMap::new(),
            delete: BTreeSet::new(),
            brackets: Vec::new(),
            quotes: BTreeMap::new(),
            inventory: INVENTORY.iter().copied().collect(),
        };
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let entry = raw.trim_end();
            if entry.is_empty() || entry.starts_with('#') {
                continue;
            }
            let mut fields = entry.split('\t');
            let kind = fields.next().unwrap_or_default();
            let from = fields.next().ok_or_else(|| RulesError::Parse {
                line,
                message: "missing `from` field".into(),
            })?;
            let to = fields.next();
            match kind {
                "replace" => {
                    let from = parse_codepoint(from, line)?;
                    let to = parse_codepoint(
                        to.ok_or_else(|| RulesError::Parse {
                            line,
                            message: "replace needs a `to` field".into(),
                        })?,
                        line,
                    )?;
                    rules.replace.insert(from, to);
                }
                "delete" => {
                    rules.delete.insert(parse_codepoint(from, line)?);
                }
                "bracket" => {
                    let open = parse_codepoint(from, line)?;
                    let close = parse_codepoint(
                        to.ok_or_else(|| RulesError::Parse {
                            line,
                            message: "bracket needs a closing codepoint".into(),
                        })?,
                        line,
                    )?;
                    rules.brackets.push((open, close));
                }
                "quote" => {
                    let mark = parse_codepoint(from, line)?;
                    let dir = match to {
                        Some("open") => QuoteDirection::Open,
                        Some("close") => QuoteDirection::Close,
                        other => {
                            return Err(RulesError::Parse {
                                line,
                                message: format!(
                                    "quote direction must be open or close, got `{}`",
                                    other.unwrap_or("")
                                ),
                            })
                        }
                    };
                    rules.quotes.insert(mark, dir);
                }
                other => {
                    return Err(RulesError::Parse {
                        line,
                        message: format!("unknown rule kind `{other}`"),
                    })
                }
            }
        }
        rules.validate()?;
        Ok(rules)
    }

    /// The built-in default rule set.
    pub fn default_rules() -> Self {
        Self::parse(include_str!("../../data/default.rules")).expect("built-in rules are valid")
    }

    fn validate(&self) -> Result<(), RulesError> {
        for (&from, &to) in &self.replace {
            if !self.inventory.contains(&to) && !self.quotes.contains_key(&to) {
                return Err(RulesError::Conflict(format!(
                    "replace target {to:?} for {from:?} is outside the retained inventory"
                )));
            }
        }
        let mut seen = BTreeSet::new();
        let groups: [(&str, Vec<char>); 4] = [
            ("inventory", self.inventory.iter().copied().collect()),
            ("delete", self.delete.iter().copied().collect()),
            ("quote", self.quotes.keys().copied().collect()),
            (
                "bracket",
                self.brackets.iter().flat_map(|&(o, c)| [o, c]).collect(),
            ),
        ];
        for (name, chars) in groups {
            for c in chars {
                if !seen.insert(c) {
                    return Err(RulesError::Conflict(format!(
                        "{c:?} appears in more than one rule group (latest: {name})"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn replacement(&self, c: char) -> Option<char> {
        self.replace.get(&c).copied()
    }

    pub fn is_deleted(&self, c: char) -> bool {
        self.delete.contains(&c)
    }

    pub fn is_inventory(&self, c: char) -> bool {
        self.inventory.contains(&c)
    }

    pub fn quote_direction(&self, c: char) -> Option<QuoteDirection> {
        self.quotes.get(&c).copied()
    }

    pub fn bracket_close_for(&self, open: char) -> Option<char> {
        self.brackets
            .iter()
            .find(|&&(o, _)| o == open)
            .map(|&(_, c)| c)
    }

    pub fn is_bracket_close(&self, c: char) -> bool {
        self.brackets.iter().any(|&(_, close)| close == c)
    }

    /// True if `c` is any codepoint the rules treat as punctuation.
    pub fn is_known_mark(&self, c: char) -> bool {
        self.inventory.contains(&c)
            || self.delete.contains(&c)
            || self.quotes.contains_key(&c)
            || self.replace.contains_key(&c)
            || self
                .brackets
                .iter()
                .any(|&(o, cl)| o == c || cl == c)
    }

    /// Every non-inventory mark mentioned by the rules. Useful for
    /// generating mark-laced test inputs.
    pub fn known_marks(&self) -> Vec<char> {
        let mut marks: BTreeSet<char> = BTreeSet::new();
        marks.extend(self.replace.keys());
        marks.extend(&self.delete);
        marks.extend(self.quotes.keys());
        for &(o, c) in &self.brackets {
            marks.insert(o);
            marks.insert(c);
        }
        marks.into_iter().collect()
    }
}

impl Default for NormalizationRules {
    fn default() -> Self {
        Self::default_rules()
    }
}
