//! Per-label precision/recall/F1 evaluation and co-occurrence statistics.

use std::collections::HashMap;

use crate::dataset::LabeledCorpus;
use crate::model::{ModelError, TokenClassifier};
use crate::pipeline::train::encode_batch;
use crate::tokenizer::{EncodeError, Vocab};
use crate::types::{LabelScheme, NormalizedSequence, NO_MARK};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("test corpus scheme does not match the checkpoint scheme")]
    SchemeMismatch,
    #[error("gold and predicted sequences differ in length at pair {index}")]
    LengthMismatch { index: usize },
    #[error("label `{0}` is not in the scheme")]
    UnknownLabel(char),
    #[error(transparent)]
    Encode(#[from] EncodeError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Precision, recall and F1 from raw counts; 0/0 is defined as 0.
pub fn metrics_from_counts(tp: usize, fp: usize, fn_: usize) -> (f64, f64, f64) {
    let precision = if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 };
    let recall = if tp + fn_ == 0 { 0.0 } else { tp as f64 / (tp + fn_) as f64 };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    (precision, recall, f1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabelMetrics {
    pub label: char,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Gold occurrences of this label among evaluated positions.
    pub support: usize,
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aggregate {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Per-label rows plus pooled (micro) and unweighted-mean (macro)
/// aggregates.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub rows: Vec<LabelMetrics>,
    pub micro: Aggregate,
    pub macro_: Aggregate,
    pub exclude_o: bool,
}

/// Scores aligned gold/predicted label sequences. When `exclude_o` the
/// `O` label contributes no row and no pooled counts: an O-O agreement is
/// neither a hit nor an error, O predicted as X counts as X's false
/// positive, and X predicted as O counts as X's false negative.
pub fn score_pairs(
    pairs: &[(Vec<char>, Vec<char>)],
    scheme: &LabelScheme,
    exclude_o: bool,
) -> Result<MetricsReport, EvalError> {
    let included: Vec<char> = scheme
        .labels()
        .iter()
        .copied()
        .filter(|&l| !(exclude_o && l == NO_MARK))
        .collect();
    let mut tp: HashMap<char, usize> = HashMap::new();
    let mut fp: HashMap<char, usize> = HashMap::new();
    let mut fn_: HashMap<char, usize> = HashMap::new();
    let mut support: HashMap<char, usize> = HashMap::new();

    for (index, (gold, pred)) in pairs.iter().enumerate() {
        if gold.len() != pred.len() {
            return Err(EvalError::LengthMismatch { index });
        }
        for (&g, &p) in gold.iter().zip(pred) {
            if !scheme.contains(g) {
                return Err(EvalError::UnknownLabel(g));
            }
            if !scheme.contains(p) {
                return Err(EvalError::UnknownLabel(p));
            }
            if included.contains(&g) {
                *support.entry(g).or_insert(0) += 1;
            }
            if g == p {
                if included.contains(&g) {
                    *tp.entry(g).or_insert(0) += 1;
                }
            } else {
                if included.contains(&p) {
                    *fp.entry(p).or_insert(0) += 1;
                }
                if included.contains(&g) {
                    *fn_.entry(g).or_insert(0) += 1;
                }
            }
        }
    }

    let rows: Vec<LabelMetrics> = included
        .iter()
        .map(|&label| {
            let t = tp.get(&label).copied().unwrap_or(0);
            let f = fp.get(&label).copied().unwrap_or(0);
            let n = fn_.get(&label).copied().unwrap_or(0);
            let (precision, recall, f1) = metrics_from_counts(t, f, n);
            LabelMetrics {
                label,
                precision,
                recall,
                f1,
                support: support.get(&label).copied().unwrap_or(0),
                tp: t,
                fp: f,
                fn_: n,
            }
        })
        .collect();

    let pooled_tp: usize = rows.iter().map(|r| r.tp).sum();
    let pooled_fp: usize = rows.iter().map(|r| r.fp).sum();
    let pooled_fn: usize = rows.iter().map(|r| r.fn_).sum();
    let (mp, mr, mf) = metrics_from_counts(pooled_tp, pooled_fp, pooled_fn);
    let micro = Aggregate { precision: mp, recall: mr, f1: mf };

    let k = rows.len().max(1) as f64;
    let macro_ = Aggregate {
        precision: rows.iter().map(|r| r.precision).sum::<f64>() / k,
        recall: rows.iter().map(|r| r.recall).sum::<f64>() / k,
        f1: rows.iter().map(|r| r.f1).sum::<f64>() / k,
    };

    Ok(MetricsReport { rows, micro, macro_, exclude_o })
}

/// Runs the model over a test corpus and scores its predictions.
pub fn evaluate(
    model: &TokenClassifier,
    scheme: &LabelScheme,
    vocab: &Vocab,
    test: &LabeledCorpus,
    exclude_o: bool,
    batch_size: usize,
) -> Result<MetricsReport, EvalError> {
    if test.scheme != *scheme {
        return Err(EvalError::SchemeMismatch);
    }
    let mut pairs = Vec::with_capacity(test.len());
    for chunk in test.sequences.chunks(batch_size.max(1)) {
        let refs: Vec<&NormalizedSequence> = chunk.iter().collect();
        let batch = encode_batch(&refs, vocab, scheme)?;
        for (seq, enc) in chunk.iter().zip(&batch) {
            let pred_ids = model.predict(&enc.ids, &enc.attention_mask)?;
            let pred: Vec<char> = pred_ids.iter().map(|&i| scheme.labels()[i]).collect();
            pairs.push((seq.labels.clone(), pred));
        }
    }
    score_pairs(&pairs, scheme, exclude_o)
}

/// Character-level accuracy over a corpus (all labels included).
pub fn token_accuracy(
    model: &TokenClassifier,
    scheme: &LabelScheme,
    vocab: &Vocab,
    set: &LabeledCorpus,
    batch_size: usize,
) -> Result<f64, EvalError> {
    let report = evaluate(model, scheme, vocab, set, false, batch_size)?;
    Ok(report.micro.f1)
}

/// For each character, how often it appears within `window` positions
/// ending at a character bearing `label` (the labeled character itself
/// counts). Ranked by count descending, ties by codepoint.
pub fn cooccurrence_report(
    corpus: &LabeledCorpus,
    label: char,
    window: usize,
) -> Result<Vec<(char, usize)>, EvalError> {
    assert!(window >= 1, "window must be at least 1");
    if !corpus.scheme.contains(label) {
        return Err(EvalError::UnknownLabel(label));
    }
    let mut counts: HashMap<char, usize> = HashMap::new();
    for seq in &corpus.sequences {
        for (j, &l) in seq.labels.iter().enumerate() {
            if l != label {
                continue;
            }
            let start = j.saturating_sub(window - 1);
            for &c in &seq.chars[start..=j] {
                *counts.entry(c).or_insert(0) += 1;
            }
        }
    }
    let mut ranked: Vec<(char, usize)> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    Ok(ranked)
}

/// Aligned text table, one row per label plus the aggregates.
pub fn render_report(report: &MetricsReport) -> String {
    let mut out = String::from("label  precision  recall   f1       support\n");
    for row in &report.rows {
        out.push_str(&format!(
            "{:<6} {:<10.4} {:<8.4} {:<8.4} {}\n",
            row.label, row.precision, row.recall, row.f1, row.support
        ));
    }
    out.push_str(&format!(
        "micro  {:<10.4} {:<8.4} {:<8.4}\n",
        report.micro.precision, report.micro.recall, report.micro.f1
    ));
    out.push_str(&format!(
        "macro  {:<10.4} {:<8.4} {:<8.4}\n",
        report.macro_.precision, report.macro_.recall, report.macro_.f1
    ));
    out.push_str(&format!("exclude_o {}\n", report.exclude_o));
    out
}

/// Machine-readable `key=value` lines with full float precision.
pub fn render_kv(report: &MetricsReport) -> String {
    let mut out = String::new();
    out.push_str(&format!("exclude_o={}\n", report.exclude_o));
    for row in &report.rows {
        let l = row.label;
        out.push_str(&format!("label.{l}.precision={}\n", row.precision));
        out.push_str(&format!("label.{l}.recall={}\n", row.recall));
        out.push_str(&format!("label.{l}.f1={}\n", row.f1));
        out.push_str(&format!("label.{l}.support={}\n", row.support));
    }
    for (name, agg) in [("micro", report.micro), ("macro", report.macro_)] {
        out.push_str(&format!("{name}.precision={}\n", agg.precision));
        out.push_str(&format!("{name}.recall={}\n", agg.recall));
        out.push_str(&format!("{name}.f1={}\n", agg.f1));
    }
    out
}
