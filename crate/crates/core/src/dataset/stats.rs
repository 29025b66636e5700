//! Label distribution statistics over a corpus.

use super::LabeledCorpus;

/// Occurrences of one label.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabelCount {
    pub label: char,
    pub count: usize,
    pub fraction: f64,
}

/// Counts every label in scheme order. Counts sum to the total character
/// count; fractions sum to 1 (or are all zero for an empty corpus).
pub fn label_distribution(corpus: &LabeledCorpus) -> Vec<LabelCount> {
    let labels = corpus.scheme.labels();
    let mut counts = vec![0usize; labels.len()];
    for seq in &corpus.sequences {
        for &l in &seq.labels {
            if let Some(i) = corpus.scheme.index_of(l) {
                counts[i] += 1;
            }
        }
    }
    let total: usize = counts.iter().sum();
    labels
        .iter()
        .zip(&counts)
        .map(|(&label, &count)| LabelCount {
            label,
            count,
            fraction: if total == 0 { 0.0 } else { count as f64 / total as f64 },
        })
        .collect()
}

/// Renders the distribution as an aligned text table.
pub fn render_distribution(distribution: &[LabelCount]) -> String {
    let mut out = String::from("label  count      fraction\n");
    for row in distribution {
        out.push_str(&format!("{:<6} {:<10} {:.6}\n", row.label, row.count, row.fraction));
    }
    out
}
