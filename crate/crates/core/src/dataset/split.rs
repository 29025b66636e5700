//! Seeded train/validation/test partitioning over whole sequences.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::LabeledCorpus;

/// Partition fractions. The test share is carved off first; the
/// validation share is then taken from the training portion.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub test_fraction: f64,
    pub val_fraction_of_train: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self { train_fraction: 0.9, test_fraction: 0.1, val_fraction_of_train: 0.1, seed: 42 }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<(), String> {
        let in_range = |f: f64| (0.0..=1.0).contains(&f);
        if !in_range(self.train_fraction)
            || !in_range(self.test_fraction)
            || !in_range(self.val_fraction_of_train)
        {
            return Err("split fractions must lie in [0, 1]".into());
        }
        if (self.train_fraction + self.test_fraction - 1.0).abs() > 1e-9 {
            return Err("train and test fractions must sum to 1".into());
        }
        Ok(())
    }
}

/// Zero-based sequence indices per partition, each sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitManifest {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl SplitManifest {
    /// Renders the manifest as `partition<TAB>seq{index}` lines.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (name, indices) in [("train", &self.train), ("val", &self.val), ("test", &self.test)] {
            for &i in indices.iter() {
                out.push_str(&format!("{name}\tseq{i:06}\n"));
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct SplitOutcome {
    pub train: LabeledCorpus,
    pub val: LabeledCorpus,
    pub test: LabeledCorpus,
    pub manifest: SplitManifest,
    pub warnings: Vec<String>,
}

/// Partitions a corpus by whole sequences with a seeded shuffle.
pub fn split(corpus: &LabeledCorpus, spec: &SplitSpec) -> SplitOutcome {
    assert!(!corpus.is_empty(), "cannot split an empty corpus");
    spec.validate().expect("invalid split spec");

    let n = corpus.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    order.shuffle(&mut rng);

    let n_test = ((n as f64 * spec.test_fraction).round() as usize).min(n);
    let mut test: Vec<usize> = order[..n_test].to_vec();
    let rest = &order[n_test..];
    let n_val = ((rest.len() as f64 * spec.val_fraction_of_train).round() as usize).min(rest.len());
    let mut val: Vec<usize> = rest[..n_val].to_vec();
    let mut train: Vec<usize> = rest[n_val..].to_vec();
    train.sort_unstable();
    val.sort_unstable();
    test.sort_unstable();

    let mut warnings = Vec::new();
    if train.is_empty() {
        warnings.push("training partition is empty".into());
    }
    if val.is_empty() {
        warnings.push("validation partition is empty".into());
    }
    if test.is_empty() {
        warnings.push("test partition is empty".into());
    }

    let materialize = |indices: &[usize]| {
        let mut part = LabeledCorpus::new(corpus.scheme.clone());
        for &i in indices {
            part.push(corpus.sequences[i].clone());
        }
        part
    };

    SplitOutcome {
        train: materialize(&train),
        val: materialize(&val),
        test: materialize(&test),
        manifest: SplitManifest { train, val, test },
        warnings,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{LabelScheme, NormalizedSequence};

    fn corpus_of(n: usize) -> LabeledCorpus {
        let mut corpus = LabeledCorpus::new(LabelScheme::punctuation());
        for i in 0..n {
            let c = char::from_u32(0x4E00 + (i as u32 % 64)).unwrap();
            corpus.push(NormalizedSequence::new(vec![c, c], vec!['O', '。']));
        }
        corpus
    }

    #[test]
    fn hundred_sequences_split_81_9_10() {
        let outcome = split(&corpus_of(100), &SplitSpec::default());
        assert_eq!(outcome.train.len(), 81);
        assert_eq!(outcome.val.len(), 9);
        assert_eq!(outcome.test.len(), 10);
        assert!(outcome.warnings.is_empty());
    }

    #[test]
    fn single_sequence_goes_to_train_with_warnings() {
        let outcome = split(&corpus_of(1), &SplitSpec::default());
        assert_eq!(outcome.train.len(), 1);
        assert_eq!(outcome.val.len(), 0);
        assert_eq!(outcome.test.len(), 0);
        assert!(!outcome.warnings.is_empty());
    }

    #[test]
    fn same_seed_gives_identical_partitions() {
        let corpus = corpus_of(57);
        let a = split(&corpus, &SplitSpec::default());
        let b = split(&corpus, &SplitSpec::default());
        assert_eq!(a.manifest, b.manifest);
    }

    #[test]
    fn different_seed_gives_a_different_shuffle() {
        let corpus = corpus_of(200);
        let a = split(&corpus, &SplitSpec::default());
        let b = split(&corpus, &SplitSpec { seed: 7, ..SplitSpec::default() });
        assert_ne!(a.manifest, b.manifest);
    }

    #[test]
    fn partitions_are_disjoint_and_exhaustive() {
        let corpus = corpus_of(83);
        let outcome = split(&corpus, &SplitSpec::default());
        let mut all: Vec<usize> = outcome
            .manifest
            .train
            .iter()
            .chain(&outcome.manifest.val)
            .chain(&outcome.manifest.test)
            .copied()
            .collect();
        all.sort_unstable();
        assert_eq!(all, (0..83).collect::<Vec<_>>());
    }

    #[test]
    fn manifest_renders_partition_lines() {
        let outcome = split(&corpus_of(3), &SplitSpec::default());
        let rendered = outcome.manifest.render();
        assert_eq!(rendered.lines().count(), 3);
        assert!(rendered.lines().all(|l| l.contains("\tseq")));
    }
}
