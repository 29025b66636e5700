//! Training and evaluation over labeled corpora.

mod eval;
mod train;

pub use eval::{
    cooccurrence_report, evaluate, metrics_from_counts, render_kv, render_report, score_pairs,
    token_accuracy, Aggregate, EvalError, LabelMetrics, MetricsReport,
};
pub use train::{
    encode_batch, history_csv, train, EpochStats, TrainError, TrainOutcome, TrainingConfig,
};
