//! Cross-entropy over non-ignored positions.

use ndarray::Array2;

use super::forward::log_sum_exp;
use super::ModelError;
use crate::tokenizer::IGNORE_LABEL;

/// Mean cross-entropy over every position whose label is not the ignore
/// sentinel. Returns the mean and the number of positions used.
pub fn cross_entropy_loss(
    logits: &Array2<f64>,
    label_ids: &[i32],
) -> Result<(f64, usize), ModelError> {
    let (sum, count) = cross_entropy_sum(logits, label_ids)?;
    if count == 0 {
        return Err(ModelError::AllIgnored);
    }
    Ok((sum / count as f64, count))
}

/// Unnormalized cross-entropy sum plus position count, for pooling across
/// a batch.
pub(crate) fn cross_entropy_sum(
    logits: &Array2<f64>,
    label_ids: &[i32],
) -> Result<(f64, usize), ModelError> {
    if logits.nrows() != label_ids.len() {
        return Err(ModelError::ShapeMismatch(format!(
            "{} logit rows vs {} labels",
            logits.nrows(),
            label_ids.len()
        )));
    }
    let num_labels = logits.ncols() as i32;
    let mut sum = 0.0;
    let mut count = 0;
    for (t, &label) in label_ids.iter().enumerate() {
        if label == IGNORE_LABEL {
            continue;
        }
        if label < 0 || label >= num_labels {
            return Err(ModelError::ShapeMismatch(format!(
                "label id {label} outside 0..{num_labels}"
            )));
        }
        let row = logits.row(t);
        let lse = log_sum_exp(row.as_slice().expect("contiguous row"));
        sum += lse - row[label as usize];
        count += 1;
    }
    Ok((sum, count))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_logits_cost_ln_num_labels() {
        let logits = Array2::zeros((3, 7));
        let (loss, count) = cross_entropy_loss(&logits, &[0, 3, 6]).unwrap();
        assert!((loss - (7.0f64).ln()).abs() < 1e-12);
        assert_eq!(count, 3);
    }

    #[test]
    fn confident_correct_logits_cost_near_zero() {
        let mut logits = Array2::zeros((2, 7));
        logits[[0, 2]] = 50.0;
        logits[[1, 5]] = 50.0;
        let (loss, _) = cross_entropy_loss(&logits, &[2, 5]).unwrap();
        assert!(loss < 1e-12);
    }

    #[test]
    fn two_position_example_matches_manual_softmax() {
        let mut logits = Array2::zeros((2, 3));
        logits[[0, 0]] = 1.0;
        logits[[0, 1]] = 2.0;
        logits[[0, 2]] = 3.0;
        logits[[1, 0]] = 0.5;
        logits[[1, 1]] = -0.5;
        logits[[1, 2]] = 0.0;
        // Straight-line arithmetic, independent of the implementation.
        let z0: f64 = (1f64).exp() + (2f64).exp() + (3f64).exp();
        let p0 = (2f64).exp() / z0;
        let z1: f64 = (0.5f64).exp() + (-0.5f64).exp() + (0f64).exp();
        let p1 = (0.5f64).exp() / z1;
        let expected = (-(p0.ln()) - p1.ln()) / 2.0;
        let (loss, count) = cross_entropy_loss(&logits, &[1, 0]).unwrap();
        assert!((loss - expected).abs() < 1e-12);
        assert_eq!(count, 2);
    }

    #[test]
    fn ignored_positions_are_skipped() {
        let logits = Array2::zeros((3, 7));
        let (_, count) = cross_entropy_loss(&logits, &[IGNORE_LABEL, 1, IGNORE_LABEL]).unwrap();
        assert_eq!(count, 1);
    }

    #[test]
    fn all_ignored_is_an_error() {
        let logits = Array2::zeros((2, 7));
        assert!(matches!(
            cross_entropy_loss(&logits, &[IGNORE_LABEL, IGNORE_LABEL]),
            Err(ModelError::AllIgnored)
        ));
    }
}
