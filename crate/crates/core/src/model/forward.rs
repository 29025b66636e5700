//! Encoder forward pass: embeddings, masked multi-head self-attention,
//! residual + layer norm, feed-forward, and the per-token classification
//! head. Caches every intermediate needed for exact backpropagation.

use ndarray::{s, Array2, Axis};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{ModelConfig, ModelError, Parameters};

/// Additive score for masked key positions; exp() underflows to exactly
/// zero, so padding cannot leak into real positions.
pub(crate) const ATTENTION_MASK_BIAS: f64 = -1e9;
pub(crate) const LAYER_NORM_EPS: f64 = 1e-12;

const SQRT_2_OVER_PI: f64 = 0.797_884_560_802_865_4;
const GELU_COEF: f64 = 0.044_715;

pub(crate) fn gelu(x: f64) -> f64 {
    let u = SQRT_2_OVER_PI * (x + GELU_COEF * x * x * x);
    0.5 * x * (1.0 + u.tanh())
}

pub(crate) fn gelu_prime(x: f64) -> f64 {
    let x2 = x * x;
    let u = SQRT_2_OVER_PI * x * (1.0 + GELU_COEF * x2);
    let t = u.tanh();
    let sech2 = 1.0 - t * t;
    0.5 * (1.0 + t) + 0.5 * x * sech2 * SQRT_2_OVER_PI * (1.0 + 3.0 * GELU_COEF * x2)
}

/// Row-normalized inputs cached for the layer-norm backward pass.
#[derive(Debug, Clone)]
pub(crate) struct LayerNormCache {
    pub x_hat: Array2<f64>,
    pub inv_std: Vec<f64>,
}

#[derive(Debug, Clone)]
pub(crate) struct LayerCache {
    pub x_in: Array2<f64>,
    pub q: Array2<f64>,
    pub k: Array2<f64>,
    pub v: Array2<f64>,
    /// Post-softmax attention probabilities, one `T x T` matrix per head.
    pub probs: Vec<Array2<f64>>,
    /// Concatenated head outputs before the output projection.
    pub attn_concat: Array2<f64>,
    pub attn_drop: Option<Array2<f64>>,
    pub ln1: LayerNormCache,
    pub x_mid: Array2<f64>,
    pub ff_pre: Array2<f64>,
    pub ff_act: Array2<f64>,
    pub ff_drop: Option<Array2<f64>>,
    pub ln2: LayerNormCache,
}

#[derive(Debug, Clone)]
pub(crate) struct ForwardCache {
    pub emb_drop: Option<Array2<f64>>,
    pub layers: Vec<LayerCache>,
    /// Final hidden states feeding the classification head.
    pub x_final: Array2<f64>,
    pub logits: Array2<f64>,
}

/// Transformer-encoder token classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenClassifier {
    pub config: ModelConfig,
    pub params: Parameters,
}

impl TokenClassifier {
    /// Validates the configuration and initializes parameters from its
    /// seed.
    pub fn init(config: ModelConfig) -> Result<Self, ModelError> {
        config.validate()?;
        let params = Parameters::init(&config);
        Ok(Self { config, params })
    }

    pub fn from_parts(config: ModelConfig, params: Parameters) -> Result<Self, ModelError> {
        config.validate()?;
        Ok(Self { config, params })
    }

    fn check_input(&self, ids: &[usize], mask: &[u8]) -> Result<(), ModelError> {
        if ids.is_empty() || ids.len() != mask.len() {
            return Err(ModelError::ShapeMismatch(format!(
                "ids ({}) and mask ({}) must be equal and non-empty",
                ids.len(),
                mask.len()
            )));
        }
        if ids.len() > self.config.max_len {
            return Err(ModelError::ShapeMismatch(format!(
                "input of {} tokens exceeds max_len {}",
                ids.len(),
                self.config.max_len
            )));
        }
        if let Some(&id) = ids.iter().find(|&&id| id >= self.config.vocab_size) {
            return Err(ModelError::ShapeMismatch(format!(
                "token id {id} outside vocabulary of {}",
                self.config.vocab_size
            )));
        }
        if mask.iter().all(|&m| m == 0) {
            return Err(ModelError::ShapeMismatch("attention mask is all zero".into()));
        }
        Ok(())
    }

    /// Logits for one sequence in eval mode (dropout off); shape
    /// `len x num_labels`.
    pub fn forward(&self, ids: &[usize], mask: &[u8]) -> Result<Array2<f64>, ModelError> {
        Ok(self.forward_cached(ids, mask, None)?.logits)
    }

    pub(crate) fn forward_cached(
        &self,
        ids: &[usize],
        mask: &[u8],
        mut dropout: Option<&mut ChaCha8Rng>,
    ) -> Result<ForwardCache, ModelError> {
        self.check_input(ids, mask)?;
        let cfg = &self.config;
        let p = &self.params;
        let t_len = ids.len();
        let h = cfg.hidden_size;
        let dh = cfg.head_dim();
        let scale = 1.0 / (dh as f64).sqrt();

        let mut x = Array2::zeros((t_len, h));
        for (t, &id) in ids.iter().enumerate() {
            for j in 0..h {
                x[[t, j]] = p.token_embedding[[id, j]] + p.position_embedding[[t, j]];
            }
        }
        let emb_drop = self.maybe_dropout(&mut x, &mut dropout);

        let mut layers = Vec::with_capacity(cfg.num_layers);
        for layer in &p.layers {
            let x_in = x;
            let q = x_in.dot(&layer.wq) + &layer.bq;
            let k = x_in.dot(&layer.wk) + &layer.bk;
            let v = x_in.dot(&layer.wv) + &layer.bv;

            let mut attn_concat = Array2::zeros((t_len, h));
            let mut probs = Vec::with_capacity(cfg.num_heads);
            for head in 0..cfg.num_heads {
                let cols = s![.., head * dh..(head + 1) * dh];
                let qh = q.slice(cols);
                let kh = k.slice(cols);
                let vh = v.slice(cols);
                let mut scores = qh.dot(&kh.t());
                scores *= scale;
                for (j, &m) in mask.iter().enumerate() {
                    if m == 0 {
                        scores.column_mut(j).mapv_inplace(|s| s + ATTENTION_MASK_BIAS);
                    }
                }
                softmax_rows(&mut scores);
                attn_concat.slice_mut(cols).assign(&scores.dot(&vh));
                probs.push(scores);
            }

            let mut attn_out = attn_concat.dot(&layer.wo) + &layer.bo;
            let attn_drop = self.maybe_dropout(&mut attn_out, &mut dropout);
            let u1 = &x_in + &attn_out;
            let (x_mid, ln1) = layer_norm(&u1, &layer.ln1_gamma, &layer.ln1_beta);

            let ff_pre = x_mid.dot(&layer.ff_w1) + &layer.ff_b1;
            let ff_act = ff_pre.mapv(gelu);
            let mut ff_out = ff_act.dot(&layer.ff_w2) + &layer.ff_b2;
            let ff_drop = self.maybe_dropout(&mut ff_out, &mut dropout);
            let u2 = &x_mid + &ff_out;
            let (x_out, ln2) = layer_norm(&u2, &layer.ln2_gamma, &layer.ln2_beta);

            layers.push(LayerCache {
                x_in,
                q,
                k,
                v,
                probs,
                attn_concat,
                attn_drop,
                ln1,
                x_mid,
                ff_pre,
                ff_act,
                ff_drop,
                ln2,
            });
            x = x_out;
        }

        let logits = x.dot(&p.head_w) + &p.head_b;
        Ok(ForwardCache { emb_drop, layers, x_final: x, logits })
    }

    fn maybe_dropout(
        &self,
        x: &mut Array2<f64>,
        rng: &mut Option<&mut ChaCha8Rng>,
    ) -> Option<Array2<f64>> {
        let p = self.config.dropout;
        let rng = rng.as_deref_mut()?;
        if p == 0.0 {
            return None;
        }
        let keep = 1.0 / (1.0 - p);
        let mask = Array2::from_shape_simple_fn(x.raw_dim(), || {
            if rng.gen::<f64>() < p {
                0.0
            } else {
                keep
            }
        });
        *x *= &mask;
        Some(mask)
    }

    /// Predicted label index per content character (argmax over logits at
    /// non-special positions; ties break to the lowest label index).
    pub fn predict(&self, ids: &[usize], mask: &[u8]) -> Result<Vec<usize>, ModelError> {
        Ok(self.predict_with_probs(ids, mask)?.into_iter().map(|(l, _)| l).collect())
    }

    /// As [`predict`](Self::predict), also returning the softmax
    /// probability of each predicted label.
    pub fn predict_with_probs(
        &self,
        ids: &[usize],
        mask: &[u8],
    ) -> Result<Vec<(usize, f64)>, ModelError> {
        let logits = self.forward(ids, mask)?;
        let real = mask.iter().filter(|&&m| m == 1).count();
        let n_chars = real.saturating_sub(2);
        let mut out = Vec::with_capacity(n_chars);
        for t in 1..=n_chars {
            let row = logits.row(t);
            let mut best = 0;
            for (j, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = j;
                }
            }
            let lse = log_sum_exp(row.as_slice().expect("contiguous row"));
            out.push((best, (row[best] - lse).exp()));
        }
        Ok(out)
    }
}

pub(crate) fn log_sum_exp(row: &[f64]) -> f64 {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    max + row.iter().map(|&v| (v - max).exp()).sum::<f64>().ln()
}

pub(crate) fn softmax_rows(scores: &mut Array2<f64>) {
    for mut row in scores.axis_iter_mut(Axis(0)) {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
}

pub(crate) fn layer_norm(
    x: &Array2<f64>,
    gamma: &Array2<f64>,
    beta: &Array2<f64>,
) -> (Array2<f64>, LayerNormCache) {
    let d = x.ncols();
    let mut x_hat = Array2::zeros(x.raw_dim());
    let mut inv_std = Vec::with_capacity(x.nrows());
    for (i, row) in x.axis_iter(Axis(0)).enumerate() {
        let mean = row.sum() / d as f64;
        let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
        let istd = 1.0 / (var + LAYER_NORM_EPS).sqrt();
        inv_std.push(istd);
        for (j, &v) in row.iter().enumerate() {
            x_hat[[i, j]] = (v - mean) * istd;
        }
    }
    let mut y = x_hat.clone();
    for i in 0..y.nrows() {
        for j in 0..d {
            y[[i, j]] = y[[i, j]] * gamma[[0, j]] + beta[[0, j]];
        }
    }
    (y, LayerNormCache { x_hat, inv_std })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tokenizer::{CLS_ID, PAD_ID, SEP_ID};

    fn tiny_model() -> TokenClassifier {
        let cfg = ModelConfig {
            num_layers: 2,
            hidden_size: 8,
            num_heads: 2,
            ff_size: 16,
            max_len: 12,
            vocab_size: 10,
            num_labels: 7,
            dropout: 0.0,
            seed: 3,
        };
        TokenClassifier::init(cfg).unwrap()
    }

    #[test]
    fn logit_shape_matches_input_length() {
        let m = tiny_model();
        let ids = vec![CLS_ID, 4, 5, SEP_ID, PAD_ID];
        let mask = vec![1, 1, 1, 1, 0];
        let logits = m.forward(&ids, &mask).unwrap();
        assert_eq!(logits.shape(), &[5, 7]);
    }

    #[test]
    fn pad_token_values_do_not_affect_real_logits() {
        let m = tiny_model();
        let mask = vec![1, 1, 1, 1, 0, 0];
        let a = m.forward(&[CLS_ID, 4, 5, SEP_ID, PAD_ID, PAD_ID], &mask).unwrap();
        let b = m.forward(&[CLS_ID, 4, 5, SEP_ID, 7, 9], &mask).unwrap();
        for t in 0..4 {
            for c in 0..7 {
                assert_eq!(a[[t, c]], b[[t, c]], "logit ({t},{c}) changed with pad ids");
            }
        }
    }

    #[test]
    fn eval_forward_is_deterministic() {
        let m = tiny_model();
        let ids = vec![CLS_ID, 4, 5, 6, SEP_ID];
        let mask = vec![1; 5];
        assert_eq!(m.forward(&ids, &mask).unwrap(), m.forward(&ids, &mask).unwrap());
    }

    #[test]
    fn uniform_logits_tie_break_to_label_zero() {
        let mut m = tiny_model();
        // Zero head weights force identical logits for every label.
        m.params.head_w.fill(0.0);
        m.params.head_b.fill(0.0);
        let pred = m.predict(&[CLS_ID, 4, 5, SEP_ID], &[1, 1, 1, 1]).unwrap();
        assert_eq!(pred, vec![0, 0]);
    }

    #[test]
    fn predict_returns_one_label_per_character() {
        let m = tiny_model();
        let ids = vec![CLS_ID, 4, 5, 6, SEP_ID, PAD_ID, PAD_ID];
        let mask = vec![1, 1, 1, 1, 1, 0, 0];
        assert_eq!(m.predict(&ids, &mask).unwrap().len(), 3);
    }

    #[test]
    fn hand_set_logits_argmax() {
        let mut m = tiny_model();
        m.params.head_w.fill(0.0);
        m.params.head_b.fill(0.0);
        m.params.head_b[[0, 5]] = 10.0;
        let pred = m.predict(&[CLS_ID, 4, SEP_ID], &[1, 1, 1]).unwrap();
        assert_eq!(pred, vec![5]);
    }

    #[test]
    fn out_of_vocab_id_is_a_shape_error() {
        let m = tiny_model();
        assert!(matches!(
            m.forward(&[CLS_ID, 99, SEP_ID], &[1, 1, 1]),
            Err(ModelError::ShapeMismatch(_))
        ));
    }

    #[test]
    fn gelu_prime_matches_finite_differences() {
        for &x in &[-3.0, -1.0, -0.1, 0.0, 0.2, 1.5, 4.0] {
            let h = 1e-6;
            let fd = (gelu(x + h) - gelu(x - h)) / (2.0 * h);
            assert!((gelu_prime(x) - fd).abs() < 1e-8, "gelu'({x})");
        }
    }
}
