//! Exact backpropagation through the encoder stack.

use ndarray::{s, Array2, Axis};
use rand_chacha::ChaCha8Rng;

use super::forward::{gelu_prime, ForwardCache, LayerNormCache};
use super::loss::cross_entropy_sum;
use super::{Gradients, ModelError, Parameters, TokenClassifier};
use crate::tokenizer::Encoded;

/// Loss and gradients for one batch.
#[derive(Debug)]
pub struct BackwardResult {
    /// Mean cross-entropy over every counted position in the batch.
    pub loss: f64,
    /// Number of positions that carried a real label.
    pub positions: usize,
    pub grads: Gradients,
}

impl TokenClassifier {
    /// Mean cross-entropy of a batch in eval mode.
    pub fn loss_batch(&self, batch: &[Encoded]) -> Result<(f64, usize), ModelError> {
        let mut total = 0.0;
        let mut count = 0;
        for enc in batch {
            let logits = self.forward(&enc.ids, &enc.attention_mask)?;
            let (sum, n) = cross_entropy_sum(&logits, &enc.label_ids)?;
            total += sum;
            count += n;
        }
        if count == 0 {
            return Err(ModelError::AllIgnored);
        }
        Ok((total / count as f64, count))
    }

    /// Computes the batch loss and the exact gradient of that loss with
    /// respect to every parameter. With a dropout RNG the sampled masks
    /// are recorded so the gradients match the sampled forward pass.
    pub fn backward_batch(
        &self,
        batch: &[Encoded],
        mut dropout_rng: Option<&mut ChaCha8Rng>,
    ) -> Result<BackwardResult, ModelError> {
        let mut caches = Vec::with_capacity(batch.len());
        let mut total = 0.0;
        let mut count = 0usize;
        for enc in batch {
            let cache = self.forward_cached(&enc.ids, &enc.attention_mask, dropout_rng.as_deref_mut())?;
            let (sum, n) = cross_entropy_sum(&cache.logits, &enc.label_ids)?;
            total += sum;
            count += n;
            caches.push(cache);
        }
        if count == 0 {
            return Err(ModelError::AllIgnored);
        }
        let loss = total / count as f64;
        if !loss.is_finite() {
            return Err(ModelError::NonFinite("batch loss".into()));
        }

        let mut grads = Parameters::zeros_like(&self.config);
        for (enc, cache) in batch.iter().zip(&caches) {
            let dlogits = loss_gradient(&cache.logits, &enc.label_ids, count);
            self.backprop_sequence(enc, cache, dlogits, &mut grads);
        }
        Ok(BackwardResult { loss, positions: count, grads })
    }

    fn backprop_sequence(
        &self,
        enc: &Encoded,
        cache: &ForwardCache,
        dlogits: Array2<f64>,
        grads: &mut Gradients,
    ) {
        let cfg = &self.config;
        let p = &self.params;
        let dh = cfg.head_dim();
        let scale = 1.0 / (dh as f64).sqrt();

        // Classification head: logits = X W + b.
        add_linear_grads(&cache.x_final, &dlogits, &mut grads.head_w, &mut grads.head_b);
        let mut dx = dlogits.dot(&p.head_w.t());

        for l in (0..cfg.num_layers).rev() {
            let layer = &p.layers[l];
            let lc = &cache.layers[l];
            let g = &mut grads.layers[l];

            // LN2 over x_mid + ff_out.
            let (du2, dg2, db2) = layer_norm_backward(&dx, &lc.ln2, &layer.ln2_gamma);
            g.ln2_gamma += &dg2;
            g.ln2_beta += &db2;

            let mut dff_out = du2.clone();
            if let Some(mask) = &lc.ff_drop {
                dff_out *= mask;
            }

            // ff_out = gelu(x_mid W1 + b1) W2 + b2.
            add_linear_grads(&lc.ff_act, &dff_out, &mut g.ff_w2, &mut g.ff_b2);
            let dact = dff_out.dot(&layer.ff_w2.t());
            let mut dpre = dact;
            dpre.zip_mut_with(&lc.ff_pre, |d, &pre| *d *= gelu_prime(pre));
            add_linear_grads(&lc.x_mid, &dpre, &mut g.ff_w1, &mut g.ff_b1);
            let mut dx_mid = du2;
            dx_mid += &dpre.dot(&layer.ff_w1.t());

            // LN1 over x_in + attn_out.
            let (du1, dg1, db1) = layer_norm_backward(&dx_mid, &lc.ln1, &layer.ln1_gamma);
            g.ln1_gamma += &dg1;
            g.ln1_beta += &db1;

            let mut dattn_out = du1.clone();
            if let Some(mask) = &lc.attn_drop {
                dattn_out *= mask;
            }

            // attn_out = concat(heads) Wo + bo.
            add_linear_grads(&lc.attn_concat, &dattn_out, &mut g.wo, &mut g.bo);
            let dconcat = dattn_out.dot(&layer.wo.t());

            let t_len = lc.x_in.nrows();
            let mut dq = Array2::zeros((t_len, cfg.hidden_size));
            let mut dk = Array2::zeros((t_len, cfg.hidden_size));
            let mut dv = Array2::zeros((t_len, cfg.hidden_size));
            for head in 0..cfg.num_heads {
                let cols = s![.., head * dh..(head + 1) * dh];
                let probs = &lc.probs[head];
                let da_h = dconcat.slice(cols);
                let vh = lc.v.slice(cols);
                let qh = lc.q.slice(cols);
                let kh = lc.k.slice(cols);

                let dp = da_h.dot(&vh.t());
                dv.slice_mut(cols).assign(&probs.t().dot(&da_h));
                let ds = softmax_rows_backward(probs, &dp);
                dq.slice_mut(cols).assign(&(ds.dot(&kh).mapv(|v| v * scale)));
                dk.slice_mut(cols).assign(&(ds.t().dot(&qh).mapv(|v| v * scale)));
            }

            add_linear_grads(&lc.x_in, &dq, &mut g.wq, &mut g.bq);
            add_linear_grads(&lc.x_in, &dk, &mut g.wk, &mut g.bk);
            add_linear_grads(&lc.x_in, &dv, &mut g.wv, &mut g.bv);

            let mut dx_in = du1;
            dx_in += &dq.dot(&layer.wq.t());
            dx_in += &dk.dot(&layer.wk.t());
            dx_in += &dv.dot(&layer.wv.t());
            dx = dx_in;
        }

        if let Some(mask) = &cache.emb_drop {
            dx *= mask;
        }
        for (t, &id) in enc.ids.iter().enumerate() {
            for j in 0..cfg.hidden_size {
                let d = dx[[t, j]];
                grads.token_embedding[[id, j]] += d;
                grads.position_embedding[[t, j]] += d;
            }
        }
    }
}

/// d(mean CE)/d(logits): `(softmax - onehot) / total_positions` at counted
/// positions, zero elsewhere.
fn loss_gradient(logits: &Array2<f64>, label_ids: &[i32], total_positions: usize) -> Array2<f64> {
    let mut dlogits = Array2::zeros(logits.raw_dim());
    let inv = 1.0 / total_positions as f64;
    for (t, &label) in label_ids.iter().enumerate() {
        if label < 0 {
            continue;
        }
        let row = logits.row(t);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for &v in row.iter() {
            sum += (v - max).exp();
        }
        for (c, &v) in row.iter().enumerate() {
            dlogits[[t, c]] = (v - max).exp() / sum * inv;
        }
        dlogits[[t, label as usize]] -= inv;
    }
    dlogits
}

/// Accumulates gradients of `y = x w + b`: `dw += x^T dy`, `db += colsum(dy)`.
fn add_linear_grads(
    x: &Array2<f64>,
    dy: &Array2<f64>,
    dw: &mut Array2<f64>,
    db: &mut Array2<f64>,
) {
    *dw += &x.t().dot(dy);
    let col_sums = dy.sum_axis(Axis(0));
    for (j, &v) in col_sums.iter().enumerate() {
        db[[0, j]] += v;
    }
}

fn layer_norm_backward(
    dy: &Array2<f64>,
    cache: &LayerNormCache,
    gamma: &Array2<f64>,
) -> (Array2<f64>, Array2<f64>, Array2<f64>) {
    let (rows, d) = dy.dim();
    let inv_d = 1.0 / d as f64;
    let mut dx = Array2::zeros((rows, d));
    let mut dgamma = Array2::zeros((1, d));
    let mut dbeta = Array2::zeros((1, d));
    for i in 0..rows {
        let mut mean_dxh = 0.0;
        let mut mean_dxh_xh = 0.0;
        for j in 0..d {
            let g = dy[[i, j]];
            let xh = cache.x_hat[[i, j]];
            dgamma[[0, j]] += g * xh;
            dbeta[[0, j]] += g;
            let dxh = g * gamma[[0, j]];
            mean_dxh += dxh;
            mean_dxh_xh += dxh * xh;
        }
        mean_dxh *= inv_d;
        mean_dxh_xh *= inv_d;
        let istd = cache.inv_std[i];
        for j in 0..d {
            let dxh = dy[[i, j]] * gamma[[0, j]];
            dx[[i, j]] = istd * (dxh - mean_dxh - cache.x_hat[[i, j]] * mean_dxh_xh);
        }
    }
    (dx, dgamma, dbeta)
}

/// Backward through a row-wise softmax: `ds = p * (dp - sum(dp * p))`.
fn softmax_rows_backward(p: &Array2<f64>, dp: &Array2<f64>) -> Array2<f64> {
    let mut ds = Array2::zeros(p.raw_dim());
    for i in 0..p.nrows() {
        let mut dot = 0.0;
        for j in 0..p.ncols() {
            dot += dp[[i, j]] * p[[i, j]];
        }
        for j in 0..p.ncols() {
            ds[[i, j]] = p[[i, j]] * (dp[[i, j]] - dot);
        }
    }
    ds
}
