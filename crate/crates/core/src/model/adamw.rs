//! AdamW: Adam with decoupled weight decay.

use ndarray::Array2;

use super::{Gradients, Parameters};

pub const DEFAULT_BETA1: f64 = 0.9;
pub const DEFAULT_BETA2: f64 = 0.999;
pub const DEFAULT_EPS: f64 = 1e-8;
pub const DEFAULT_WEIGHT_DECAY: f64 = 0.01;

/// One scalar AdamW update. Returns the new parameter value and moment
/// estimates; `t` is the 1-based step count.
#[allow(clippy::too_many_arguments)]
pub fn adamw_update(
    theta: f64,
    grad: f64,
    m: f64,
    v: f64,
    t: u64,
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    weight_decay: f64,
) -> (f64, f64, f64) {
    let m = beta1 * m + (1.0 - beta1) * grad;
    let v = beta2 * v + (1.0 - beta2) * grad * grad;
    let m_hat = m / (1.0 - beta1.powi(t as i32));
    let v_hat = v / (1.0 - beta2.powi(t as i32));
    let theta = theta - lr * (m_hat / (v_hat.sqrt() + eps) + weight_decay * theta);
    (theta, m, v)
}

/// Optimizer state over a parameter set. Moment tensors are allocated on
/// the first step and mirror the parameter shapes.
#[derive(Debug, Clone)]
pub struct AdamW {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    step: u64,
    m: Vec<Array2<f64>>,
    v: Vec<Array2<f64>>,
}

impl AdamW {
    pub fn new(lr: f64) -> Self {
        Self {
            lr,
            beta1: DEFAULT_BETA1,
            beta2: DEFAULT_BETA2,
            eps: DEFAULT_EPS,
            weight_decay: DEFAULT_WEIGHT_DECAY,
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn with_weight_decay(mut self, weight_decay: f64) -> Self {
        self.weight_decay = weight_decay;
        self
    }

    pub fn with_betas(mut self, beta1: f64, beta2: f64) -> Self {
        self.beta1 = beta1;
        self.beta2 = beta2;
        self
    }

    pub fn with_eps(mut self, eps: f64) -> Self {
        self.eps = eps;
        self
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// Applies one update in place.
    pub fn step(&mut self, params: &mut Parameters, grads: &Gradients) {
        let mut tensors = params.named_mut();
        let grad_tensors = grads.named();
        assert_eq!(tensors.len(), grad_tensors.len(), "parameter/gradient mismatch");
        if self.m.is_empty() {
            self.m = tensors.iter().map(|(_, t)| Array2::zeros(t.raw_dim())).collect();
            self.v = self.m.clone();
        }
        self.step += 1;
        let t = self.step;
        for (i, (theta, grad)) in tensors.iter_mut().zip(&grad_tensors).enumerate() {
            let theta = theta.1.as_slice_mut().expect("standard layout");
            let grad = grad.1.as_slice().expect("standard layout");
            let m = self.m[i].as_slice_mut().expect("standard layout");
            let v = self.v[i].as_slice_mut().expect("standard layout");
            for j in 0..theta.len() {
                let (nt, nm, nv) = adamw_update(
                    theta[j],
                    grad[j],
                    m[j],
                    v[j],
                    t,
                    self.lr,
                    self.beta1,
                    self.beta2,
                    self.eps,
                    self.weight_decay,
                );
                theta[j] = nt;
                m[j] = nm;
                v[j] = nv;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ModelConfig, Parameters, TokenClassifier};
    use crate::tokenizer::{CLS_ID, SEP_ID};

    #[test]
    fn single_scalar_step_matches_hand_arithmetic() {
        // theta=1, g=1, defaults, t=1:
        //   m = 0.1, v = 0.001, m_hat = 1, v_hat = 1
        //   theta' = 1 - lr * (1 / (1 + eps) + 0.01 * 1)
        let lr = 5e-5;
        let (theta, m, v) =
            adamw_update(1.0, 1.0, 0.0, 0.0, 1, lr, DEFAULT_BETA1, DEFAULT_BETA2, DEFAULT_EPS, DEFAULT_WEIGHT_DECAY);
        let expected = 1.0 - lr * (1.0 / (1.0 + DEFAULT_EPS) + 0.01);
        assert!((theta - expected).abs() < 1e-18);
        assert!((m - 0.1).abs() < 1e-18);
        assert!((v - 0.001).abs() < 1e-18);
    }

    #[test]
    fn zero_gradients_without_decay_leave_parameters_unchanged() {
        let cfg = ModelConfig::desk(10, 7);
        let mut params = Parameters::init(&cfg);
        let before = params.clone();
        let zeros = Parameters::zeros_like(&cfg);
        let mut opt = AdamW::new(5e-5).with_weight_decay(0.0);
        opt.step(&mut params, &zeros);
        assert_eq!(params, before);
    }

    #[test]
    fn identical_runs_take_identical_trajectories() {
        let cfg = ModelConfig {
            num_layers: 1,
            hidden_size: 8,
            num_heads: 2,
            ff_size: 8,
            max_len: 8,
            vocab_size: 8,
            num_labels: 3,
            dropout: 0.0,
            seed: 1,
        };
        let run = || {
            let mut model = TokenClassifier::init(cfg.clone()).unwrap();
            let mut opt = AdamW::new(1e-3);
            let enc = crate::tokenizer::Encoded {
                ids: vec![CLS_ID, 4, 5, SEP_ID],
                attention_mask: vec![1, 1, 1, 1],
                label_ids: vec![-100, 1, 2, -100],
            };
            for _ in 0..5 {
                let result = model.backward_batch(std::slice::from_ref(&enc), None).unwrap();
                opt.step(&mut model.params, &result.grads);
            }
            model.params
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn lr_zero_is_a_no_op_even_with_decay() {
        let cfg = ModelConfig::desk(10, 7);
        let mut params = Parameters::init(&cfg);
        let before = params.clone();
        let mut grads = Parameters::zeros_like(&cfg);
        grads.head_w.fill(0.5);
        let mut opt = AdamW::new(0.0);
        opt.step(&mut params, &grads);
        assert_eq!(params, before);
    }
}
