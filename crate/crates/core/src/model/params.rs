//! Parameter tensors, seeded initialization and named traversal.

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::ModelConfig;

/// Initialization scale for embeddings and linear weights.
pub const INIT_STD: f64 = 0.02;

/// Per-layer tensors. Biases and norm parameters are kept as `1 x D`
/// matrices so every tensor traverses uniformly.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub wq: Array2<f64>,
    pub bq: Array2<f64>,
    pub wk: Array2<f64>,
    pub bk: Array2<f64>,
    pub wv: Array2<f64>,
    pub bv: Array2<f64>,
    pub wo: Array2<f64>,
    pub bo: Array2<f64>,
    pub ln1_gamma: Array2<f64>,
    pub ln1_beta: Array2<f64>,
    pub ff_w1: Array2<f64>,
    pub ff_b1: Array2<f64>,
    pub ff_w2: Array2<f64>,
    pub ff_b2: Array2<f64>,
    pub ln2_gamma: Array2<f64>,
    pub ln2_beta: Array2<f64>,
}

/// All trainable tensors of the token classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct Parameters {
    pub token_embedding: Array2<f64>,
    pub position_embedding: Array2<f64>,
    pub layers: Vec<LayerParams>,
    pub head_w: Array2<f64>,
    pub head_b: Array2<f64>,
}

/// Gradients mirror the parameter structure exactly.
pub type Gradients = Parameters;

impl Parameters {
    /// Seeded deterministic initialization: embeddings and linear weights
    /// from a normal with std 0.02, biases zero, norm gains one.
    pub fn init(config: &ModelConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let normal = Normal::new(0.0, INIT_STD).expect("valid std");
        let mut randn = |rows: usize, cols: usize| {
            Array2::from_shape_simple_fn((rows, cols), || normal.sample(&mut rng))
        };
        let h = config.hidden_size;
        let f = config.ff_size;
        let token_embedding = randn(config.vocab_size, h);
        let position_embedding = randn(config.max_len, h);
        let layers = (0..config.num_layers)
            .map(|_| LayerParams {
                wq: randn(h, h),
                bq: Array2::zeros((1, h)),
                wk: randn(h, h),
                bk: Array2::zeros((1, h)),
                wv: randn(h, h),
                bv: Array2::zeros((1, h)),
                wo: randn(h, h),
                bo: Array2::zeros((1, h)),
                ln1_gamma: Array2::ones((1, h)),
                ln1_beta: Array2::zeros((1, h)),
                ff_w1: randn(h, f),
                ff_b1: Array2::zeros((1, f)),
                ff_w2: randn(f, h),
                ff_b2: Array2::zeros((1, h)),
                ln2_gamma: Array2::ones((1, h)),
                ln2_beta: Array2::zeros((1, h)),
            })
            .collect();
        let head_w = randn(h, config.num_labels);
        let head_b = Array2::zeros((1, config.num_labels));
        Parameters { token_embedding, position_embedding, layers, head_w, head_b }
    }

    /// A zero-filled set with the same shapes, used for gradients.
    pub fn zeros_like(config: &ModelConfig) -> Self {
        let h = config.hidden_size;
        let f = config.ff_size;
        let layer = || LayerParams {
            wq: Array2::zeros((h, h)),
            bq: Array2::zeros((1, h)),
            wk: Array2::zeros((h, h)),
            bk: Array2::zeros((1, h)),
            wv: Array2::zeros((h, h)),
            bv: Array2::zeros((1, h)),
            wo: Array2::zeros((h, h)),
            bo: Array2::zeros((1, h)),
            ln1_gamma: Array2::zeros((1, h)),
            ln1_beta: Array2::zeros((1, h)),
            ff_w1: Array2::zeros((h, f)),
            ff_b1: Array2::zeros((1, f)),
            ff_w2: Array2::zeros((f, h)),
            ff_b2: Array2::zeros((1, h)),
            ln2_gamma: Array2::zeros((1, h)),
            ln2_beta: Array2::zeros((1, h)),
        };
        Parameters {
            token_embedding: Array2::zeros((config.vocab_size, h)),
            position_embedding: Array2::zeros((config.max_len, h)),
            layers: (0..config.num_layers).map(|_| layer()).collect(),
            head_w: Array2::zeros((h, config.num_labels)),
            head_b: Array2::zeros((1, config.num_labels)),
        }
    }

    /// Tensors with stable names in a fixed order.
    pub fn named(&self) -> Vec<(String, &Array2<f64>)> {
        let mut out: Vec<(String, &Array2<f64>)> = vec![
            ("token_embedding".into(), &self.token_embedding),
            ("position_embedding".into(), &self.position_embedding),
        ];
        for (i, layer) in self.layers.iter().enumerate() {
            for (suffix, tensor) in layer.named_fields() {
                out.push((format!("layer{i}.{suffix}"), tensor));
            }
        }
        out.push(("head.w".into(), &self.head_w));
        out.push(("head.b".into(), &self.head_b));
        out
    }

    /// Mutable variant of [`Parameters::named`], same order.
    pub fn named_mut(&mut self) -> Vec<(String, &mut Array2<f64>)> {
        let mut out: Vec<(String, &mut Array2<f64>)> = vec![
            ("token_embedding".into(), &mut self.token_embedding),
            ("position_embedding".into(), &mut self.position_embedding),
        ];
        for (i, layer) in self.layers.iter_mut().enumerate() {
            for (suffix, tensor) in layer.named_fields_mut() {
                out.push((format!("layer{i}.{suffix}"), tensor));
            }
        }
        out.push(("head.w".into(), &mut self.head_w));
        out.push(("head.b".into(), &mut self.head_b));
        out
    }

    pub fn count(&self) -> usize {
        self.named().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.named().iter().all(|(_, t)| t.iter().all(|v| v.is_finite()))
    }
}

impl LayerParams {
    fn named_fields(&self) -> [(&'static str, &Array2<f64>); 16] {
        [
            ("attn.wq", &self.wq),
            ("attn.bq", &self.bq),
            ("attn.wk", &self.wk),
            ("attn.bk", &self.bk),
            ("attn.wv", &self.wv),
            ("attn.bv", &self.bv),
            ("attn.wo", &self.wo),
            ("attn.bo", &self.bo),
            ("ln1.gamma", &self.ln1_gamma),
            ("ln1.beta", &self.ln1_beta),
            ("ff.w1", &self.ff_w1),
            ("ff.b1", &self.ff_b1),
            ("ff.w2", &self.ff_w2),
            ("ff.b2", &self.ff_b2),
            ("ln2.gamma", &self.ln2_gamma),
            ("ln2.beta", &self.ln2_beta),
        ]
    }

    fn named_fields_mut(&mut self) -> [(&'static str, &mut Array2<f64>); 16] {
        [
            ("attn.wq", &mut self.wq),
            ("attn.bq", &mut self.bq),
            ("attn.wk", &mut self.wk),
            ("attn.bk", &mut self.bk),
            ("attn.wv", &mut self.wv),
            ("attn.bv", &mut self.bv),
            ("attn.wo", &mut self.wo),
            ("attn.bo", &mut self.bo),
            ("ln1.gamma", &mut self.ln1_gamma),
            ("ln1.beta", &mut self.ln1_beta),
            ("ff.w1", &mut self.ff_w1),
            ("ff.b1", &mut self.ff_b1),
            ("ff.w2", &mut self.ff_w2),
            ("ff.b2", &mut self.ff_b2),
            ("ln2.gamma", &mut self.ln2_gamma),
            ("ln2.beta", &mut self.ln2_beta),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_gives_bitwise_identical_parameters() {
        let cfg = ModelConfig::desk(50, 7);
        let a = Parameters::init(&cfg);
        let b = Parameters::init(&cfg);
        assert_eq!(a, b);
    }

    #[test]
    fn different_seed_differs() {
        let cfg = ModelConfig::desk(50, 7);
        let a = Parameters::init(&cfg);
        let b = Parameters::init(&ModelConfig { seed: 7, ..cfg });
        assert_ne!(a, b);
    }

    #[test]
    fn enumerated_count_matches_closed_form() {
        for cfg in [ModelConfig::desk(50, 7), ModelConfig::desk(123, 2)] {
            let params = Parameters::init(&cfg);
            assert_eq!(params.count(), cfg.param_count());
        }
    }

    #[test]
    fn named_order_is_stable_and_complete() {
        let cfg = ModelConfig::desk(10, 2);
        let params = Parameters::init(&cfg);
        let names: Vec<String> = params.named().into_iter().map(|(n, _)| n).collect();
        assert_eq!(names.len(), 2 + cfg.num_layers * 16 + 2);
        assert_eq!(names[0], "token_embedding");
        assert_eq!(names[2], "layer0.attn.wq");
        assert_eq!(names.last().unwrap(), "head.b");
    }
}
