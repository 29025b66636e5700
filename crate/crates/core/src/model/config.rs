//! Architecture hyperparameters for the encoder token classifier.

use super::ModelError;

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub num_layers: usize,
    pub hidden_size: usize,
    pub num_heads: usize,
    pub ff_size: usize,
    pub max_len: usize,
    pub vocab_size: usize,
    pub num_labels: usize,
    pub dropout: f64,
    pub seed: u64,
}

impl ModelConfig {
    /// Desk-scale defaults: 2 layers, hidden 64, 4 heads. Trains in
    /// minutes on a CPU.
    pub fn desk(vocab_size: usize, num_labels: usize) -> Self {
        Self {
            num_layers: 2,
            hidden_size: 64,
            num_heads: 4,
            ff_size: 256,
            max_len: 512,
            vocab_size,
            num_labels,
            dropout: 0.1,
            seed: 42,
        }
    }

    /// The reference scale of the encoder family this mirrors: 12 layers,
    /// hidden 768, 12 heads.
    pub fn paper_scale(vocab_size: usize, num_labels: usize) -> Self {
        Self {
            num_layers: 12,
            hidden_size: 768,
            num_heads: 12,
            ff_size: 3072,
            max_len: 512,
            vocab_size,
            num_labels,
            dropout: 0.1,
            seed: 42,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.num_layers == 0 {
            return Err(ModelError::InvalidConfig("num_layers must be at least 1".into()));
        }
        if self.hidden_size == 0 || self.hidden_size % self.num_heads != 0 {
            return Err(ModelError::InvalidConfig(
                "hidden_size must be a positive multiple of num_heads".into(),
            ));
        }
        if self.ff_size == 0 {
            return Err(ModelError::InvalidConfig("ff_size must be positive".into()));
        }
        if self.max_len < 3 {
            return Err(ModelError::InvalidConfig("max_len must be at least 3".into()));
        }
        if self.vocab_size < 4 {
            return Err(ModelError::InvalidConfig(
                "vocab_size must cover the special tokens".into(),
            ));
        }
        if self.num_labels < 2 {
            return Err(ModelError::InvalidConfig("num_labels must be at least 2".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(ModelError::InvalidConfig("dropout must lie in [0, 1)".into()));
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.hidden_size / self.num_heads
    }

    /// Closed-form parameter count for this configuration.
    pub fn param_count(&self) -> usize {
        let h = self.hidden_size;
        let f = self.ff_size;
        let per_layer = 4 * (h * h + h)   // attention projections
            + 2 * (2 * h)                 // two layer norms
            + (h * f + f)                 // feed-forward in
            + (f * h + h); // feed-forward out
        self.vocab_size * h + self.max_len * h + self.num_layers * per_layer
            + (h * self.num_labels + self.num_labels)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn desk_defaults() {
        let cfg = ModelConfig::desk(100, 7);
        assert_eq!(cfg.num_layers, 2);
        assert_eq!(cfg.hidden_size, 64);
        assert_eq!(cfg.num_heads, 4);
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn zero_layer_config_is_rejected() {
        let cfg = ModelConfig { num_layers: 0, ..ModelConfig::desk(100, 7) };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn indivisible_heads_are_rejected() {
        let cfg = ModelConfig { num_heads: 5, ..ModelConfig::desk(100, 7) };
        assert!(cfg.validate().is_err());
    }
}
