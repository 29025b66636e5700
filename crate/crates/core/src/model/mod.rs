//! Transformer-encoder token classifier trained from scratch with exact
//! gradients: parameters, forward/backward passes, cross-entropy loss,
//! AdamW and checkpointing.

mod adamw;
mod backward;
mod checkpoint;
mod config;
mod forward;
mod loss;
mod params;

pub use adamw::{
    adamw_update, AdamW, DEFAULT_BETA1, DEFAULT_BETA2, DEFAULT_EPS, DEFAULT_WEIGHT_DECAY,
};
pub use backward::BackwardResult;
pub use checkpoint::{Checkpoint, CheckpointError};
pub use config::ModelConfig;
pub use forward::TokenClassifier;
pub use loss::cross_entropy_loss;
pub use params::{Gradients, LayerParams, Parameters, INIT_STD};

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("invalid model configuration: {0}")]
    InvalidConfig(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("every position in the batch carries the ignore label")]
    AllIgnored,
    #[error("non-finite value encountered in {0}")]
    NonFinite(String),
}
