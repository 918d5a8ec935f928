//! Learned PDA colorer: a bidirectional-GRU encoder with a pointer-attention
//! decoder, trained by maximum likelihood on known PDAs and then by
//! REINFORCE with a ±1 validity reward.

mod checkpoint;
mod gru;
mod model;
mod tensor;
mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use gru::{gru_step, GruParams};
pub use model::{
    decode_step, encode, encode_targets, pointer_to_colors, rollout, sequence_log_prob, DecodeMode, EncoderStates,
    Episode, ModelConfig, ModelParams, INIT_SCALE,
};
pub use tensor::Matrix;
pub use train::{
    clip_gradient, reinforce_gradient, reinforce_update, supervised_loss, train, valid_rate, write_log_csv, LogRow,
    Phase, TrainConfig, TrainError, TrainOutcome,
};

use thiserror::Error;

use crate::seqcodec::SeqError;

#[derive(Debug, Error)]
pub enum NeuralError {
    #[error("shape mismatch: {0}")]
    ShapeError(String),
    #[error("edge {edge:?} outside the embedding vocabulary (F_max={f_max}, K_max={k_max})")]
    VocabularyError { edge: (usize, usize), f_max: usize, k_max: usize },
    #[error("no feasible pointer position")]
    NoFeasibleAction,
    #[error("step {step} points forward to position {target}")]
    InvalidPointer { step: usize, target: usize },
    #[error("untrainable target: {0}")]
    BadTarget(String),
    #[error("empty batch")]
    InvalidBatch,
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Seq(#[from] SeqError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
