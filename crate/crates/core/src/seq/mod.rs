//! Return-conditioned sequence policy: tokenization, a small causal
//! transformer, and max-entropy fine-tuning.

mod maent;
mod model;
mod tokenize;

pub use maent::{
    returns_to_go, sample_windows, window, EntropyTarget, MaentConfig, MaentLearner, MaentStats, SeqSample,
};
pub use model::{sample_action, SeqModelConfig, SequenceModel};
pub use tokenize::{ternarize_reward, PatchGrid, ReturnQuantizer, Token, TokenSequence, TokenStep, Vocab};
