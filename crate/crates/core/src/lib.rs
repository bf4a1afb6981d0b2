//! Scalar-generic core of the workbench: shared RL vocabulary, a small
//! reverse-mode autodiff engine, V-trace, the DQN / PPO / V-trace learners
//! and the return-conditioned sequence policy with max-entropy fine-tuning.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below pin the common instantiations.

pub mod error;
pub mod learners;
pub mod nn;
pub mod rng;
pub mod scalar;
pub mod seq;
pub mod types;
pub mod vtrace;

pub mod testing;

pub use error::{Error, Result};
pub use scalar::Scalar;
pub use types::{
    discounted_return, dist_entropy, dist_log_prob, BugEvent, DiscretePolicyDist, Encoding,
    Environment,
    Observation, StepOutcome, Trajectory, Transition,
};

/// Default working precision for training and evaluation.
pub type Real = f32;

pub type Tensor = nn::Tensor<Real>;
pub type Tape = nn::Tape<Real>;
pub type Mlp = nn::Mlp<Real>;
pub type PolicyDist = DiscretePolicyDist<Real>;
pub type VTraceConfig = vtrace::VTraceConfig<Real>;
pub type SequenceModel = seq::SequenceModel<Real>;

/// Double-precision instantiations, used by gradient checks and oracles.
pub mod f64 {
    pub type Tensor = crate::nn::Tensor<f64>;
    pub type Tape = crate::nn::Tape<f64>;
    pub type Mlp = crate::nn::Mlp<f64>;
    pub type PolicyDist = crate::DiscretePolicyDist<f64>;
    pub type VTraceConfig = crate::vtrace::VTraceConfig<f64>;
    pub type SequenceModel = crate::seq::SequenceModel<f64>;
}
