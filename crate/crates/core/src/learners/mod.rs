//! Learning rules: DQN, PPO and the V-trace actor-critic. Each learner
//! splits an update into `prepare` (everything held constant under
//! differentiation: targets, advantages) and `loss` (a pure function of
//! the trainable parameters), so gradients can be checked independently.

mod dqn;
mod impala;
mod ppo;

pub use dqn::{epsilon_at, epsilon_greedy, DqnBatch, DqnConfig, DqnLearner};
pub use impala::{VTraceBatch, VTraceLearner, VTraceLosses};
pub use ppo::{gae, surrogate_loss, PpoBatch, PpoConfig, PpoLearner, PpoLosses};

use crate::error::{Error, Result};
use crate::nn::{Model, Tape, Tensor, Var};
use crate::scalar::Scalar;
use crate::types::{DiscretePolicyDist, Encoding, Observation};

/// Logit offset applied to masked-out actions.
pub const MASK_LOGIT: f64 = -1e9;

/// Which task a hyperparameter default is for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TaskKind {
    Blockmaze,
    PacGrid,
    Jssp,
}

pub(crate) fn feature_matrix<'a, S: Scalar>(
    encoding: &Encoding,
    observations: impl IntoIterator<Item = &'a Observation>,
) -> Result<Tensor<S>> {
    let mut data = Vec::new();
    let mut rows = 0;
    let mut width = None;
    for obs in observations {
        let w = encoding.width(obs.len());
        if *width.get_or_insert(w) != w {
            return Err(Error::Shape("observations of different sizes in one batch".into()));
        }
        encoding.encode_into(obs, &mut data);
        rows += 1;
    }
    Tensor::from_vec(rows, width.unwrap_or(0), data)
}

/// Additive logit mask, or `None` when nothing is masked.
pub(crate) fn mask_matrix<'a, S: Scalar>(
    masks: impl IntoIterator<Item = Option<&'a [bool]>>,
    actions: usize,
) -> Result<Option<Tensor<S>>> {
    let mut data = Vec::new();
    let mut any = false;
    let mut rows = 0;
    for m in masks {
        match m {
            Some(m) => {
                if m.len() != actions {
                    return Err(Error::Shape(format!("mask of {} for {actions} actions", m.len())));
                }
                any |= m.iter().any(|v| !v);
                data.extend(m.iter().map(|&ok| if ok { S::zero() } else { S::of(MASK_LOGIT) }));
            }
            None => data.extend(std::iter::repeat_n(S::zero(), actions)),
        }
        rows += 1;
    }
    Ok(if any {
        Some(Tensor::from_vec(rows, actions, data)?)
    } else {
        None
    })
}

pub(crate) fn apply_mask<S: Scalar>(
    tape: &mut Tape<S>,
    logits: Var,
    mask: Option<&Tensor<S>>,
) -> Result<Var> {
    match mask {
        Some(m) => tape.add_const(logits, m),
        None => Ok(logits),
    }
}

/// The policy's action distribution at one observation.
pub fn policy_dist<S: Scalar, M: Model<S>>(
    model: &M,
    encoding: &Encoding,
    obs: &Observation,
    mask: Option<&[bool]>,
) -> Result<DiscretePolicyDist<S>> {
    let x = Tensor::row_vector(encoding.encode(obs));
    let logits = model.predict(&x)?;
    DiscretePolicyDist::from_logits(logits.data(), mask)
}

/// Row `r` of `t` as an owned vector.
pub(crate) fn column<S: Scalar>(t: &Tensor<S>) -> Vec<S> {
    t.data().to_vec()
}
