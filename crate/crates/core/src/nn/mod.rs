//! Minimal neural-network substrate: dense tensors, a reverse-mode tape,
//! MLPs, optimizers and checkpoints.

mod checkpoint;
mod mlp;
mod model;
mod optim;
mod params;
mod tape;
mod tensor;

pub use checkpoint::{params_from_str, params_to_string, read_params, write_params};
pub use mlp::{Activation, Mlp, MlpSpec};
pub use model::Model;
pub use optim::{DecayedAdam, Optimizer, RmsProp};
pub use params::{ParamSet, ParamTensor};
pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor;
