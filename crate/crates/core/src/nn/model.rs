use crate::error::Result;
use crate::scalar::Scalar;

use super::params::ParamSet;
use super::tape::{Tape, Var};
use super::tensor::Tensor;

/// A parametric map from a batch of feature rows to a batch of output rows
/// (logits, Q-values or state values).
pub trait Model<S: Scalar>: Clone + Send + Sync {
    fn params(&self) -> &ParamSet<S>;
    fn params_mut(&mut self) -> &mut ParamSet<S>;
    fn input_width(&self) -> usize;
    fn output_width(&self) -> usize;

    /// Records the forward pass of `x` (`batch x input_width`) on `tape`
    /// using the parameter leaves `bound` (from [`ParamSet::bind`]).
    fn forward(&self, tape: &mut Tape<S>, bound: &[Var], x: Var) -> Result<Var>;

    /// Forward pass without keeping the graph.
    fn predict(&self, x: &Tensor<S>) -> Result<Tensor<S>> {
        let mut tape = Tape::new();
        let bound = self.params().bind_frozen(&mut tape);
        let input = tape.constant(x.clone());
        let out = self.forward(&mut tape, &bound, input)?;
        Ok(tape.value(out).clone())
    }
}
