use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::tape::{Gradients, Tape, Var};
use super::tensor::Tensor;

/// A trainable tensor and its accumulated gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamTensor<S> {
    pub value: Tensor<S>,
    pub grad: Tensor<S>,
}

impl<S: Scalar> ParamTensor<S> {
    pub fn new(value: Tensor<S>) -> Self {
        let grad = Tensor::zeros(value.rows(), value.cols());
        Self { value, grad }
    }
}

/// Ordered collection of a model's parameters.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamSet<S> {
    pub tensors: Vec<ParamTensor<S>>,
}

impl<S: Scalar> ParamSet<S> {
    pub fn new(values: Vec<Tensor<S>>) -> Self {
        Self {
            tensors: values.into_iter().map(ParamTensor::new).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    /// Total scalar parameter count.
    pub fn count(&self) -> usize {
        self.tensors.iter().map(|t| t.value.len()).sum()
    }

    /// Puts every parameter on `tape` as a trainable leaf, in order.
    pub fn bind(&self, tape: &mut Tape<S>) -> Vec<Var> {
        self.tensors.iter().map(|t| tape.leaf(t.value.clone())).collect()
    }

    /// Puts every parameter on `tape` as a constant.
    pub fn bind_frozen(&self, tape: &mut Tape<S>) -> Vec<Var> {
        self.tensors
            .iter()
            .map(|t| tape.constant(t.value.clone()))
            .collect()
    }

    /// Adds the gradients of `bound` leaves into the stored grads.
    pub fn accumulate(&mut self, grads: &Gradients<S>, bound: &[Var]) -> Result<()> {
        if bound.len() != self.tensors.len() {
            return Err(Error::Shape(format!(
                "{} bound vars for {} params",
                bound.len(),
                self.tensors.len()
            )));
        }
        for (p, &v) in self.tensors.iter_mut().zip(bound) {
            if let Some(g) = grads.get(v) {
                p.grad.add_assign(g);
            }
        }
        Ok(())
    }

    pub fn zero_grad(&mut self) {
        for p in &mut self.tensors {
            p.grad.data_mut().fill(S::zero());
        }
    }

    /// Flattened values in parameter order.
    pub fn flat_values(&self) -> Vec<S> {
        self.tensors
            .iter()
            .flat_map(|t| t.value.data().iter().copied())
            .collect()
    }

    /// Flattened gradients in parameter order.
    pub fn flat_grads(&self) -> Vec<S> {
        self.tensors
            .iter()
            .flat_map(|t| t.grad.data().iter().copied())
            .collect()
    }

    /// Mutable access to the `i`-th scalar in flattened order.
    pub fn flat_value_mut(&mut self, mut i: usize) -> &mut S {
        for t in &mut self.tensors {
            if i < t.value.len() {
                return &mut t.value.data_mut()[i];
            }
            i -= t.value.len();
        }
        panic!("flat parameter index out of range")
    }

    pub fn check_grads_finite(&self) -> Result<()> {
        for (i, p) in self.tensors.iter().enumerate() {
            if !p.grad.all_finite() {
                return Err(Error::Numeric(format!("gradient of parameter {i}")));
            }
        }
        Ok(())
    }
}
