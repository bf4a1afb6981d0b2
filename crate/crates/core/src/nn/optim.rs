//! First-order optimizers. Each `step` consumes the accumulated gradients
//! and clears them.

use crate::error::Result;
use crate::scalar::Scalar;

use super::params::ParamSet;
use super::tensor::Tensor;

pub trait Optimizer<S: Scalar>: Send {
    fn step(&mut self, params: &mut ParamSet<S>) -> Result<()>;
}

fn ensure_state<S: Scalar>(state: &mut Vec<Tensor<S>>, params: &ParamSet<S>) {
    if state.len() != params.len() {
        *state = params
            .tensors
            .iter()
            .map(|p| Tensor::zeros(p.value.rows(), p.value.cols()))
            .collect();
    }
}

/// RMSProp with the epsilon inside the square root:
/// `s <- rho*s + (1-rho)*g^2; w <- w - lr*g/sqrt(s+eps)`.
#[derive(Debug, Clone)]
pub struct RmsProp<S> {
    pub lr: S,
    pub smoothing: S,
    pub epsilon: S,
    square_avg: Vec<Tensor<S>>,
}

impl<S: Scalar> RmsProp<S> {
    pub fn new(lr: S, smoothing: S, epsilon: S) -> Self {
        Self {
            lr,
            smoothing,
            epsilon,
            square_avg: Vec::new(),
        }
    }

    /// lr 0.00048, smoothing 0.99, epsilon 0.01.
    pub fn impala_defaults() -> Self {
        Self::new(S::of(0.00048), S::of(0.99), S::of(0.01))
    }

    pub fn square_avg(&self) -> &[Tensor<S>] {
        &self.square_avg
    }
}

impl<S: Scalar> Optimizer<S> for RmsProp<S> {
    fn step(&mut self, params: &mut ParamSet<S>) -> Result<()> {
        params.check_grads_finite()?;
        ensure_state(&mut self.square_avg, params);
        let one = S::one();
        for (p, s) in params.tensors.iter_mut().zip(&mut self.square_avg) {
            let g = p.grad.data();
            for ((w, acc), &gi) in p.value.data_mut().iter_mut().zip(s.data_mut()).zip(g) {
                *acc = self.smoothing * *acc + (one - self.smoothing) * gi * gi;
                let denom = (*acc + self.epsilon).sqrt();
                if denom > S::zero() {
                    *w -= self.lr * gi / denom;
                }
            }
        }
        params.zero_grad();
        Ok(())
    }
}

/// Adam with decoupled weight decay:
/// `w <- w - lr*(m_hat/(sqrt(v_hat)+eps) + weight_decay*w)`.
#[derive(Debug, Clone)]
pub struct DecayedAdam<S> {
    pub lr: S,
    pub weight_decay: S,
    pub beta1: S,
    pub beta2: S,
    pub epsilon: S,
    t: i32,
    m: Vec<Tensor<S>>,
    v: Vec<Tensor<S>>,
}

impl<S: Scalar> DecayedAdam<S> {
    pub fn new(lr: S, weight_decay: S) -> Self {
        Self {
            lr,
            weight_decay,
            beta1: S::of(0.9),
            beta2: S::of(0.999),
            epsilon: S::of(1e-8),
            t: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    /// lr 0.0001, weight decay 0.0005.
    pub fn mgdt_defaults() -> Self {
        Self::new(S::of(0.0001), S::of(0.0005))
    }
}

impl<S: Scalar> Optimizer<S> for DecayedAdam<S> {
    fn step(&mut self, params: &mut ParamSet<S>) -> Result<()> {
        params.check_grads_finite()?;
        ensure_state(&mut self.m, params);
        ensure_state(&mut self.v, params);
        self.t += 1;
        let one = S::one();
        let c1 = one - self.beta1.powi(self.t);
        let c2 = one - self.beta2.powi(self.t);
        for ((p, m), v) in params.tensors.iter_mut().zip(&mut self.m).zip(&mut self.v) {
            let g = p.grad.data();
            let iter = p
                .value
                .data_mut()
                .iter_mut()
                .zip(m.data_mut())
                .zip(v.data_mut())
                .zip(g);
            for (((w, mi), vi), &gi) in iter {
                *mi = self.beta1 * *mi + (one - self.beta1) * gi;
                *vi = self.beta2 * *vi + (one - self.beta2) * gi * gi;
                let direction = (*mi / c1) / ((*vi / c2).sqrt() + self.epsilon);
                *w -= self.lr * (direction + self.weight_decay * *w);
            }
        }
        params.zero_grad();
        Ok(())
    }
}
