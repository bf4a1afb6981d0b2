//! Shared vocabulary: observations, transitions, trajectories, discrete
//! action distributions and the environment contract.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::scalar::Scalar;

/// A 2-D observation in row-major order. Grid environments store integer
/// cell codes (exactly representable); feature environments store reals.
/// A flat vector is a single row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Observation {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows * cols != data.len() {
            return Err(Error::Shape(format!(
                "observation {rows}x{cols} needs {} values, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn vector(data: Vec<f64>) -> Self {
        Self {
            rows: 1,
            cols: data.len(),
            data,
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }
}

/// One step of experience generated by a behavior policy μ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub observation: Observation,
    pub action: usize,
    pub reward: f64,
    pub next_observation: Observation,
    pub terminal: bool,
    /// log μ(a|x) under the snapshot that acted.
    pub behavior_log_prob: f64,
    /// Valid actions at `observation`, when the environment masks actions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action_mask: Option<Vec<bool>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub next_action_mask: Option<Vec<bool>>,
}

impl Transition {
    pub fn validate(&self, action_count: usize) -> Result<()> {
        if self.action >= action_count {
            return Err(Error::Index {
                index: self.action,
                len: action_count,
            });
        }
        if !(self.behavior_log_prob <= 0.0) {
            return Err(Error::Contract(format!(
                "behavior log-prob {} must be <= 0",
                self.behavior_log_prob
            )));
        }
        if self.observation.rows != self.next_observation.rows
            || self.observation.cols != self.next_observation.cols
        {
            return Err(Error::Shape("next_observation shape differs".into()));
        }
        Ok(())
    }
}

/// An ordered run of transitions. At most one terminal, and only last.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    transitions: Vec<Transition>,
    episode_return: f64,
}

impl Trajectory {
    pub fn new(transitions: Vec<Transition>) -> Result<Self> {
        if let Some(pos) = transitions.iter().position(|t| t.terminal) {
            if pos + 1 != transitions.len() {
                return Err(Error::Contract(format!(
                    "terminal transition at {pos} is not last of {}",
                    transitions.len()
                )));
            }
        }
        let episode_return = transitions.iter().map(|t| t.reward).sum();
        Ok(Self {
            transitions,
            episode_return,
        })
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn into_transitions(self) -> Vec<Transition> {
        self.transitions
    }

    /// Undiscounted sum of rewards.
    pub fn episode_return(&self) -> f64 {
        self.episode_return
    }

    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    pub fn is_terminal(&self) -> bool {
        self.transitions.last().is_some_and(|t| t.terminal)
    }

    pub fn rewards(&self) -> Vec<f64> {
        self.transitions.iter().map(|t| t.reward).collect()
    }
}

/// Σ_i γ^i r_i. The empty sum is zero.
pub fn discounted_return<S: Scalar>(rewards: &[S], gamma: S) -> Result<S> {
    if !(gamma >= S::zero() && gamma <= S::one()) {
        return Err(Error::Config(format!("gamma {gamma} outside [0,1]")));
    }
    // Horner from the back keeps gamma = 0 exact: r0 + 0*(...).
    Ok(rewards
        .iter()
        .rev()
        .fold(S::zero(), |acc, &r| r + gamma * acc))
}

/// A categorical distribution over a discrete action set.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretePolicyDist<S> {
    probs: Vec<S>,
}

impl<S: Scalar> DiscretePolicyDist<S> {
    pub fn new(probs: Vec<S>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidDistribution("no actions".into()));
        }
        if let Some(p) = probs.iter().find(|p| !(**p >= S::zero()) || !p.is_finite()) {
            return Err(Error::InvalidDistribution(format!("entry {p} is not a probability")));
        }
        let total: S = probs.iter().copied().sum();
        if (total - S::one()).abs() > S::norm_tolerance() {
            return Err(Error::InvalidDistribution(format!("entries sum to {total}")));
        }
        Ok(Self { probs })
    }

    pub fn uniform(n: usize) -> Self {
        Self {
            probs: vec![S::one() / S::of_usize(n); n],
        }
    }

    /// Numerically stable softmax of `logits`. Masked-out actions get
    /// probability zero; at least one action must remain valid.
    pub fn from_logits(logits: &[S], mask: Option<&[bool]>) -> Result<Self> {
        let valid = |i: usize| mask.is_none_or(|m| m[i]);
        if let Some(m) = mask {
            if m.len() != logits.len() {
                return Err(Error::Shape(format!(
                    "mask of {} for {} logits",
                    m.len(),
                    logits.len()
                )));
            }
        }
        let max = (0..logits.len())
            .filter(|&i| valid(i))
            .map(|i| logits[i])
            .fold(S::neg_infinity(), S::max);
        if !max.is_finite() {
            return Err(Error::InvalidDistribution("no valid finite logits".into()));
        }
        let mut probs: Vec<S> = (0..logits.len())
            .map(|i| if valid(i) { (logits[i] - max).exp() } else { S::zero() })
            .collect();
        let total: S = probs.iter().copied().sum();
        for p in &mut probs {
            *p /= total;
        }
        Ok(Self { probs })
    }

    pub fn probs(&self) -> &[S] {
        &self.probs
    }

    pub fn action_count(&self) -> usize {
        self.probs.len()
    }

    /// Shannon entropy in nats, with 0·ln 0 = 0.
    pub fn entropy(&self) -> S {
        -self
            .probs
            .iter()
            .filter(|p| **p > S::zero())
            .map(|&p| p * p.ln())
            .sum::<S>()
    }

    /// ln p(a); negative infinity for zero-probability actions.
    pub fn log_prob(&self, action: usize) -> Result<S> {
        self.probs
            .get(action)
            .map(|p| p.ln())
            .ok_or(Error::Index {
                index: action,
                len: self.probs.len(),
            })
    }

    /// Lowest index among the most probable actions.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, p) in self.probs.iter().enumerate() {
            if *p > self.probs[best] {
                best = i;
            }
        }
        best
    }

    /// Inverse-CDF draw.
    pub fn sample(&self, rng: &mut Rng) -> usize {
        let u = S::of(rng.gen::<f64>());
        let mut acc = S::zero();
        let mut last_positive = 0;
        for (i, &p) in self.probs.iter().enumerate() {
            if p > S::zero() {
                last_positive = i;
                acc += p;
                if u < acc {
                    return i;
                }
            }
        }
        last_positive
    }
}

/// Free-function form of [`DiscretePolicyDist::entropy`].
pub fn dist_entropy<S: Scalar>(d: &DiscretePolicyDist<S>) -> S {
    d.entropy()
}

/// Free-function form of [`DiscretePolicyDist::log_prob`].
pub fn dist_log_prob<S: Scalar>(d: &DiscretePolicyDist<S>, action: usize) -> Result<S> {
    d.log_prob(action)
}

/// How an [`Observation`] becomes a network input row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Encoding {
    /// Values as-is.
    Raw,
    /// One indicator plane per listed cell code, planes concatenated.
    OneHot(Vec<i64>),
}

impl Encoding {
    /// Input width for an observation of `len` cells.
    pub fn width(&self, len: usize) -> usize {
        match self {
            Encoding::Raw => len,
            Encoding::OneHot(codes) => len * codes.len(),
        }
    }

    /// Per-cell width (1 for raw, number of codes for one-hot).
    pub fn channels(&self) -> usize {
        match self {
            Encoding::Raw => 1,
            Encoding::OneHot(codes) => codes.len(),
        }
    }

    pub fn encode_into<S: Scalar>(&self, obs: &Observation, out: &mut Vec<S>) {
        match self {
            Encoding::Raw => out.extend(obs.data.iter().map(|&v| S::of(v))),
            Encoding::OneHot(codes) => {
                for &code in codes {
                    out.extend(obs.data.iter().map(|&v| {
                        if v as i64 == code {
                            S::one()
                        } else {
                            S::zero()
                        }
                    }));
                }
            }
        }
    }

    pub fn encode<S: Scalar>(&self, obs: &Observation) -> Vec<S> {
        let mut out = Vec::with_capacity(self.width(obs.len()));
        self.encode_into(obs, &mut out);
        out
    }

    /// Encodes one cell value into `out` (used for patch tokens).
    pub fn encode_cell<S: Scalar>(&self, v: f64, out: &mut Vec<S>) {
        match self {
            Encoding::Raw => out.push(S::of(v)),
            Encoding::OneHot(codes) => out.extend(codes.iter().map(|&c| {
                if v as i64 == c {
                    S::one()
                } else {
                    S::zero()
                }
            })),
        }
    }
}

/// Something detectable during play: a bug cell or a gate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct BugEvent {
    /// Bug identifier, unique within the environment spec.
    pub id: usize,
    /// Bug type (1-based, environment-specific).
    pub kind: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub observation: Observation,
    pub reward: f64,
    pub done: bool,
    pub events: Vec<BugEvent>,
}

/// The contract every task environment satisfies.
///
/// Stepping after a terminal step without an intervening `reset` is a
/// state error.
pub trait Environment: Send {
    fn action_count(&self) -> usize;
    fn observation_shape(&self) -> (usize, usize);
    fn reset(&mut self, seed: u64) -> Observation;
    fn step(&mut self, action: usize) -> Result<StepOutcome>;
    fn observe(&self) -> Observation;
    fn is_done(&self) -> bool;

    /// Valid actions in the current state. Unmasked environments return
    /// `None`.
    fn action_mask(&self) -> Option<Vec<bool>> {
        None
    }
}

impl<E: Environment + ?Sized> Environment for Box<E> {
    fn action_count(&self) -> usize {
        (**self).action_count()
    }
    fn observation_shape(&self) -> (usize, usize) {
        (**self).observation_shape()
    }
    fn reset(&mut self, seed: u64) -> Observation {
        (**self).reset(seed)
    }
    fn step(&mut self, action: usize) -> Result<StepOutcome> {
        (**self).step(action)
    }
    fn observe(&self) -> Observation {
        (**self).observe()
    }
    fn is_done(&self) -> bool {
        (**self).is_done()
    }
    fn action_mask(&self) -> Option<Vec<bool>> {
        (**self).action_mask()
    }
}

impl<E: Environment + ?Sized> Environment for &mut E {
    fn action_count(&self) -> usize {
        (**self).action_count()
    }
    fn observation_shape(&self) -> (usize, usize) {
        (**self).observation_shape()
    }
    fn reset(&mut self, seed: u64) -> Observation {
        (**self).reset(seed)
    }
    fn step(&mut self, action: usize) -> Result<StepOutcome> {
        (**self).step(action)
    }
    fn observe(&self) -> Observation {
        (**self).observe()
    }
    fn is_done(&self) -> bool {
        (**self).is_done()
    }
    fn action_mask(&self) -> Option<Vec<bool>> {
        (**self).action_mask()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn discounted_return_examples() {
        assert!(close(discounted_return(&[1.0, 1.0, 1.0], 0.5).unwrap(), 1.75));
        assert_eq!(discounted_return::<f64>(&[], 0.9).unwrap(), 0.0);
        assert!(close(discounted_return(&[2.0, -1.0, 3.0], 1.0).unwrap(), 4.0));
        assert!(discounted_return(&[1.0], 1.5).is_err());
    }

    #[test]
    fn entropy_examples() {
        let u = DiscretePolicyDist::<f64>::uniform(4);
        assert!(close(u.entropy(), 4f64.ln()));
        let one_hot = DiscretePolicyDist::new(vec![0.0, 1.0, 0.0]).unwrap();
        assert_eq!(one_hot.entropy(), 0.0);
        let two = DiscretePolicyDist::<f64>::new(vec![0.5, 0.5, 0.0, 0.0]).unwrap();
        assert!((two.entropy() - std::f64::consts::LN_2).abs() < 1e-6);
    }

    #[test]
    fn invalid_distributions_rejected() {
        assert!(matches!(
            DiscretePolicyDist::new(vec![-0.1, 1.1]),
            Err(Error::InvalidDistribution(_))
        ));
        assert!(matches!(
            DiscretePolicyDist::new(vec![0.3, 0.3]),
            Err(Error::InvalidDistribution(_))
        ));
    }

    #[test]
    fn log_prob_examples() {
        let u = DiscretePolicyDist::<f64>::uniform(4);
        assert!(close(u.log_prob(2).unwrap(), 0.25f64.ln()));
        let one_hot = DiscretePolicyDist::new(vec![0.0, 1.0]).unwrap();
        assert_eq!(one_hot.log_prob(1).unwrap(), 0.0);
        assert_eq!(one_hot.log_prob(0).unwrap(), f64::NEG_INFINITY);
        let d = DiscretePolicyDist::<f64>::new(vec![0.9, 0.1]).unwrap();
        assert!((d.log_prob(1).unwrap() + std::f64::consts::LN_10).abs() < 1e-6);
        assert_eq!(d.log_prob(2), Err(Error::Index { index: 2, len: 2 }));
    }

    #[test]
    fn masked_softmax_zeroes_invalid_actions() {
        let d = DiscretePolicyDist::from_logits(&[5.0f64, 0.0, 0.0], Some(&[false, true, true]))
            .unwrap();
        assert_eq!(d.probs()[0], 0.0);
        assert!(close(d.probs()[1], 0.5));
    }

    #[test]
    fn trajectory_rejects_inner_terminal() {
        let obs = Observation::vector(vec![0.0]);
        let t = |terminal| Transition {
            observation: obs.clone(),
            action: 0,
            reward: 1.0,
            next_observation: obs.clone(),
            terminal,
            behavior_log_prob: 0.0,
            action_mask: None,
            next_action_mask: None,
        };
        assert!(Trajectory::new(vec![t(true), t(false)]).is_err());
        let tr = Trajectory::new(vec![t(false), t(true)]).unwrap();
        assert_eq!(tr.episode_return(), 2.0);
        assert_eq!(tr.len(), 2);
        assert!(tr.is_terminal());
    }

    fn arb_probs() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.0f64..10.0, 1..8).prop_filter_map("nonzero", |w| {
            let s: f64 = w.iter().sum();
            (s > 1e-6).then(|| w.iter().map(|x| x / s).collect())
        })
    }

    proptest! {
        #[test]
        fn exp_log_probs_sum_to_one(p in arb_probs()) {
            let d = DiscretePolicyDist::new(p).unwrap();
            let s: f64 = (0..d.action_count()).map(|a| d.log_prob(a).unwrap().exp()).sum();
            prop_assert!((s - 1.0).abs() < 1e-9);
        }

        #[test]
        fn entropy_permutation_invariant(p in arb_probs(), rot in 0usize..8) {
            let d = DiscretePolicyDist::new(p.clone()).unwrap();
            let mut q = p.clone();
            let k = rot % q.len();
            q.rotate_left(k);
            q.reverse();
            let e = DiscretePolicyDist::new(q).unwrap();
            prop_assert!((d.entropy() - e.entropy()).abs() < 1e-12);
            prop_assert!(d.entropy() >= 0.0);
            prop_assert!(d.entropy() <= (p.len() as f64).ln() + 1e-12);
        }

        #[test]
        fn zero_gamma_keeps_first_reward(r in prop::collection::vec(-100.0f64..100.0, 1..20)) {
            prop_assert_eq!(discounted_return(&r, 0.0).unwrap(), r[0]);
        }
    }
}
