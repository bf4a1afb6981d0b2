use rand::Rng as _;

use crate::error::{Error, Result};
use crate::nn::{Model, Optimizer, Tape, Tensor, Var};
use crate::rng::Rng;
use crate::scalar::Scalar;
use crate::types::{Encoding, Observation, Transition};

use super::feature_matrix;

#[derive(Debug, Clone, PartialEq)]
pub struct DqnConfig<S> {
    pub epsilon_start: S,
    pub epsilon_end: S,
    /// Steps over which epsilon decays linearly.
    pub decay_horizon: u64,
    pub gamma: S,
    /// Updates between target-network syncs.
    pub target_sync_interval: u64,
    pub batch_size: usize,
    pub huber_delta: S,
}

impl<S: Scalar> Default for DqnConfig<S> {
    fn default() -> Self {
        Self {
            epsilon_start: S::of(0.99),
            epsilon_end: S::of(0.05),
            decay_horizon: 10_000,
            gamma: S::of(0.99),
            target_sync_interval: 500,
            batch_size: 32,
            huber_delta: S::one(),
        }
    }
}

impl<S: Scalar> DqnConfig<S> {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = (self.epsilon_end, self.epsilon_start);
        if !(S::zero() <= lo && lo <= hi && hi <= S::one()) {
            return Err(Error::Config(format!(
                "need 0 <= epsilon_end ({lo}) <= epsilon_start ({hi}) <= 1"
            )));
        }
        if self.batch_size == 0 || self.target_sync_interval == 0 {
            return Err(Error::Config("batch size and sync interval must be positive".into()));
        }
        Ok(())
    }
}

/// Linear decay from `epsilon_start` to `epsilon_end` over
/// `decay_horizon` steps, constant afterwards.
pub fn epsilon_at<S: Scalar>(step: u64, cfg: &DqnConfig<S>) -> S {
    if cfg.decay_horizon == 0 || step >= cfg.decay_horizon {
        return cfg.epsilon_end;
    }
    let frac = S::of(step as f64 / cfg.decay_horizon as f64);
    cfg.epsilon_start + (cfg.epsilon_end - cfg.epsilon_start) * frac
}

/// Constants of one DQN update: inputs, actions and bootstrapped targets.
#[derive(Debug, Clone)]
pub struct DqnBatch<S> {
    pub features: Tensor<S>,
    pub actions: Vec<usize>,
    pub targets: Vec<S>,
}

pub struct DqnLearner<S: Scalar, M> {
    pub online: M,
    pub target: M,
    optimizer: Box<dyn Optimizer<S>>,
    pub config: DqnConfig<S>,
    pub encoding: Encoding,
    updates: u64,
}

impl<S: Scalar, M: Model<S>> DqnLearner<S, M> {
    pub fn new(
        model: M,
        optimizer: Box<dyn Optimizer<S>>,
        config: DqnConfig<S>,
        encoding: Encoding,
    ) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            target: model.clone(),
            online: model,
            optimizer,
            config,
            encoding,
            updates: 0,
        })
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    pub fn q_values(&self, obs: &Observation) -> Result<Vec<S>> {
        let x = Tensor::row_vector(self.encoding.encode(obs));
        Ok(self.online.predict(&x)?.into_data())
    }

    /// Highest-valued valid action; ties go to the lowest index.
    pub fn greedy_action(&self, obs: &Observation, mask: Option<&[bool]>) -> Result<usize> {
        let q = self.q_values(obs)?;
        best_valid(&q, mask).ok_or_else(|| Error::State("no valid action".into()))
    }

    /// Epsilon-greedy action and its behavior log-probability.
    pub fn act(
        &self,
        obs: &Observation,
        mask: Option<&[bool]>,
        epsilon: S,
        rng: &mut Rng,
    ) -> Result<(usize, f64)> {
        epsilon_greedy(&self.q_values(obs)?, mask, epsilon.as_f64(), rng)
    }

    /// Inputs and `r + γ max_a' Q_target(x', a')` targets (no bootstrap
    /// at terminals).
    pub fn prepare(&self, batch: &[Transition]) -> Result<DqnBatch<S>> {
        if batch.is_empty() {
            return Err(Error::Contract("empty DQN batch".into()));
        }
        let features = feature_matrix(&self.encoding, batch.iter().map(|t| &t.observation))?;
        let next = feature_matrix::<S>(&self.encoding, batch.iter().map(|t| &t.next_observation))?;
        let q_next = self.target.predict(&next)?;
        let n = q_next.cols();
        let mut targets = Vec::with_capacity(batch.len());
        for (i, t) in batch.iter().enumerate() {
            let r = S::of(t.reward);
            if t.terminal {
                targets.push(r);
                continue;
            }
            let mask = t.next_action_mask.as_deref();
            if mask.is_some_and(|m| m.len() != n) {
                return Err(Error::Shape("next-action mask width".into()));
            }
            let best = best_valid(q_next.row(i), mask).map(|a| q_next.get(i, a));
            targets.push(r + self.config.gamma * best.unwrap_or(S::zero()));
        }
        Ok(DqnBatch {
            features,
            actions: batch.iter().map(|t| t.action).collect(),
            targets,
        })
    }

    /// Mean Huber loss of `Q(x,a) - target`.
    pub fn loss(&self, model: &M, tape: &mut Tape<S>, bound: &[Var], b: &DqnBatch<S>) -> Result<Var> {
        let x = tape.constant(b.features.clone());
        let q = model.forward(tape, bound, x)?;
        let q_sa = tape.gather(q, &b.actions)?;
        let y = tape.constant(Tensor::from_vec(b.targets.len(), 1, b.targets.clone())?);
        let td = tape.sub(q_sa, y)?;
        let h = tape.huber(td, self.config.huber_delta);
        Ok(tape.mean(h))
    }

    /// One gradient step on `batch`; returns the loss before the step.
    pub fn update(&mut self, batch: &[Transition]) -> Result<S> {
        let prepared = self.prepare(batch)?;
        let mut tape = Tape::new();
        let bound = self.online.params().bind(&mut tape);
        let loss = self.loss(&self.online, &mut tape, &bound, &prepared)?;
        let value = tape.value(loss).item();
        let grads = tape.backward(loss)?;
        self.online.params_mut().accumulate(&grads, &bound)?;
        self.optimizer.step(self.online.params_mut())?;
        self.updates += 1;
        if self.updates % self.config.target_sync_interval == 0 {
            self.sync_target();
        }
        Ok(value)
    }

    pub fn sync_target(&mut self) {
        self.target = self.online.clone();
    }
}

/// Epsilon-greedy choice over `q` and the log-probability of the choice.
pub fn epsilon_greedy<S: Scalar>(
    q: &[S],
    mask: Option<&[bool]>,
    epsilon: f64,
    rng: &mut Rng,
) -> Result<(usize, f64)> {
    let greedy = best_valid(q, mask).ok_or_else(|| Error::State("no valid action".into()))?;
    let valid: Vec<usize> = (0..q.len()).filter(|&a| mask.is_none_or(|m| m[a])).collect();
    let action = if rng.gen::<f64>() < epsilon {
        valid[rng.gen_range(0..valid.len())]
    } else {
        greedy
    };
    let mut p = epsilon / valid.len() as f64;
    if action == greedy {
        p += 1.0 - epsilon;
    }
    Ok((action, p.ln().min(0.0)))
}

fn best_valid<S: Scalar>(q: &[S], mask: Option<&[bool]>) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (a, &v) in q.iter().enumerate() {
        if mask.is_some_and(|m| !m[a]) {
            continue;
        }
        if best.is_none_or(|b| v > q[b]) {
            best = Some(a);
        }
    }
    best
}
