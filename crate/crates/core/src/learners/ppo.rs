use crate::error::{Error, Result};
use crate::nn::{Model, Optimizer, Tape, Tensor, Var};
use crate::scalar::Scalar;
use crate::types::{Encoding, Trajectory};

use super::{apply_mask, column, feature_matrix, mask_matrix, TaskKind};

#[derive(Debug, Clone, PartialEq)]
pub struct PpoConfig<S> {
    pub clip: S,
    pub surrogate_epochs: usize,
    pub gamma: S,
    pub gae_lambda: S,
    pub value_coef: S,
    pub entropy_coef: S,
    pub normalize_advantages: bool,
}

impl<S: Scalar> PpoConfig<S> {
    /// Clip 0.2; 15 surrogate epochs for Blockmaze and scheduling, 3 for
    /// the Pac-grid game.
    pub fn for_task(task: TaskKind) -> Self {
        Self {
            clip: S::of(0.2),
            surrogate_epochs: match task {
                TaskKind::Blockmaze | TaskKind::Jssp => 15,
                TaskKind::PacGrid => 3,
            },
            gamma: S::of(0.99),
            gae_lambda: S::of(0.95),
            value_coef: S::of(0.5),
            entropy_coef: S::zero(),
            normalize_advantages: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.clip > S::zero()) || self.surrogate_epochs == 0 {
            return Err(Error::Config("PPO needs clip > 0 and at least one epoch".into()));
        }
        Ok(())
    }
}

/// Generalized advantage estimation over one trajectory. `values` has one
/// more entry than `rewards`; the last is the bootstrap value (zero after
/// a terminal). Returns `(advantages, returns)`.
pub fn gae<S: Scalar>(rewards: &[S], values: &[S], gamma: S, lambda: S) -> Result<(Vec<S>, Vec<S>)> {
    let n = rewards.len();
    if values.len() != n + 1 {
        return Err(Error::Shape(format!("{n} rewards need {} values", n + 1)));
    }
    let mut adv = vec![S::zero(); n];
    let mut running = S::zero();
    for t in (0..n).rev() {
        let delta = rewards[t] + gamma * values[t + 1] - values[t];
        running = delta + gamma * lambda * running;
        adv[t] = running;
    }
    let returns = adv.iter().zip(values).map(|(&a, &v)| a + v).collect();
    Ok((adv, returns))
}

/// `-mean(min(ρ A, clip(ρ, 1-ε, 1+ε) A))` with `ρ = exp(log π_new - log μ)`.
/// `new_log_probs` is a column of `log π_new(a_t|x_t)`.
pub fn surrogate_loss<S: Scalar>(
    tape: &mut Tape<S>,
    new_log_probs: Var,
    behavior_log_probs: &[S],
    advantages: &[S],
    clip: S,
) -> Result<Var> {
    let n = advantages.len();
    let old = tape.constant(Tensor::from_vec(n, 1, behavior_log_probs.to_vec())?);
    let adv = tape.constant(Tensor::from_vec(n, 1, advantages.to_vec())?);
    let diff = tape.sub(new_log_probs, old)?;
    let ratio = tape.exp(diff);
    let unclipped = tape.mul(ratio, adv)?;
    let clipped_ratio = tape.clamp(ratio, S::one() - clip, S::one() + clip);
    let clipped = tape.mul(clipped_ratio, adv)?;
    let objective = tape.min(unclipped, clipped)?;
    let mean = tape.mean(objective);
    Ok(tape.neg(mean))
}

/// Constants of a PPO update.
#[derive(Debug, Clone)]
pub struct PpoBatch<S> {
    pub features: Tensor<S>,
    pub mask: Option<Tensor<S>>,
    pub actions: Vec<usize>,
    pub behavior_log_probs: Vec<S>,
    pub advantages: Vec<S>,
    pub returns: Vec<S>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PpoLosses<S> {
    pub surrogate: S,
    pub value: S,
    pub entropy: S,
    pub total: S,
}

pub struct PpoLearner<S: Scalar, P, V> {
    pub policy: P,
    pub value: V,
    policy_opt: Box<dyn Optimizer<S>>,
    value_opt: Box<dyn Optimizer<S>>,
    pub config: PpoConfig<S>,
    pub encoding: Encoding,
}

impl<S: Scalar, P: Model<S>, V: Model<S>> PpoLearner<S, P, V> {
    pub fn new(
        policy: P,
        value: V,
        policy_opt: Box<dyn Optimizer<S>>,
        value_opt: Box<dyn Optimizer<S>>,
        config: PpoConfig<S>,
        encoding: Encoding,
    ) -> Result<Self> {
        config.validate()?;
        if value.output_width() != 1 {
            return Err(Error::Shape("value network must have one output".into()));
        }
        Ok(Self {
            policy,
            value,
            policy_opt,
            value_opt,
            config,
            encoding,
        })
    }

    /// Advantages by GAE(γ, λ) from the current value network.
    pub fn prepare(&self, trajectories: &[Trajectory]) -> Result<PpoBatch<S>> {
        let steps: Vec<_> = trajectories.iter().flat_map(|t| t.transitions()).collect();
        if steps.is_empty() {
            return Err(Error::Contract("empty PPO batch".into()));
        }
        if let Some(t) = steps.iter().find(|t| !t.behavior_log_prob.is_finite()) {
            return Err(Error::Contract(format!(
                "transition lacks a behavior log-prob ({})",
                t.behavior_log_prob
            )));
        }
        let features = feature_matrix::<S>(&self.encoding, steps.iter().map(|t| &t.observation))?;
        let values = column(&self.value.predict(&features)?);
        let mut advantages = Vec::with_capacity(steps.len());
        let mut returns = Vec::with_capacity(steps.len());
        let mut offset = 0;
        for traj in trajectories {
            let n = traj.len();
            if n == 0 {
                continue;
            }
            let mut v = values[offset..offset + n].to_vec();
            let last = &traj.transitions()[n - 1];
            v.push(if last.terminal {
                S::zero()
            } else {
                let x = Tensor::row_vector(self.encoding.encode(&last.next_observation));
                self.value.predict(&x)?.item()
            });
            let rewards: Vec<S> = traj.transitions().iter().map(|t| S::of(t.reward)).collect();
            let (a, r) = gae(&rewards, &v, self.config.gamma, self.config.gae_lambda)?;
            advantages.extend(a);
            returns.extend(r);
            offset += n;
        }
        if self.config.normalize_advantages && advantages.len() > 1 {
            let n = S::of_usize(advantages.len());
            let mean = advantages.iter().copied().sum::<S>() / n;
            let var = advantages.iter().map(|&a| (a - mean) * (a - mean)).sum::<S>() / n;
            let std = var.sqrt() + S::of(1e-8);
            for a in &mut advantages {
                *a = (*a - mean) / std;
            }
        }
        let actions_n = self.policy.output_width();
        Ok(PpoBatch {
            mask: mask_matrix(steps.iter().map(|t| t.action_mask.as_deref()), actions_n)?,
            features,
            actions: steps.iter().map(|t| t.action).collect(),
            behavior_log_probs: steps.iter().map(|t| S::of(t.behavior_log_prob)).collect(),
            advantages,
            returns,
        })
    }

    /// Clipped surrogate + value MSE - entropy bonus, all means.
    #[allow(clippy::too_many_arguments)]
    pub fn loss(
        &self,
        policy: &P,
        value: &V,
        tape: &mut Tape<S>,
        policy_bound: &[Var],
        value_bound: &[Var],
        b: &PpoBatch<S>,
    ) -> Result<(Var, PpoLosses<S>)> {
        let x = tape.constant(b.features.clone());
        let logits = policy.forward(tape, policy_bound, x)?;
        let logits = apply_mask(tape, logits, b.mask.as_ref())?;
        let log_probs = tape.log_softmax(logits);
        let picked = tape.gather(log_probs, &b.actions)?;
        let surrogate = surrogate_loss(tape, picked, &b.behavior_log_probs, &b.advantages, self.config.clip)?;

        let v = value.forward(tape, value_bound, x)?;
        let ret = tape.constant(Tensor::from_vec(b.returns.len(), 1, b.returns.clone())?);
        let err = tape.sub(v, ret)?;
        let sq = tape.square(err);
        let value_loss = tape.mean(sq);

        let probs = tape.exp(log_probs);
        let plogp = tape.mul(probs, log_probs)?;
        let neg_h = tape.sum_rows(plogp);
        let neg_entropy = tape.mean(neg_h);

        let vterm = tape.scale(value_loss, self.config.value_coef);
        let eterm = tape.scale(neg_entropy, self.config.entropy_coef);
        let partial = tape.add(surrogate, vterm)?;
        let total = tape.add(partial, eterm)?;
        let parts = PpoLosses {
            surrogate: tape.value(surrogate).item(),
            value: tape.value(value_loss).item(),
            entropy: -tape.value(neg_entropy).item(),
            total: tape.value(total).item(),
        };
        Ok((total, parts))
    }

    /// `surrogate_epochs` full-batch passes over `trajectories`. Returns
    /// the losses of the first pass.
    pub fn update(&mut self, trajectories: &[Trajectory]) -> Result<PpoLosses<S>> {
        let batch = self.prepare(trajectories)?;
        let mut first = None;
        for _ in 0..self.config.surrogate_epochs {
            let mut tape = Tape::new();
            let pb = self.policy.params().bind(&mut tape);
            let vb = self.value.params().bind(&mut tape);
            let (loss, parts) = self.loss(&self.policy, &self.value, &mut tape, &pb, &vb, &batch)?;
            first.get_or_insert(parts);
            let grads = tape.backward(loss)?;
            self.policy.params_mut().accumulate(&grads, &pb)?;
            self.value.params_mut().accumulate(&grads, &vb)?;
            self.policy_opt.step(self.policy.params_mut())?;
            self.value_opt.step(self.value.params_mut())?;
        }
        Ok(first.expect("at least one epoch"))
    }
}
