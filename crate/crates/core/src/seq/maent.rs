//! Max-entropy sequence fine-tuning: minimize action NLL subject to a
//! policy-entropy floor, with the floor enforced by a nonnegative dual
//! variable updated by projected gradient ascent.

use rand::Rng as _;

use super::model::SequenceModel;
use super::tokenize::{ternarize_reward, ReturnQuantizer, TokenSequence, TokenStep};
use crate::error::{Error, Result};
use crate::learners::{apply_mask, mask_matrix};
use crate::nn::{Model, Optimizer, Tape, Var};
use crate::rng::Rng;
use crate::scalar::Scalar;
use crate::types::Trajectory;

/// How the entropy floor is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EntropyTarget {
    /// Half the maximum entropy, `0.5 ln |A|`.
    HalfLogActions,
    /// `-|A|`; never binds for a discrete policy.
    NegActionCount,
    Fixed(f64),
}

impl EntropyTarget {
    pub fn resolve(self, actions: usize) -> f64 {
        match self {
            EntropyTarget::HalfLogActions => 0.5 * (actions as f64).ln(),
            EntropyTarget::NegActionCount => -(actions as f64),
            EntropyTarget::Fixed(b) => b,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaentConfig {
    pub target: EntropyTarget,
    pub dual_lr: f64,
    pub batch: usize,
    pub context: usize,
    pub buffer_capacity: usize,
    pub updates_between_rollouts: usize,
    pub initial_lambda: f64,
}

impl Default for MaentConfig {
    fn default() -> Self {
        Self {
            target: EntropyTarget::HalfLogActions,
            dual_lr: 1e-3,
            batch: 32,
            context: 4,
            buffer_capacity: 10_000,
            updates_between_rollouts: 300,
            initial_lambda: 0.0,
        }
    }
}

impl MaentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dual_lr >= 0.0 && self.dual_lr.is_finite()) {
            return Err(Error::Config(format!("dual_lr {} must be finite and non-negative", self.dual_lr)));
        }
        if !(self.initial_lambda >= 0.0 && self.initial_lambda.is_finite()) {
            return Err(Error::Config("initial lambda must be finite and non-negative".into()));
        }
        if self.batch == 0 || self.context == 0 || self.buffer_capacity == 0 || self.updates_between_rollouts == 0 {
            return Err(Error::Config("batch, context, buffer and update interval must be positive".into()));
        }
        if let EntropyTarget::Fixed(b) = self.target {
            if !b.is_finite() {
                return Err(Error::Config("entropy target must be finite".into()));
            }
        }
        Ok(())
    }
}

/// A tokenized window of a trajectory with every action filled in.
#[derive(Debug, Clone, PartialEq)]
pub struct SeqSample {
    pub sequence: TokenSequence,
    pub masks: Vec<Option<Vec<bool>>>,
}

impl SeqSample {
    pub fn actions(&self) -> impl Iterator<Item = usize> + '_ {
        self.sequence.steps().iter().map(|s| s.action.expect("samples carry every action"))
    }
}

/// Return-to-go at every step: the sum of rewards from that step onward.
pub fn returns_to_go(rewards: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; rewards.len()];
    let mut acc = 0.0;
    for (i, r) in rewards.iter().enumerate().rev() {
        acc += r;
        out[i] = acc;
    }
    out
}

/// Tokenizes steps `start..start+len` of a trajectory.
pub fn window<S: Scalar>(
    model: &SequenceModel<S>,
    quantizer: &ReturnQuantizer,
    traj: &Trajectory,
    start: usize,
    len: usize,
) -> Result<SeqSample> {
    let trs = traj.transitions();
    if len == 0 || start + len > trs.len() {
        return Err(Error::Index { index: start + len, len: trs.len() });
    }
    if quantizer.bins() != model.config().return_bins {
        return Err(Error::Contract("quantizer and model disagree on return bins".into()));
    }
    let rtg = returns_to_go(&traj.rewards());
    let mut sequence = model.empty_sequence();
    let mut masks = Vec::with_capacity(len);
    for (t, tr) in trs.iter().enumerate().skip(start).take(len) {
        sequence.push_strict(TokenStep {
            patches: model.grid().patchify(&tr.observation)?,
            return_bin: quantizer.quantize(rtg[t]),
            action: Some(tr.action),
            reward: ternarize_reward(tr.reward),
        })?;
        masks.push(tr.action_mask.clone());
    }
    Ok(SeqSample { sequence, masks })
}

/// Draws `count` trajectories uniformly with replacement and cuts a
/// uniformly placed window of up to `context` steps from each.
pub fn sample_windows<S: Scalar>(
    model: &SequenceModel<S>,
    quantizer: &ReturnQuantizer,
    buffer: &[Trajectory],
    count: usize,
    context: usize,
    rng: &mut Rng,
) -> Result<Vec<SeqSample>> {
    let usable: Vec<&Trajectory> = buffer.iter().filter(|t| !t.transitions().is_empty()).collect();
    if usable.is_empty() {
        return Err(Error::State("replay buffer is empty".into()));
    }
    (0..count)
        .map(|_| {
            let traj = usable[rng.gen_range(0..usable.len())];
            let len = context.min(traj.len());
            let start = rng.gen_range(0..=traj.len() - len);
            window(model, quantizer, traj, start, len)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaentStats<S> {
    /// Mean negative log-likelihood of the data actions.
    pub nll: S,
    /// Mean policy entropy over the predicted positions.
    pub entropy: S,
    /// Dual variable after the update.
    pub lambda: S,
    pub lagrangian: S,
}

pub struct MaentLearner<S: Scalar> {
    pub model: SequenceModel<S>,
    pub optimizer: Box<dyn Optimizer<S>>,
    pub config: MaentConfig,
    beta: S,
    lambda: S,
    updates: u64,
}

impl<S: Scalar> MaentLearner<S> {
    pub fn new(model: SequenceModel<S>, optimizer: Box<dyn Optimizer<S>>, config: MaentConfig) -> Result<Self> {
        config.validate()?;
        if config.context > model.config().context {
            return Err(Error::Config(format!(
                "sampling context {} exceeds the model's {}",
                config.context,
                model.config().context
            )));
        }
        let beta = S::of(config.target.resolve(model.config().actions));
        let lambda = S::of(config.initial_lambda);
        Ok(Self { model, optimizer, config, beta, lambda, updates: 0 })
    }

    pub fn beta(&self) -> S {
        self.beta
    }

    pub fn lambda(&self) -> S {
        self.lambda
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    /// `J - λ (H - β)` along with J and H as plain values.
    pub fn loss(
        &self,
        model: &SequenceModel<S>,
        tape: &mut Tape<S>,
        bound: &[Var],
        samples: &[SeqSample],
        lambda: S,
    ) -> Result<(Var, S, S)> {
        if samples.is_empty() {
            return Err(Error::State("no samples to fit".into()));
        }
        let seqs: Vec<&TokenSequence> = samples.iter().map(|s| &s.sequence).collect();
        let actions: Vec<usize> = samples.iter().flat_map(|s| s.actions()).collect();
        let mask = mask_matrix::<S>(
            samples.iter().flat_map(|s| s.masks.iter().map(|m| m.as_deref())),
            model.config().actions,
        )?;
        let logits = model.step_logits(tape, bound, &seqs)?;
        let logits = apply_mask(tape, logits, mask.as_ref())?;
        let log_probs = tape.log_softmax(logits);
        let picked = tape.gather(log_probs, &actions)?;
        let mean_lp = tape.mean(picked);
        let nll = tape.neg(mean_lp);
        let probs = tape.exp(log_probs);
        let plogp = tape.mul(probs, log_probs)?;
        let per_row = tape.sum_rows(plogp);
        let mean_plogp = tape.mean(per_row);
        let entropy = tape.neg(mean_plogp);
        // J - λH + λβ
        let pulled = tape.scale(mean_plogp, lambda);
        let total = tape.add(nll, pulled)?;
        let total = tape.add_scalar(total, lambda * self.beta);
        let j = tape.value(nll).item();
        let h = tape.value(entropy).item();
        Ok((total, j, h))
    }

    /// Current NLL and entropy on `samples` without changing anything.
    pub fn evaluate(&self, samples: &[SeqSample]) -> Result<(S, S)> {
        let mut tape = Tape::new();
        let bound = self.model.params().bind_frozen(&mut tape);
        let (_, j, h) = self.loss(&self.model, &mut tape, &bound, samples, self.lambda)?;
        Ok((j, h))
    }

    /// One primal gradient step, then one projected dual step using the
    /// entropy measured before the primal step.
    pub fn update(&mut self, samples: &[SeqSample]) -> Result<MaentStats<S>> {
        let mut tape = Tape::new();
        let bound = self.model.params().bind(&mut tape);
        let (loss, nll, entropy) = self.loss(&self.model, &mut tape, &bound, samples, self.lambda)?;
        let lagrangian = tape.value(loss).item();
        let grads = tape.backward(loss)?;
        self.model.params_mut().accumulate(&grads, &bound)?;
        self.optimizer.step(self.model.params_mut())?;
        let raised = self.lambda + S::of(self.config.dual_lr) * (self.beta - entropy);
        self.lambda = raised.max(S::zero());
        self.updates += 1;
        Ok(MaentStats { nll, entropy, lambda: self.lambda, lagrangian })
    }
}
