use crate::error::{Error, Result};
use crate::nn::{Model, Optimizer, Tape, Tensor, Var};
use crate::scalar::Scalar;
use crate::types::{Encoding, Trajectory};
use crate::vtrace::{compute_vtrace, entropy_loss, pg_loss, value_loss, VTraceConfig};

use super::{apply_mask, column, feature_matrix, mask_matrix};

/// Constants of a V-trace update: per-step targets and advantages,
/// computed from the current networks and stored behavior log-probs.
#[derive(Debug, Clone)]
pub struct VTraceBatch<S> {
    pub features: Tensor<S>,
    pub mask: Option<Tensor<S>>,
    pub actions: Vec<usize>,
    pub targets: Vec<S>,
    pub advantages: Vec<S>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct VTraceLosses<S> {
    pub policy: S,
    pub value: S,
    pub entropy: S,
    pub total: S,
}

/// Actor-critic learner: `pg + baseline_cost * value + entropy_cost *
/// entropy`, one optimizer step per update.
pub struct VTraceLearner<S: Scalar, P, V> {
    pub policy: P,
    pub value: V,
    policy_opt: Box<dyn Optimizer<S>>,
    value_opt: Box<dyn Optimizer<S>>,
    pub config: VTraceConfig<S>,
    pub encoding: Encoding,
}

impl<S: Scalar, P: Model<S>, V: Model<S>> VTraceLearner<S, P, V> {
    pub fn new(
        policy: P,
        value: V,
        policy_opt: Box<dyn Optimizer<S>>,
        value_opt: Box<dyn Optimizer<S>>,
        config: VTraceConfig<S>,
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

    pub fn prepare(&self, segments: &[Trajectory]) -> Result<VTraceBatch<S>> {
        let steps: Vec<_> = segments.iter().flat_map(|t| t.transitions()).collect();
        if steps.is_empty() {
            return Err(Error::Contract("empty V-trace batch".into()));
        }
        if let Some(t) = steps.iter().find(|t| !t.behavior_log_prob.is_finite()) {
            return Err(Error::Contract(format!(
                "behavior log-prob {} cannot form an importance ratio",
                t.behavior_log_prob
            )));
        }
        let features = feature_matrix::<S>(&self.encoding, steps.iter().map(|t| &t.observation))?;
        let actions: Vec<usize> = steps.iter().map(|t| t.action).collect();
        let mask = mask_matrix(steps.iter().map(|t| t.action_mask.as_deref()), self.policy.output_width())?;

        let mut tape = Tape::new();
        let pb = self.policy.params().bind_frozen(&mut tape);
        let x = tape.constant(features.clone());
        let logits = self.policy.forward(&mut tape, &pb, x)?;
        let logits = apply_mask(&mut tape, logits, mask.as_ref())?;
        let log_probs = tape.log_softmax(logits);
        let picked = tape.gather(log_probs, &actions)?;
        let target_lp = column(tape.value(picked));
        let values = column(&self.value.predict(&features)?);

        let mut targets = Vec::with_capacity(steps.len());
        let mut advantages = Vec::with_capacity(steps.len());
        let mut offset = 0;
        for seg in segments {
            let n = seg.len();
            if n == 0 {
                continue;
            }
            let trs = seg.transitions();
            let mut v = values[offset..offset + n].to_vec();
            let last = &trs[n - 1];
            v.push(if last.terminal {
                S::zero()
            } else {
                let xb = Tensor::row_vector(self.encoding.encode(&last.next_observation));
                self.value.predict(&xb)?.item()
            });
            let rewards: Vec<S> = trs.iter().map(|t| S::of(t.reward)).collect();
            let ratios: Vec<S> = trs
                .iter()
                .zip(&target_lp[offset..offset + n])
                .map(|(t, &lp)| (lp - S::of(t.behavior_log_prob)).exp())
                .collect();
            let r = compute_vtrace(&v, &rewards, &ratios, &self.config)?;
            targets.extend(r.targets);
            advantages.extend(r.pg_advantages);
            offset += n;
        }
        Ok(VTraceBatch {
            features,
            mask,
            actions,
            targets,
            advantages,
        })
    }

    #[allow(clippy::too_many_arguments)]
    pub fn loss(
        &self,
        policy: &P,
        value: &V,
        tape: &mut Tape<S>,
        policy_bound: &[Var],
        value_bound: &[Var],
        b: &VTraceBatch<S>,
    ) -> Result<(Var, VTraceLosses<S>)> {
        let x = tape.constant(b.features.clone());
        let logits = policy.forward(tape, policy_bound, x)?;
        let logits = apply_mask(tape, logits, b.mask.as_ref())?;
        let log_probs = tape.log_softmax(logits);
        let pg = pg_loss(tape, log_probs, &b.actions, &b.advantages)?;
        let v = value.forward(tape, value_bound, x)?;
        let vl = value_loss(tape, v, &b.targets)?;
        let el = entropy_loss(tape, log_probs)?;
        let vterm = tape.scale(vl, self.config.baseline_cost);
        let eterm = tape.scale(el, self.config.entropy_cost);
        let partial = tape.add(pg, vterm)?;
        let total = tape.add(partial, eterm)?;
        let parts = VTraceLosses {
            policy: tape.value(pg).item(),
            value: tape.value(vl).item(),
            entropy: tape.value(el).item(),
            total: tape.value(total).item(),
        };
        Ok((total, parts))
    }

    pub fn update(&mut self, segments: &[Trajectory]) -> Result<VTraceLosses<S>> {
        let batch = self.prepare(segments)?;
        let mut tape = Tape::new();
        let pb = self.policy.params().bind(&mut tape);
        let vb = self.value.params().bind(&mut tape);
        let (loss, parts) = self.loss(&self.policy, &self.value, &mut tape, &pb, &vb, &batch)?;
        let grads = tape.backward(loss)?;
        self.policy.params_mut().accumulate(&grads, &pb)?;
        self.value.params_mut().accumulate(&grads, &vb)?;
        self.policy_opt.step(self.policy.params_mut())?;
        self.value_opt.step(self.value.params_mut())?;
        Ok(parts)
    }
}
