//! V-trace off-policy correction.
//!
//! For a segment `x_s..x_{s+n}` generated by a behavior policy μ with
//! importance ratios `π/μ`, the corrected value target is
//!
//! ```text
//! v_s = V(x_s) + Σ_{t=s}^{s+n-1} γ^{t-s} (Π_{i=s}^{t-1} c_i) δ_t
//! δ_t = ρ_t (r_t + γ V(x_{t+1}) - V(x_t))
//! ρ_t = min(ρ̄, π/μ),  c_i = min(c̄, π/μ)
//! ```
//!
//! computed here by the backward recursion
//! `v_s - V(x_s) = δ_s + γ c_s (v_{s+1} - V(x_{s+1}))`.

use crate::error::{Error, Result};
use crate::nn::{Tape, Var};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VTraceConfig<S> {
    pub rho_bar: S,
    pub c_bar: S,
    pub gamma: S,
    pub baseline_cost: S,
    pub entropy_cost: S,
}

impl<S: Scalar> Default for VTraceConfig<S> {
    /// ρ̄ = c̄ = 1, γ = 0.99, baseline cost 0.5, entropy cost 0.0006.
    fn default() -> Self {
        Self {
            rho_bar: S::one(),
            c_bar: S::one(),
            gamma: S::of(0.99),
            baseline_cost: S::of(0.5),
            entropy_cost: S::of(0.0006),
        }
    }
}

impl<S: Scalar> VTraceConfig<S> {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho_bar >= self.c_bar) {
            return Err(Error::Config(format!(
                "rho_bar {} must be >= c_bar {}",
                self.rho_bar, self.c_bar
            )));
        }
        if !(self.c_bar > S::zero()) {
            return Err(Error::Config("c_bar must be positive".into()));
        }
        if !(self.gamma >= S::zero() && self.gamma <= S::one()) {
            return Err(Error::Config(format!("gamma {} outside [0,1]", self.gamma)));
        }
        if !(self.baseline_cost >= S::zero() && self.entropy_cost >= S::zero()) {
            return Err(Error::Config("costs must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VTraceResult<S> {
    /// Corrected targets `v_s`, one per step.
    pub targets: Vec<S>,
    /// `ρ_s (r_s + γ v_{s+1} - V(x_s))`, with `v_{s+n} = V(x_{s+n})`.
    pub pg_advantages: Vec<S>,
    pub truncated_rhos: Vec<S>,
    pub truncated_cs: Vec<S>,
}

/// V-trace targets and policy-gradient advantages for one segment.
///
/// `values` holds `n + 1` entries, the last being the bootstrap value
/// (zero after a terminal). `rewards` and `ratios` hold `n` entries.
pub fn compute_vtrace<S: Scalar>(
    values: &[S],
    rewards: &[S],
    ratios: &[S],
    cfg: &VTraceConfig<S>,
) -> Result<VTraceResult<S>> {
    let n = rewards.len();
    if n == 0 {
        return Err(Error::Shape("empty segment".into()));
    }
    if values.len() != n + 1 || ratios.len() != n {
        return Err(Error::Shape(format!(
            "segment of {n} rewards needs {} values and {n} ratios, got {} and {}",
            n + 1,
            values.len(),
            ratios.len()
        )));
    }
    let finite = |xs: &[S]| xs.iter().all(|x| x.is_finite());
    if !finite(values) || !finite(rewards) || !finite(ratios) {
        return Err(Error::Numeric("non-finite V-trace input".into()));
    }
    if let Some(r) = ratios.iter().find(|r| !(**r > S::zero())) {
        return Err(Error::Contract(format!("importance ratio {r} must be positive")));
    }
    let gamma = cfg.gamma;
    let rhos: Vec<S> = ratios.iter().map(|&r| r.min(cfg.rho_bar)).collect();
    let cs: Vec<S> = ratios.iter().map(|&r| r.min(cfg.c_bar)).collect();

    let mut targets = vec![S::zero(); n];
    let mut correction = S::zero();
    for t in (0..n).rev() {
        let delta = rhos[t] * (rewards[t] + gamma * values[t + 1] - values[t]);
        correction = delta + gamma * cs[t] * correction;
        targets[t] = values[t] + correction;
    }
    let pg_advantages = (0..n)
        .map(|t| {
            let next = if t + 1 < n { targets[t + 1] } else { values[n] };
            rhos[t] * (rewards[t] + gamma * next - values[t])
        })
        .collect();
    Ok(VTraceResult {
        targets,
        pg_advantages,
        truncated_rhos: rhos,
        truncated_cs: cs,
    })
}

/// `½ Σ (v_s - V(x_s))²` with the targets held constant.
pub fn value_loss<S: Scalar>(tape: &mut Tape<S>, predicted: Var, targets: &[S]) -> Result<Var> {
    let (rows, cols) = tape.value(predicted).shape();
    if rows * cols != targets.len() {
        return Err(Error::Shape(format!(
            "{} targets for {rows}x{cols} predictions",
            targets.len()
        )));
    }
    let target = tape.constant(crate::nn::Tensor::from_vec(rows, cols, targets.to_vec())?);
    let diff = tape.sub(target, predicted)?;
    let sq = tape.square(diff);
    let total = tape.sum(sq);
    Ok(tape.scale(total, S::of(0.5)))
}

/// Closed-form gradient of `½ Σ (v_s - w·x_s)²` with respect to `w` for a
/// linear value function: `-Σ (v_s - V_s) x_s`.
pub fn value_grad_direction<S: Scalar>(
    targets: &[S],
    predicted: &[S],
    features: &[Vec<S>],
) -> Result<Vec<S>> {
    if targets.len() != predicted.len() || targets.len() != features.len() {
        return Err(Error::Shape("targets, predictions and features differ in length".into()));
    }
    let width = features.first().map_or(0, Vec::len);
    let mut grad = vec![S::zero(); width];
    for ((&v, &p), x) in targets.iter().zip(predicted).zip(features) {
        if x.len() != width {
            return Err(Error::Shape("ragged features".into()));
        }
        for (g, &xi) in grad.iter_mut().zip(x) {
            *g -= (v - p) * xi;
        }
    }
    Ok(grad)
}

/// `-Σ_s A_s log π(a_s|x_s)` from row-wise log-probabilities.
pub fn pg_loss<S: Scalar>(
    tape: &mut Tape<S>,
    log_probs: Var,
    actions: &[usize],
    advantages: &[S],
) -> Result<Var> {
    if actions.len() != advantages.len() {
        return Err(Error::Shape("actions and advantages differ in length".into()));
    }
    let picked = tape.gather(log_probs, actions)?;
    let adv = tape.constant(crate::nn::Tensor::from_vec(
        advantages.len(),
        1,
        advantages.to_vec(),
    )?);
    let weighted = tape.mul(picked, adv)?;
    let total = tape.sum(weighted);
    Ok(tape.neg(total))
}

/// `-Σ_s H[π(·|x_s)]` from row-wise log-probabilities.
pub fn entropy_loss<S: Scalar>(tape: &mut Tape<S>, log_probs: Var) -> Result<Var> {
    let probs = tape.exp(log_probs);
    let plogp = tape.mul(probs, log_probs)?;
    Ok(tape.sum(plogp))
}

/// Policy-gradient loss with entropy regularization:
/// `-Σ A_s log π(a_s|x_s) + entropy_cost · (-Σ H[π(·|x_s)])`.
pub fn policy_grad_direction<S: Scalar>(
    tape: &mut Tape<S>,
    logits: Var,
    actions: &[usize],
    advantages: &[S],
    entropy_cost: S,
) -> Result<Var> {
    let log_probs = tape.log_softmax(logits);
    let pg = pg_loss(tape, log_probs, actions, advantages)?;
    let ent = entropy_loss(tape, log_probs)?;
    let ent = tape.scale(ent, entropy_cost);
    tape.add(pg, ent)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(gamma: f64) -> VTraceConfig<f64> {
        VTraceConfig {
            gamma,
            ..Default::default()
        }
    }

    #[test]
    fn worked_two_step_segment() {
        let r = compute_vtrace(&[1.0, 0.5, 0.0], &[1.0, 2.0], &[2.0, 0.5], &cfg(0.9)).unwrap();
        assert!((r.targets[0] - 2.125).abs() < 1e-12);
        assert!((r.targets[1] - 1.25).abs() < 1e-12);
        assert!((r.pg_advantages[0] - 1.125).abs() < 1e-12);
        assert_eq!(r.truncated_rhos, vec![1.0, 0.5]);
        assert_eq!(r.truncated_cs, vec![1.0, 0.5]);
    }

    #[test]
    fn zero_rewards_and_values() {
        let r = compute_vtrace(&[0.0; 4], &[0.0; 3], &[0.3, 1.7, 1.0], &cfg(0.99)).unwrap();
        assert!(r.targets.iter().all(|&v| v == 0.0));
        assert!(r.pg_advantages.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn bad_inputs() {
        assert!(matches!(
            compute_vtrace(&[0.0, f64::NAN], &[1.0], &[1.0], &cfg(0.9)),
            Err(Error::Numeric(_))
        ));
        assert!(compute_vtrace::<f64>(&[0.0], &[], &[], &cfg(0.9)).is_err());
        assert!(compute_vtrace(&[0.0, 0.0], &[1.0], &[0.0], &cfg(0.9)).is_err());
        assert!(compute_vtrace(&[0.0], &[1.0], &[1.0], &cfg(0.9)).is_err());
        let bad = VTraceConfig {
            rho_bar: 0.5,
            c_bar: 1.0,
            ..cfg(0.9)
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn linear_value_gradient_by_hand() {
        let g = value_grad_direction(&[5.0], &[2.0], &[vec![2.0]]).unwrap();
        assert_eq!(g, vec![-6.0]);
        let z = value_grad_direction(&[1.0, 2.0], &[1.0, 2.0], &[vec![3.0], vec![4.0]]).unwrap();
        assert_eq!(z, vec![0.0]);
    }

    #[test]
    fn zero_advantage_no_entropy_gives_zero_gradient() {
        let mut tape = Tape::<f64>::new();
        let logits = tape.leaf(crate::nn::Tensor::from_rows(&[vec![0.3, -0.2, 1.0]]).unwrap());
        let loss = policy_grad_direction(&mut tape, logits, &[1], &[0.0], 0.0).unwrap();
        let g = tape.backward(loss).unwrap();
        assert!(g.get(logits).unwrap().data().iter().all(|&x| x == 0.0));
    }
}
