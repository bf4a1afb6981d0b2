use gsea_core::rng::stream;
use gsea_core::seq::{sample_windows, MaentLearner, ReturnQuantizer};
use gsea_core::{Environment, Error, Real, Result, Scalar, Trajectory};
use serde::{Deserialize, Serialize};

use crate::actor::Actor;
use crate::behavior::ReturnConditioned;
use crate::budget::{Budget, BudgetTracker};
use crate::replay::ReplayBuffer;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinetuneConfig {
    /// Upper bound on gradient updates; `None` leaves it to the budget.
    pub max_updates: Option<u64>,
    /// Episodes rolled out per rollout phase.
    pub episodes_per_rollout: usize,
    /// Return the rollout policy is conditioned on.
    pub target_return: f64,
    pub temperature: f64,
    pub seed: u64,
}

impl Default for FinetuneConfig {
    fn default() -> Self {
        Self {
            max_updates: None,
            episodes_per_rollout: 1,
            target_return: 0.0,
            temperature: 1.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FinetuneStats {
    pub updates: u64,
    pub rollouts: u64,
    pub env_steps: u64,
    pub episodes: u64,
    pub episode_returns: Vec<f64>,
    /// Per-update action NLL, entropy and dual variable.
    pub nll: Vec<f64>,
    pub entropy: Vec<f64>,
    pub lambda: Vec<f64>,
    pub max_buffer_len: usize,
    pub train_seconds: f64,
}

/// Online fine-tuning of a sequence policy: alternate rollouts that fill
/// a trajectory buffer with phases of max-entropy sequence-model updates
/// on windows sampled from it.
///
/// Interaction is charged to `budget`; after the last permitted rollout
/// one final phase of updates is run, except under a time budget, which is
/// checked between updates.
pub fn finetune_mgdt<E: Environment>(
    env: &mut E,
    learner: &mut MaentLearner<Real>,
    quantizer: &ReturnQuantizer,
    cfg: &FinetuneConfig,
    budget: &BudgetTracker,
) -> Result<FinetuneStats> {
    let actions = learner.model.config().actions;
    if env.action_count() != actions {
        return Err(Error::Contract(format!(
            "environment has {} actions, the model predicts {actions}",
            env.action_count()
        )));
    }
    if cfg.episodes_per_rollout == 0 {
        return Err(Error::Config("episodes_per_rollout must be positive".into()));
    }
    let mut stats = FinetuneStats::default();
    let max_updates = cfg.max_updates.unwrap_or(u64::MAX);
    if max_updates == 0 || budget.exhausted() {
        stats.train_seconds = budget.elapsed();
        return Ok(stats);
    }
    let timed = matches!(budget.budget(), Budget::Seconds(_));
    let mut rng = stream(cfg.seed, 0);
    let mut buffer = ReplayBuffer::<Trajectory>::new(learner.config.buffer_capacity)?;
    let policy = |learner: &MaentLearner<Real>| {
        ReturnConditioned::new(learner.model.clone(), *quantizer, cfg.target_return, cfg.temperature)
    };
    let mut actor = Actor::new(0, env, policy(learner), cfg.seed);
    'outer: loop {
        let fresh = policy(learner);
        actor.refresh(&crate::snapshot::Snapshot { version: learner.updates(), policy: fresh });
        let mut collected = 0;
        while collected < cfg.episodes_per_rollout {
            match actor.collect(usize::MAX, budget)? {
                Some(seg) => {
                    stats.env_steps += seg.trajectory.len() as u64;
                    if let Some(r) = seg.finished_return {
                        stats.episode_returns.push(r);
                        stats.episodes += 1;
                        collected += 1;
                    }
                    buffer.push(seg.trajectory);
                    stats.max_buffer_len = stats.max_buffer_len.max(buffer.len());
                }
                None => break,
            }
            if budget.exhausted() && !actor.in_episode() {
                break;
            }
        }
        stats.rollouts += 1;
        if buffer.is_empty() {
            break;
        }
        for _ in 0..learner.config.updates_between_rollouts {
            if stats.updates >= max_updates || (timed && budget.exhausted()) {
                break 'outer;
            }
            let samples = sample_windows(
                &learner.model,
                quantizer,
                buffer.make_contiguous(),
                learner.config.batch,
                learner.config.context,
                &mut rng,
            )?;
            let s = learner.update(&samples)?;
            stats.nll.push(s.nll.as_f64());
            stats.entropy.push(s.entropy.as_f64());
            stats.lambda.push(s.lambda.as_f64());
            stats.updates += 1;
        }
        if budget.exhausted() {
            break;
        }
    }
    stats.train_seconds = budget.elapsed();
    Ok(stats)
}
