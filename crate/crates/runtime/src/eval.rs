use std::time::Instant;

use gsea_core::{BugEvent, Environment, Result};
use serde::{Deserialize, Serialize};

use crate::actor::Actor;
use crate::behavior::Behavior;
use crate::budget::{Budget, BudgetTracker, ClockKind};

/// One evaluation episode, possibly cut short by the step allowance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub episode_return: f64,
    pub steps: usize,
    pub events: Vec<BugEvent>,
    pub complete: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalOutcome {
    pub episodes: Vec<EpisodeRecord>,
    pub steps: u64,
    pub seconds: f64,
}

/// Runs `behavior` without learning for a step or episode allowance.
pub fn evaluate<E: Environment, B: Behavior>(env: E, behavior: B, allowance: Budget, seed: u64) -> Result<EvalOutcome> {
    let start = Instant::now();
    let budget = BudgetTracker::new(allowance, ClockKind::Wall)?;
    let mut actor = Actor::new(0, env, behavior, seed);
    let mut episodes = Vec::new();
    let mut steps = 0;
    while let Some(seg) = actor.collect(usize::MAX, &budget)? {
        steps += seg.trajectory.len() as u64;
        episodes.push(EpisodeRecord {
            episode_return: seg.trajectory.episode_return(),
            steps: seg.trajectory.len(),
            events: seg.events,
            complete: seg.finished_return.is_some(),
        });
    }
    Ok(EvalOutcome { episodes, steps, seconds: start.elapsed().as_secs_f64() })
}
