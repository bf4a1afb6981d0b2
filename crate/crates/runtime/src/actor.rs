use gsea_core::rng::{derive_seed, stream, Rng};
use gsea_core::{BugEvent, Environment, Error, Observation, Result, Trajectory, Transition};

use crate::behavior::Behavior;
use crate::budget::BudgetTracker;
use crate::rundir::SegmentLog;
use crate::snapshot::Snapshot;

/// A run of at most `n` transitions from one actor, cut short at episode
/// end or when the budget runs out.
#[derive(Debug, Clone)]
pub struct Segment {
    pub actor: usize,
    /// Snapshot version of the parameters that acted.
    pub version: u64,
    pub trajectory: Trajectory,
    pub events: Vec<BugEvent>,
    /// Undiscounted return of the episode this segment finished, if any.
    pub finished_return: Option<f64>,
}

/// One environment plus the behavior acting in it.
pub struct Actor<E, B> {
    id: usize,
    env: E,
    behavior: B,
    version: u64,
    rng: Rng,
    seed: u64,
    episodes: u64,
    current: Option<Observation>,
    episode_return: f64,
    log: Option<SegmentLog>,
}

impl<E: Environment, B: Behavior> Actor<E, B> {
    pub fn new(id: usize, env: E, behavior: B, seed: u64) -> Self {
        Self {
            id,
            env,
            behavior,
            version: 0,
            rng: stream(seed, id as u64 + 1),
            seed,
            episodes: 0,
            current: None,
            episode_return: 0.0,
            log: None,
        }
    }

    pub fn with_log(mut self, log: SegmentLog) -> Self {
        self.log = Some(log);
        self
    }

    pub fn env(&self) -> &E {
        &self.env
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn in_episode(&self) -> bool {
        self.current.is_some()
    }

    /// Retrieves the latest parameters before the next segment.
    pub fn refresh(&mut self, snapshot: &Snapshot<B>) {
        self.behavior.adopt(&snapshot.policy);
        self.version = snapshot.version;
    }

    /// Reset seed of this actor's `episode`-th episode.
    pub fn episode_seed(&self, episode: u64) -> u64 {
        derive_seed(self.seed, ((self.id as u64) << 40) | episode)
    }

    /// Collects up to `n` steps. `None` when the budget allowed no step.
    pub fn collect(&mut self, n: usize, budget: &BudgetTracker) -> Result<Option<Segment>> {
        let mut transitions = Vec::new();
        let mut events = Vec::new();
        let mut finished_return = None;
        while transitions.len() < n {
            let obs = match self.current.take() {
                Some(obs) => obs,
                None => {
                    if !budget.try_begin_episode() {
                        break;
                    }
                    let seed = self.episode_seed(self.episodes);
                    self.episodes += 1;
                    self.episode_return = 0.0;
                    self.behavior.begin_episode();
                    self.env.reset(seed)
                }
            };
            if !budget.try_acquire_step() {
                self.current = Some(obs);
                break;
            }
            let mask = self.env.action_mask();
            let (action, behavior_log_prob) = self.behavior.act(&obs, mask.as_deref(), &mut self.rng)?;
            if action >= self.env.action_count() {
                return Err(Error::Contract(format!(
                    "behavior chose action {action} but the environment has {}",
                    self.env.action_count()
                )));
            }
            let out = self.env.step(action)?;
            self.behavior.observe(action, out.reward)?;
            self.episode_return += out.reward;
            events.extend(out.events.iter().copied());
            let next_action_mask = if out.done { None } else { self.env.action_mask() };
            transitions.push(Transition {
                observation: obs,
                action,
                reward: out.reward,
                next_observation: out.observation.clone(),
                terminal: out.done,
                behavior_log_prob,
                action_mask: mask,
                next_action_mask,
            });
            if out.done {
                budget.end_episode();
                finished_return = Some(self.episode_return);
                break;
            }
            self.current = Some(out.observation);
        }
        if transitions.is_empty() {
            return Ok(None);
        }
        if let Some(log) = &mut self.log {
            log.append(self.version, &transitions)?;
        }
        Ok(Some(Segment {
            actor: self.id,
            version: self.version,
            trajectory: Trajectory::new(transitions)?,
            events,
            finished_return,
        }))
    }

    pub fn flush_log(&mut self) -> Result<()> {
        match &mut self.log {
            Some(log) => log.flush(),
            None => Ok(()),
        }
    }
}
