use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::mpsc::{sync_channel, Receiver};
use std::sync::Mutex;
use std::thread;

use gsea_core::{Environment, Error, Result, Trajectory};
use serde::{Deserialize, Serialize};

use crate::actor::{Actor, Segment};
use crate::agents::Agent;
use crate::budget::{Budget, BudgetTracker};
use crate::rundir::RunDir;
use crate::snapshot::SnapshotStore;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActorLearnerConfig {
    pub actors: usize,
    /// Steps per segment.
    pub segment_len: usize,
    pub queue_capacity: usize,
    pub seed: u64,
    /// Run one actor and the learner on the calling thread.
    pub synchronous: bool,
}

impl Default for ActorLearnerConfig {
    fn default() -> Self {
        Self {
            actors: 4,
            segment_len: 20,
            queue_capacity: 64,
            seed: 0,
            synchronous: false,
        }
    }
}

impl ActorLearnerConfig {
    pub fn synchronous(seed: u64) -> Self {
        Self {
            actors: 1,
            synchronous: true,
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.actors == 0 || self.segment_len == 0 || self.queue_capacity == 0 {
            return Err(Error::Config(
                "actor count, segment length and queue capacity must be positive".into(),
            ));
        }
        if self.synchronous && self.actors != 1 {
            return Err(Error::Config("synchronous mode runs exactly one actor".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub produced: u64,
    pub consumed: u64,
    /// Segments left in the queue when the learner stopped.
    pub queued_at_shutdown: u64,
    pub updates: u64,
    pub final_version: u64,
    pub mean_policy_lag: f64,
    pub max_policy_lag: u64,
    pub env_steps: u64,
    pub episodes: u64,
    /// Returns of completed episodes, in the order the learner saw them.
    pub episode_returns: Vec<f64>,
    pub losses: Vec<f64>,
    pub train_seconds: f64,
}

/// Result of a run. A learner failure leaves `failure` set and the
/// statistics gathered up to that point.
pub struct RunOutcome<A> {
    pub agent: A,
    pub stats: RunStats,
    pub failure: Option<Error>,
}

struct Learner<'a, A: Agent> {
    agent: A,
    store: &'a SnapshotStore<A::Behavior>,
    pending: Vec<Trajectory>,
    stats: RunStats,
    lag_sum: u64,
}

impl<A: Agent> Learner<'_, A> {
    fn consume(&mut self, seg: Segment) -> Result<()> {
        let lag = self.store.version() - seg.version;
        self.lag_sum += lag;
        self.stats.max_policy_lag = self.stats.max_policy_lag.max(lag);
        self.stats.consumed += 1;
        if let Some(r) = seg.finished_return {
            self.stats.episode_returns.push(r);
        }
        self.pending.push(seg.trajectory);
        if self.pending.len() >= self.agent.segments_per_update() {
            self.update()?;
        }
        Ok(())
    }

    fn update(&mut self) -> Result<()> {
        if self.pending.is_empty() {
            return Ok(());
        }
        let loss = self.agent.learn(&self.pending)?;
        self.pending.clear();
        self.stats.losses.push(loss);
        self.stats.updates += 1;
        self.store.publish(self.agent.behavior());
        Ok(())
    }

    fn finish(mut self, budget: &BudgetTracker, failure: Option<Error>) -> RunOutcome<A> {
        self.stats.final_version = self.store.version();
        self.stats.mean_policy_lag = if self.stats.consumed == 0 {
            0.0
        } else {
            self.lag_sum as f64 / self.stats.consumed as f64
        };
        let usage = budget.usage();
        self.stats.env_steps = usage.steps;
        self.stats.episodes = usage.episodes;
        self.stats.train_seconds = usage.seconds;
        RunOutcome { agent: self.agent, stats: self.stats, failure }
    }
}

/// Trains `agent` with actors feeding a bounded queue until the budget is
/// spent.
///
/// Step and episode budgets meter interaction: segments still pending when
/// the actors stop are used for one last update. Time budgets are checked
/// between updates and nothing is trained after they expire.
pub fn run_actor_learner<A, E, F>(
    cfg: &ActorLearnerConfig,
    agent: A,
    make_env: F,
    budget: &BudgetTracker,
    run_dir: Option<&RunDir>,
) -> Result<RunOutcome<A>>
where
    A: Agent,
    E: Environment,
    F: Fn(usize) -> E + Sync,
{
    cfg.validate()?;
    let store = SnapshotStore::new(agent.behavior());
    let mut learner = Learner { agent, store: &store, pending: Vec::new(), stats: RunStats::default(), lag_sum: 0 };
    if budget.exhausted() {
        return Ok(learner.finish(budget, None));
    }
    let timed = matches!(budget.budget(), Budget::Seconds(_));
    if cfg.synchronous {
        let mut actor = Actor::new(0, make_env(0), store.latest().policy.clone(), cfg.seed);
        if let Some(dir) = run_dir {
            actor = actor.with_log(dir.segment_log(0)?);
        }
        let mut failure = None;
        loop {
            if timed && budget.exhausted() {
                break;
            }
            actor.refresh(&store.latest());
            let seg = match actor.collect(cfg.segment_len, budget)? {
                Some(seg) => seg,
                None => break,
            };
            learner.stats.produced += 1;
            if let Err(e) = learner.consume(seg) {
                failure = Some(e);
                break;
            }
        }
        actor.flush_log()?;
        if failure.is_none() && !timed {
            failure = learner.update().err();
        }
        return Ok(learner.finish(budget, failure));
    }

    let logs = match run_dir {
        Some(dir) => (0..cfg.actors).map(|i| dir.segment_log(i).map(Some)).collect::<Result<Vec<_>>>()?,
        None => (0..cfg.actors).map(|_| None).collect(),
    };
    let produced = AtomicU64::new(0);
    let actor_errors = Mutex::new(Vec::new());
    let (tx, rx) = sync_channel::<Segment>(cfg.queue_capacity);
    let (failure, queued) = thread::scope(|s| {
        for (id, log) in logs.into_iter().enumerate() {
            let tx = tx.clone();
            let (store, produced, actor_errors, make_env) = (&store, &produced, &actor_errors, &make_env);
            s.spawn(move || {
                let mut actor = Actor::new(id, make_env(id), store.latest().policy.clone(), cfg.seed);
                if let Some(log) = log {
                    actor = actor.with_log(log);
                }
                let result = (|| -> Result<()> {
                    loop {
                        actor.refresh(&store.latest());
                        let Some(seg) = actor.collect(cfg.segment_len, budget)? else {
                            return Ok(());
                        };
                        if tx.send(seg).is_err() {
                            return Ok(());
                        }
                        produced.fetch_add(1, Ordering::SeqCst);
                    }
                })()
                .and_then(|_| actor.flush_log());
                if let Err(e) = result {
                    budget.stop();
                    actor_errors.lock().expect("error list poisoned").push(e);
                }
            });
        }
        drop(tx);
        let failure = drive(&mut learner, &rx, budget, timed);
        budget.stop();
        let queued = rx.iter().count() as u64;
        (failure, queued)
    });
    learner.stats.produced = produced.load(Ordering::SeqCst);
    learner.stats.queued_at_shutdown = queued;
    let failure = failure.or_else(|| actor_errors.into_inner().expect("error list poisoned").into_iter().next());
    Ok(learner.finish(budget, failure))
}

fn drive<A: Agent>(learner: &mut Learner<'_, A>, rx: &Receiver<Segment>, budget: &BudgetTracker, timed: bool) -> Option<Error> {
    loop {
        if timed && budget.exhausted() {
            return None;
        }
        match rx.recv() {
            Ok(seg) => {
                if let Err(e) = learner.consume(seg) {
                    return Some(e);
                }
            }
            Err(_) => break,
        }
    }
    if timed {
        None
    } else {
        learner.update().err()
    }
}
