use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use gsea_core::nn::{Activation, DecayedAdam, Mlp, MlpSpec, Model, RmsProp};
use gsea_core::learners::{PpoConfig, PpoLearner, TaskKind};
use gsea_core::rng::{seeded, Rng};
use gsea_core::seq::{EntropyTarget, MaentConfig, MaentLearner, ReturnQuantizer, SeqModelConfig};
use gsea_core::{
    Encoding, Environment, Error, Observation, Result, SequenceModel, StepOutcome, Trajectory,
};
use gsea_runtime::{
    finetune_mgdt, run_actor_learner, Actor, ActorLearnerConfig, Agent, Behavior, Budget, BudgetTracker,
    ClockKind, FinetuneConfig, PpoAgent, RunDir, Snapshot,
};

/// Walks right one cell per step. Action 0 pays 1, others pay 0.
#[derive(Debug, Clone)]
struct Corridor {
    len: usize,
    actions: usize,
    pos: usize,
    done: bool,
}

impl Corridor {
    fn new(len: usize, actions: usize) -> Self {
        Self { len, actions, pos: 0, done: false }
    }
}

impl Environment for Corridor {
    fn action_count(&self) -> usize {
        self.actions
    }
    fn observation_shape(&self) -> (usize, usize) {
        (2, self.len / 2)
    }
    fn reset(&mut self, _seed: u64) -> Observation {
        self.pos = 0;
        self.done = false;
        self.observe()
    }
    fn step(&mut self, action: usize) -> Result<StepOutcome> {
        if self.done {
            return Err(Error::State("episode over".into()));
        }
        self.pos += 1;
        self.done = self.pos == self.len;
        Ok(StepOutcome {
            observation: self.observe(),
            reward: if action == 0 { 1.0 } else { 0.0 },
            done: self.done,
            events: Vec::new(),
        })
    }
    fn observe(&self) -> Observation {
        let mut data = vec![0.0; self.len];
        if self.pos < self.len {
            data[self.pos] = 1.0;
        }
        Observation::new(2, self.len / 2, data).unwrap()
    }
    fn is_done(&self) -> bool {
        self.done
    }
}

/// Always picks the same action.
#[derive(Debug, Clone)]
struct Fixed(usize);

impl Behavior for Fixed {
    fn act(&mut self, _: &Observation, _: Option<&[bool]>, _: &mut Rng) -> Result<(usize, f64)> {
        Ok((self.0, 0.0))
    }
}

/// Counts updates and learns nothing.
struct Counting {
    updates: Arc<AtomicU64>,
    batch: usize,
}

impl Agent for Counting {
    type Behavior = Fixed;
    fn behavior(&self) -> Fixed {
        Fixed(0)
    }
    fn segments_per_update(&self) -> usize {
        self.batch
    }
    fn learn(&mut self, segments: &[Trajectory]) -> Result<f64> {
        assert!(!segments.is_empty());
        self.updates.fetch_add(1, Ordering::SeqCst);
        Ok(0.0)
    }
    fn checkpoint(&self) -> String {
        String::new()
    }
}

fn counting(batch: usize) -> (Counting, Arc<AtomicU64>) {
    let n = Arc::new(AtomicU64::new(0));
    (Counting { updates: n.clone(), batch }, n)
}

fn tracker(budget: Budget) -> BudgetTracker {
    BudgetTracker::new(budget, ClockKind::Logical { seconds_per_step: 0.01 }).unwrap()
}

fn ppo_agent(seed: u64) -> PpoAgent<Mlp<f32>, Mlp<f32>> {
    let mut rng = seeded(seed);
    let policy = Mlp::new(MlpSpec::new(vec![8, 16, 2], Activation::Tanh).unwrap(), &mut rng);
    let value = Mlp::new(MlpSpec::new(vec![8, 16, 1], Activation::Tanh).unwrap(), &mut rng);
    let learner = PpoLearner::new(
        policy,
        value,
        Box::new(RmsProp::impala_defaults()),
        Box::new(RmsProp::impala_defaults()),
        PpoConfig::for_task(TaskKind::Jssp),
        Encoding::Raw,
    )
    .unwrap();
    PpoAgent { learner, batch: 4 }
}

#[test]
fn scripted_segment_matches_hand_rollout() {
    let budget = tracker(Budget::Steps(1000));
    let mut actor = Actor::new(0, Corridor::new(8, 2), Fixed(1), 7);
    let seg = actor.collect(5, &budget).unwrap().unwrap();
    assert_eq!(seg.trajectory.len(), 5);
    let mut env = Corridor::new(8, 2);
    let mut obs = env.reset(0);
    for (i, tr) in seg.trajectory.transitions().iter().enumerate() {
        let out = env.step(1).unwrap();
        assert_eq!(tr.observation, obs, "step {i}");
        assert_eq!(tr.next_observation, out.observation);
        assert_eq!((tr.action, tr.reward, tr.terminal), (1, 0.0, false));
        assert_eq!(tr.behavior_log_prob, 0.0);
        obs = out.observation;
    }
    assert_eq!(seg.version, 0);
    assert_eq!(seg.finished_return, None);
    // The next segment continues the episode and ends at its terminal.
    let rest = actor.collect(5, &budget).unwrap().unwrap();
    assert_eq!(rest.trajectory.len(), 3);
    assert!(rest.trajectory.is_terminal());
    assert_eq!(rest.trajectory.transitions()[0].observation, obs);
}

#[test]
fn terminal_cuts_segment_short() {
    let budget = tracker(Budget::Steps(1000));
    let mut actor = Actor::new(0, Corridor::new(2, 2), Fixed(0), 1);
    let seg = actor.collect(5, &budget).unwrap().unwrap();
    assert_eq!(seg.trajectory.len(), 2);
    assert!(seg.trajectory.is_terminal());
    assert_eq!(seg.finished_return, Some(2.0));
}

#[test]
fn refresh_records_snapshot_version() {
    let budget = tracker(Budget::Steps(1000));
    let mut actor = Actor::new(0, Corridor::new(4, 2), Fixed(0), 1);
    actor.refresh(&Snapshot { version: 9, policy: Fixed(1) });
    let seg = actor.collect(2, &budget).unwrap().unwrap();
    assert_eq!(seg.version, 9);
    assert!(seg.trajectory.transitions().iter().all(|t| t.action == 1));
}

#[test]
fn out_of_range_action_is_a_contract_error() {
    let budget = tracker(Budget::Steps(10));
    let mut actor = Actor::new(0, Corridor::new(4, 2), Fixed(5), 1);
    assert!(matches!(actor.collect(2, &budget), Err(Error::Contract(_))));
}

#[test]
fn zero_budget_means_no_updates() {
    for synchronous in [true, false] {
        let (agent, updates) = counting(1);
        let cfg = ActorLearnerConfig { synchronous, actors: if synchronous { 1 } else { 4 }, ..Default::default() };
        let out = run_actor_learner(&cfg, agent, |_| Corridor::new(4, 2), &tracker(Budget::Steps(0)), None).unwrap();
        assert_eq!(updates.load(Ordering::SeqCst), 0);
        assert_eq!(out.stats.final_version, 0);
        assert_eq!(out.stats.produced, 0);
    }
}

#[test]
fn synchronous_run_conserves_segments() {
    let (agent, updates) = counting(3);
    let cfg = ActorLearnerConfig { segment_len: 3, ..ActorLearnerConfig::synchronous(4) };
    let out = run_actor_learner(&cfg, agent, |_| Corridor::new(8, 2), &tracker(Budget::Steps(100)), None).unwrap();
    let s = &out.stats;
    assert!(out.failure.is_none());
    assert_eq!(s.produced, s.consumed);
    assert_eq!(s.queued_at_shutdown, 0);
    assert_eq!(s.env_steps, 100);
    assert_eq!(s.mean_policy_lag, 0.0);
    // 100 steps in 8-step episodes cut into 3,3,2 segments.
    assert_eq!(s.produced, 12 * 3 + 2);
    assert_eq!(updates.load(Ordering::SeqCst), s.updates);
    assert_eq!(s.updates, s.consumed.div_ceil(3));
    assert_eq!(s.final_version, s.updates);
}

#[test]
fn parallel_run_conserves_segments_and_lags() {
    let (agent, _) = counting(1);
    let cfg = ActorLearnerConfig { actors: 4, segment_len: 5, queue_capacity: 8, ..Default::default() };
    let out = run_actor_learner(&cfg, agent, |_| Corridor::new(10, 2), &tracker(Budget::Steps(20_000)), None).unwrap();
    let s = &out.stats;
    assert_eq!(s.produced, s.consumed + s.queued_at_shutdown);
    assert_eq!(s.env_steps, 20_000);
    assert!(s.mean_policy_lag > 0.0, "lag {}", s.mean_policy_lag);
    assert_eq!(s.final_version, s.updates);
}

#[test]
fn episode_budget_finishes_exactly_that_many_episodes() {
    let (agent, _) = counting(2);
    let cfg = ActorLearnerConfig { actors: 4, segment_len: 3, ..Default::default() };
    let out = run_actor_learner(&cfg, agent, |_| Corridor::new(8, 2), &tracker(Budget::Episodes(10)), None).unwrap();
    assert_eq!(out.stats.episodes, 10);
    assert_eq!(out.stats.env_steps, 80);
    assert_eq!(out.stats.episode_returns, vec![8.0; 10]);
}

#[test]
fn time_budget_stops_at_the_boundary() {
    let (agent, _) = counting(1);
    let budget = BudgetTracker::new(Budget::Seconds(1.0), ClockKind::Logical { seconds_per_step: 0.01 }).unwrap();
    let out = run_actor_learner(&ActorLearnerConfig::synchronous(0), agent, |_| Corridor::new(8, 2), &budget, None)
        .unwrap();
    assert_eq!(out.stats.env_steps, 100);
    assert!((out.stats.train_seconds - 1.0).abs() < 1e-12);
}

#[test]
fn synchronous_runs_are_bit_identical() {
    let run = || {
        let dir = tempfile::tempdir().unwrap();
        let rd = RunDir::create(dir.path(), "abc").unwrap();
        let cfg = ActorLearnerConfig { segment_len: 4, ..ActorLearnerConfig::synchronous(11) };
        let out = run_actor_learner(&cfg, ppo_agent(3), |_| Corridor::new(8, 2), &tracker(Budget::Steps(400)), Some(&rd))
            .unwrap();
        rd.write_json("stats", &out.stats).unwrap();
        let stats = std::fs::read(dir.path().join("stats.json")).unwrap();
        let log = std::fs::read(dir.path().join("segments/actor-0.jsonl")).unwrap();
        (stats, log, out.agent.checkpoint())
    };
    let a = run();
    let b = run();
    assert!(a.0 == b.0 && a.1 == b.1 && a.2 == b.2);
    let lines = String::from_utf8(a.1).unwrap();
    assert_eq!(lines.lines().count(), 400);
    let first: serde_json::Value = serde_json::from_str(lines.lines().next().unwrap()).unwrap();
    assert_eq!(first["actor"], 0);
    assert!(first["behavior_log_prob"].as_f64().unwrap() <= 0.0);
}

#[test]
fn run_dir_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let rd = RunDir::create(dir.path().join("run"), "f00d").unwrap();
    assert_eq!(RunDir::open(rd.path()).unwrap().fingerprint().unwrap(), "f00d");
    rd.write_json("x", &vec![1, 2, 3]).unwrap();
    assert_eq!(rd.read_json::<Vec<i32>>("x").unwrap(), vec![1, 2, 3]);
    rd.write_checkpoint("final", "params").unwrap();
    assert!(dir.path().join("run/checkpoints/final.txt").is_file());
    assert!(RunDir::open(dir.path()).is_err());
}

fn seq_learner(seed: u64, capacity: usize, context: usize) -> MaentLearner<f32> {
    let mut cfg = SeqModelConfig::new(2, 4, 2, 4);
    cfg.width = 16;
    cfg.heads = 2;
    cfg.blocks = 1;
    cfg.ff_width = 16;
    cfg.return_bins = 8;
    cfg.context = context;
    let model = SequenceModel::new(cfg, &mut seeded(seed)).unwrap();
    let maent = MaentConfig {
        target: EntropyTarget::HalfLogActions,
        batch: 4,
        context,
        buffer_capacity: capacity,
        updates_between_rollouts: 5,
        ..Default::default()
    };
    MaentLearner::new(model, Box::new(DecayedAdam::new(1e-3, 0.0)), maent).unwrap()
}

fn quantizer() -> ReturnQuantizer {
    ReturnQuantizer::new(0.0, 8.0, 8).unwrap()
}

#[test]
fn finetune_with_no_iterations_leaves_model_unchanged() {
    let mut learner = seq_learner(1, 100, 2);
    let before = learner.model.params().flat_values();
    let cfg = FinetuneConfig { max_updates: Some(0), ..Default::default() };
    let stats = finetune_mgdt(&mut Corridor::new(8, 4), &mut learner, &quantizer(), &cfg, &tracker(Budget::Steps(1000)))
        .unwrap();
    assert_eq!(stats.updates, 0);
    assert_eq!(stats.env_steps, 0);
    assert_eq!(learner.model.params().flat_values(), before);
}

#[test]
fn finetune_rejects_action_mismatch() {
    let mut learner = seq_learner(1, 100, 2);
    let err = finetune_mgdt(
        &mut Corridor::new(8, 3),
        &mut learner,
        &quantizer(),
        &FinetuneConfig::default(),
        &tracker(Budget::Steps(100)),
    );
    assert!(matches!(err, Err(Error::Contract(_))));
}

#[test]
fn finetune_buffer_respects_capacity() {
    let mut learner = seq_learner(2, 3, 2);
    let cfg = FinetuneConfig { target_return: 8.0, seed: 5, ..Default::default() };
    let stats = finetune_mgdt(&mut Corridor::new(8, 4), &mut learner, &quantizer(), &cfg, &tracker(Budget::Episodes(10)))
        .unwrap();
    assert_eq!(stats.episodes, 10);
    assert_eq!(stats.rollouts, 10);
    assert_eq!(stats.max_buffer_len, 3);
    assert_eq!(stats.updates, 50);
    assert_eq!(learner.updates(), 50);
}

#[test]
fn finetune_fits_its_own_rollouts() {
    for seed in 0..3 {
        let mut learner = seq_learner(seed, 1, 4);
        learner.config.updates_between_rollouts = 300;
        learner.optimizer = Box::new(DecayedAdam::new(3e-3, 0.0));
        let cfg = FinetuneConfig { target_return: 8.0, seed, max_updates: Some(300), ..Default::default() };
        let stats =
            finetune_mgdt(&mut Corridor::new(8, 4), &mut learner, &quantizer(), &cfg, &tracker(Budget::Episodes(1)))
                .unwrap();
        assert_eq!(stats.updates, 300);
        let head: f64 = stats.nll[..20].iter().sum::<f64>() / 20.0;
        let tail: f64 = stats.nll[280..].iter().sum::<f64>() / 20.0;
        assert!(tail < 0.5 * head, "seed {seed}: nll {head} -> {tail}");
    }
}
