use gsea_core::learners::{DqnConfig, DqnLearner, PpoConfig, PpoLearner, TaskKind, VTraceLearner};
use gsea_core::nn::{Activation, DecayedAdam, Mlp, MlpSpec, Model, ParamSet, RmsProp};
use gsea_core::rng::{derive_seed, seeded};
use gsea_core::seq::{EntropyTarget, MaentConfig, MaentLearner, ReturnQuantizer, SeqModelConfig};
use gsea_core::{Encoding, Environment, Error, Real, Result, SequenceModel, VTraceConfig};
use gsea_runtime::{
    finetune_mgdt, run_actor_learner, ActorLearnerConfig, Agent, Budget, BudgetTracker, DqnAgent, FinetuneConfig,
    PpoAgent, ReplayBuffer, ReturnConditioned, RunDir, RunStats, VTraceAgent,
};

use crate::config::{AgentTag, EnvKind, ExperimentConfig, PdrRule};
use crate::tasks::{evaluate_behavior, evaluate_pdr, mlp_encoding, DynEnv, EvalMetrics};

/// A configured agent of any kind.
pub enum Trainee {
    VTrace(VTraceAgent<Mlp<Real>, Mlp<Real>>),
    Ppo(PpoAgent<Mlp<Real>, Mlp<Real>>),
    MgdtPpo(PpoAgent<SequenceModel, Mlp<Real>>),
    MgdtDqn(DqnAgent<SequenceModel>),
    Maent(Box<MaentLearner<Real>>, ReturnQuantizer),
    Pdr(PdrRule),
}

/// What a training phase did.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainSummary {
    pub updates: u64,
    pub episode_returns: Vec<f64>,
}

fn task_kind(kind: EnvKind) -> TaskKind {
    match kind {
        EnvKind::Blockmaze => TaskKind::Blockmaze,
        EnvKind::Pacgrid => TaskKind::PacGrid,
        EnvKind::Jssp => TaskKind::Jssp,
    }
}

fn mlp(input: usize, hidden: usize, output: usize, seed: u64) -> Result<Mlp<Real>> {
    Ok(Mlp::new(MlpSpec::new(vec![input, hidden, hidden, output], Activation::Tanh)?, &mut seeded(seed)))
}

/// Sequence model sized for `env`.
pub fn sequence_model(cfg: &ExperimentConfig, env: &dyn Environment, seed: u64) -> Result<SequenceModel> {
    let (rows, cols) = env.observation_shape();
    let a = &cfg.agent;
    let mut m = SeqModelConfig::new(rows, cols, a.seq_patches, env.action_count());
    m.cell_encoding = mlp_encoding(cfg.env.kind);
    m.width = a.seq_width;
    m.heads = a.seq_heads;
    m.blocks = a.seq_blocks;
    m.ff_width = a.seq_ff;
    m.context = a.seq_context;
    m.return_bins = a.return_bins;
    SequenceModel::new(m, &mut seeded(seed))
}

pub fn quantizer(cfg: &ExperimentConfig) -> Result<ReturnQuantizer> {
    ReturnQuantizer::new(cfg.agent.return_min, cfg.agent.return_max, cfg.agent.return_bins)
}

fn load_into<M: Model<Real>>(model: &mut M, params: &ParamSet<Real>) -> Result<()> {
    let ours = model.params();
    let same = ours.len() == params.len()
        && ours
            .tensors
            .iter()
            .zip(&params.tensors)
            .all(|(a, b)| a.value.rows() == b.value.rows() && a.value.cols() == b.value.cols());
    if !same {
        return Err(Error::Shape("checkpoint does not match the network".into()));
    }
    *model.params_mut() = ParamSet::new(params.tensors.iter().map(|t| t.value.clone()).collect());
    Ok(())
}

impl Trainee {
    /// Fresh agent for `env`. `decay_steps` is the DQN exploration horizon.
    pub fn build(tag: AgentTag, cfg: &ExperimentConfig, env: &dyn Environment, seed: u64, decay_steps: u64) -> Result<Self> {
        let a = &cfg.agent;
        let (rows, cols) = env.observation_shape();
        let actions = env.action_count();
        let enc = mlp_encoding(cfg.env.kind);
        let width = enc.width(rows * cols);
        let task = task_kind(cfg.env.kind);
        let rms = || -> Box<RmsProp<Real>> { Box::new(RmsProp::impala_defaults()) };
        let adam = || -> Box<DecayedAdam<Real>> { Box::new(DecayedAdam::mgdt_defaults()) };
        Ok(match tag {
            AgentTag::ImpalaVTrace => Trainee::VTrace(VTraceAgent {
                learner: VTraceLearner::new(
                    mlp(width, a.hidden, actions, derive_seed(seed, 1))?,
                    mlp(width, a.hidden, 1, derive_seed(seed, 2))?,
                    rms(),
                    rms(),
                    VTraceConfig::default(),
                    enc,
                )?,
                batch: a.batch,
            }),
            AgentTag::ImpalaPpo => Trainee::Ppo(PpoAgent {
                learner: PpoLearner::new(
                    mlp(width, a.hidden, actions, derive_seed(seed, 1))?,
                    mlp(width, a.hidden, 1, derive_seed(seed, 2))?,
                    rms(),
                    rms(),
                    PpoConfig::for_task(task),
                    enc,
                )?,
                batch: a.batch,
            }),
            AgentTag::MgdtPpo => Trainee::MgdtPpo(PpoAgent {
                learner: PpoLearner::new(
                    sequence_model(cfg, env, derive_seed(seed, 1))?,
                    mlp(rows * cols, a.hidden, 1, derive_seed(seed, 2))?,
                    adam(),
                    adam(),
                    PpoConfig::for_task(task),
                    Encoding::Raw,
                )?,
                batch: a.batch,
            }),
            AgentTag::MgdtDqn => {
                let config = DqnConfig { decay_horizon: decay_steps, ..DqnConfig::default() };
                let learner = DqnLearner::new(sequence_model(cfg, env, derive_seed(seed, 1))?, adam(), config, Encoding::Raw)?;
                Trainee::MgdtDqn(DqnAgent::new(learner, ReplayBuffer::<()>::DEFAULT_CAPACITY, a.dqn_train_every, derive_seed(seed, 3))?)
            }
            AgentTag::MgdtMaent => {
                let maent = MaentConfig {
                    target: EntropyTarget::HalfLogActions,
                    dual_lr: a.dual_lr,
                    context: a.seq_context,
                    ..MaentConfig::default()
                };
                let learner = MaentLearner::new(sequence_model(cfg, env, derive_seed(seed, 1))?, adam(), maent)?;
                Trainee::Maent(Box::new(learner), quantizer(cfg)?)
            }
            AgentTag::Pdr(rule) => Trainee::Pdr(rule),
        })
    }

    /// Trainable networks, in a fixed order.
    pub fn networks(&self) -> Vec<ParamSet<Real>> {
        match self {
            Trainee::VTrace(a) => vec![a.learner.policy.params().clone(), a.learner.value.params().clone()],
            Trainee::Ppo(a) => vec![a.learner.policy.params().clone(), a.learner.value.params().clone()],
            Trainee::MgdtPpo(a) => vec![a.learner.policy.params().clone(), a.learner.value.params().clone()],
            Trainee::MgdtDqn(a) => vec![a.learner.online.params().clone()],
            Trainee::Maent(l, _) => vec![l.model.params().clone()],
            Trainee::Pdr(_) => Vec::new(),
        }
    }

    /// Replaces the networks with `nets` (as returned by `networks`).
    pub fn load(&mut self, nets: &[ParamSet<Real>]) -> Result<()> {
        let want = self.networks().len();
        if nets.len() != want {
            return Err(Error::Shape(format!("expected {want} networks, got {}", nets.len())));
        }
        match self {
            Trainee::VTrace(a) => {
                load_into(&mut a.learner.policy, &nets[0])?;
                load_into(&mut a.learner.value, &nets[1])
            }
            Trainee::Ppo(a) => {
                load_into(&mut a.learner.policy, &nets[0])?;
                load_into(&mut a.learner.value, &nets[1])
            }
            Trainee::MgdtPpo(a) => {
                load_into(&mut a.learner.policy, &nets[0])?;
                load_into(&mut a.learner.value, &nets[1])
            }
            Trainee::MgdtDqn(a) => {
                load_into(&mut a.learner.online, &nets[0])?;
                a.learner.sync_target();
                Ok(())
            }
            Trainee::Maent(l, _) => load_into(&mut l.model, &nets[0]),
            Trainee::Pdr(_) => Ok(()),
        }
    }

    /// Trains until `budget` is spent. On a learner failure the error is
    /// returned along with what was done before it.
    pub fn train<F>(
        &mut self,
        cfg: &ExperimentConfig,
        budget: &BudgetTracker,
        make_env: F,
        seed: u64,
        run_dir: Option<&RunDir>,
    ) -> (TrainSummary, Option<Error>)
    where
        F: Fn(usize) -> DynEnv + Sync,
    {
        let a = &cfg.agent;
        let al = ActorLearnerConfig {
            actors: a.actors,
            segment_len: a.segment_len,
            queue_capacity: a.queue_capacity,
            seed,
            synchronous: a.synchronous,
        };
        fn summary<A>(out: Result<gsea_runtime::RunOutcome<A>>) -> (TrainSummary, Option<Error>) {
            match out {
                Ok(o) => {
                    let RunStats { updates, episode_returns, .. } = o.stats;
                    (TrainSummary { updates, episode_returns }, o.failure)
                }
                Err(e) => (TrainSummary::default(), Some(e)),
            }
        }
        match self {
            Trainee::VTrace(agent) => summary(run_actor_learner(&al, agent, &make_env, budget, run_dir)),
            Trainee::Ppo(agent) => summary(run_actor_learner(&al, agent, &make_env, budget, run_dir)),
            Trainee::MgdtPpo(agent) => summary(run_actor_learner(&al, agent, &make_env, budget, run_dir)),
            Trainee::MgdtDqn(agent) => summary(run_actor_learner(&al, agent, &make_env, budget, run_dir)),
            Trainee::Maent(learner, q) => {
                let ft = FinetuneConfig {
                    max_updates: None,
                    episodes_per_rollout: 1,
                    target_return: a.target_return,
                    temperature: a.temperature,
                    seed,
                };
                let mut env = make_env(0);
                match finetune_mgdt(&mut env, learner, q, &ft, budget) {
                    Ok(s) => (TrainSummary { updates: s.updates, episode_returns: s.episode_returns }, None),
                    Err(e) => (TrainSummary { updates: learner.updates(), ..Default::default() }, Some(e)),
                }
            }
            Trainee::Pdr(_) => (TrainSummary::default(), None),
        }
    }

    pub fn evaluate(&self, cfg: &ExperimentConfig, seed: u64) -> Result<EvalMetrics> {
        match self {
            Trainee::VTrace(a) => evaluate_behavior(cfg, a.eval_behavior(), seed),
            Trainee::Ppo(a) => evaluate_behavior(cfg, a.eval_behavior(), seed),
            Trainee::MgdtPpo(a) => evaluate_behavior(cfg, a.eval_behavior(), seed),
            Trainee::MgdtDqn(a) => evaluate_behavior(cfg, a.eval_behavior(), seed),
            Trainee::Maent(l, q) => {
                let b = ReturnConditioned::new(l.model.clone(), *q, cfg.agent.target_return, cfg.agent.temperature);
                evaluate_behavior(cfg, b, seed)
            }
            Trainee::Pdr(rule) => evaluate_pdr(cfg, *rule),
        }
    }
}

/// Exploration horizon for DQN: the fine-tuning allowance in steps when
/// it is step-denominated.
pub fn dqn_horizon(cfg: &ExperimentConfig, finetune: Budget) -> u64 {
    if cfg.agent.dqn_decay_steps > 0 {
        return cfg.agent.dqn_decay_steps;
    }
    match finetune {
        Budget::Steps(n) if n > 0 => n,
        _ => DqnConfig::<Real>::default().decay_horizon,
    }
}
