use std::sync::Arc;

use gsea_core::rng::derive_seed;
use gsea_core::{Encoding, Environment, Result};
use gsea_envs::blockmaze::{self, inject_bugs, Blockmaze, BugCounts, MazeLayout, MazeRules, MazeSpec};
use gsea_envs::jssp::{classic_pdr, InstanceSource, JsspEnv, JsspInstance, Pdr};
use gsea_envs::pacgrid::{self, PacGrid, PacGridSpec, PacRules};
use gsea_envs::Census;
use gsea_runtime::{evaluate, Behavior, Budget, ClockKind};

use crate::config::{EnvKind, ExperimentConfig, MazeVariant, PdrRule};
use crate::record::CensusSummary;

pub type DynEnv = Box<dyn Environment>;

/// Block density of generated pre-training mazes.
const FAMILY_DENSITY: f64 = 0.3;

/// The environment agents are fine-tuned and evaluated on.
pub fn target_env(cfg: &ExperimentConfig) -> Result<DynEnv> {
    let e = &cfg.env;
    Ok(match e.kind {
        EnvKind::Blockmaze => {
            let spec = match e.maze {
                MazeVariant::Standard => MazeSpec::standard(e.seed),
                MazeVariant::Small => MazeSpec::small(e.seed),
            };
            Box::new(Blockmaze::new(spec, MazeRules::default())?)
        }
        EnvKind::Pacgrid => Box::new(PacGrid::new(PacGridSpec::standard(e.seed), PacRules::default())?),
        EnvKind::Jssp => {
            let source = if e.fresh_instances {
                InstanceSource::Generated {
                    jobs: e.jobs,
                    machines: e.machines,
                    low: e.duration_low,
                    high: e.duration_high,
                    seed: e.seed,
                }
            } else {
                InstanceSource::Fixed(Arc::new(training_instance(cfg)?))
            };
            Box::new(JsspEnv::new(source)?)
        }
    })
}

/// The single scheduling instance used when instances are not refreshed.
pub fn training_instance(cfg: &ExperimentConfig) -> Result<JsspInstance> {
    let e = &cfg.env;
    JsspInstance::generate(e.jobs, e.machines, e.duration_low, e.duration_high, e.seed)
}

/// Member `member` of the pre-training family: same observation shape and
/// action set as the target, different layout, ghosts or instances.
pub fn family_env(cfg: &ExperimentConfig, member: u64) -> Result<DynEnv> {
    let e = &cfg.env;
    let seed = derive_seed(e.seed ^ 0x5eed_f00d, member);
    Ok(match e.kind {
        EnvKind::Blockmaze => {
            let (rows, cols, counts) = match e.maze {
                MazeVariant::Standard => (20, 20, BugCounts::STANDARD),
                MazeVariant::Small => (10, 10, BugCounts::SMALL),
            };
            let layout = MazeLayout::generate(rows, cols, FAMILY_DENSITY, seed)?;
            Box::new(Blockmaze::new(inject_bugs(&layout, counts, seed)?, MazeRules::default())?)
        }
        EnvKind::Pacgrid => Box::new(PacGrid::new(PacGridSpec::standard(seed), PacRules::default())?),
        EnvKind::Jssp => Box::new(JsspEnv::new(InstanceSource::Generated {
            jobs: e.jobs,
            machines: e.machines,
            low: e.duration_low,
            high: e.duration_high,
            seed,
        })?),
    })
}

/// Cell encoding for fully connected networks.
pub fn mlp_encoding(kind: EnvKind) -> Encoding {
    match kind {
        EnvKind::Blockmaze => Encoding::OneHot(blockmaze::CODES.to_vec()),
        EnvKind::Pacgrid => Encoding::OneHot(pacgrid::CODES.to_vec()),
        EnvKind::Jssp => Encoding::Raw,
    }
}

/// Scheduling evaluation instances, drawn from the evaluation seed stream.
pub fn eval_instances(cfg: &ExperimentConfig) -> Result<Vec<JsspInstance>> {
    let e = &cfg.env;
    (0..cfg.eval.instances as u64)
        .map(|i| JsspInstance::generate(e.jobs, e.machines, e.duration_low, e.duration_high, derive_seed(cfg.eval.seed, i)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EvalMetrics {
    pub episode_returns: Vec<f64>,
    pub bug_census: Option<CensusSummary>,
    pub gate_census: Option<CensusSummary>,
    pub makespans: Option<Vec<i64>>,
    pub seconds: f64,
}

/// Evaluation time under the configured clock.
fn clocked(cfg: &ExperimentConfig, wall: f64, steps: u64) -> f64 {
    match cfg.budget.clock {
        ClockKind::Wall => wall,
        ClockKind::Logical { seconds_per_step } => steps as f64 * seconds_per_step,
    }
}

/// Evaluates `behavior` under the environment's protocol.
pub fn evaluate_behavior<B: Behavior>(cfg: &ExperimentConfig, behavior: B, seed: u64) -> Result<EvalMetrics> {
    let kind = cfg.env.kind;
    if kind == EnvKind::Jssp {
        let mut m = EvalMetrics { makespans: Some(Vec::new()), ..Default::default() };
        for (i, inst) in eval_instances(cfg)?.into_iter().enumerate() {
            let mut env = JsspEnv::new(InstanceSource::Fixed(Arc::new(inst)))?;
            let out = evaluate(&mut env, behavior.clone(), Budget::Episodes(1), derive_seed(seed, i as u64))?;
            let result = env.state().result()?;
            result.verify(env.state().instance())?;
            m.episode_returns.extend(out.episodes.iter().map(|e| e.episode_return));
            m.makespans.as_mut().expect("set above").push(result.makespan);
            m.seconds += clocked(cfg, out.seconds, out.steps);
        }
        return Ok(m);
    }
    let out = evaluate(target_env(cfg)?, behavior, cfg.eval_allowance(), seed)?;
    let mut census = Census::new();
    for ep in &out.episodes {
        census.record_all(&ep.events);
        census.end_episode();
    }
    let complete: Vec<f64> = out.episodes.iter().filter(|e| e.complete).map(|e| e.episode_return).collect();
    let episode_returns = if complete.is_empty() {
        out.episodes.iter().map(|e| e.episode_return).collect()
    } else {
        complete
    };
    let mut m = EvalMetrics { episode_returns, seconds: clocked(cfg, out.seconds, out.steps), ..Default::default() };
    match kind {
        EnvKind::Blockmaze => m.bug_census = Some(CensusSummary::from_census(&census, [1, 2])),
        _ => m.gate_census = Some(CensusSummary::from_census(&census, 1..=4)),
    }
    Ok(m)
}

pub fn pdr(rule: PdrRule) -> Pdr {
    match rule {
        PdrRule::Spt => Pdr::Spt,
        PdrRule::Lpt => Pdr::Lpt,
        PdrRule::Mwr => Pdr::Mwr,
        PdrRule::Fifo => Pdr::Fifo,
    }
}

/// Dispatching-rule baseline on the evaluation instances.
pub fn evaluate_pdr(cfg: &ExperimentConfig, rule: PdrRule) -> Result<EvalMetrics> {
    let start = std::time::Instant::now();
    let mut m = EvalMetrics { makespans: Some(Vec::new()), ..Default::default() };
    let mut steps = 0;
    for inst in eval_instances(cfg)? {
        steps += inst.op_count() as u64;
        let result = classic_pdr(&inst, pdr(rule));
        m.episode_returns.push((inst.longest_job() - result.makespan) as f64);
        m.makespans.as_mut().expect("set above").push(result.makespan);
    }
    m.seconds = clocked(cfg, start.elapsed().as_secs_f64(), steps);
    Ok(m)
}
