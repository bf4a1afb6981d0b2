use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use gsea_core::nn::{params_from_str, params_to_string, ParamSet};
use gsea_core::rng::derive_seed;
use gsea_core::{Error, Real, Result};
use gsea_runtime::{Budget, BudgetTracker, BudgetUsage, ClockKind, RunDir};
use rayon::prelude::*;

use crate::config::{AgentTag, BudgetTag, ExperimentConfig};
use crate::record::{FinetuneRecord, RunRecord};
use crate::report::{write_report, ReportTable};
use crate::tasks::{family_env, target_env, DynEnv};
use crate::trainee::{dqn_horizon, Trainee};

fn io(e: std::io::Error) -> Error {
    Error::State(format!("i/o: {e}"))
}

/// Results of an experiment. Failed grid points are listed; everything
/// that completed is persisted.
pub struct ExperimentOutcome {
    pub records: Vec<RunRecord>,
    pub table: ReportTable,
    pub failures: Vec<(String, Error)>,
}

fn agent_index(tag: AgentTag) -> u64 {
    AgentTag::LEARNED.iter().position(|&t| t == tag).map_or(99, |i| i as u64)
}

fn pretrained_dir(out: &Path, tag: AgentTag, seed: u64) -> PathBuf {
    out.join("pretrained").join(format!("{}-s{seed}", tag.name().to_lowercase()))
}

fn save_networks(dir: &Path, nets: &[ParamSet<Real>]) -> Result<()> {
    fs::create_dir_all(dir).map_err(io)?;
    for (i, p) in nets.iter().enumerate() {
        fs::write(dir.join(format!("net-{i}.txt")), params_to_string(p)).map_err(io)?;
    }
    Ok(())
}

fn load_networks(dir: &Path, count: usize) -> Result<Vec<ParamSet<Real>>> {
    (0..count)
        .map(|i| params_from_str(&fs::read_to_string(dir.join(format!("net-{i}.txt"))).map_err(io)?))
        .collect()
}

/// Networks to start fine-tuning from: loaded from `out/pretrained` when
/// present, otherwise trained on the environment family (or fresh when no
/// pre-training budget is configured).
pub fn pretrain(cfg: &ExperimentConfig, tag: AgentTag, seed: u64, out: &Path) -> Result<Vec<ParamSet<Real>>> {
    let probe = target_env(cfg)?;
    let init = derive_seed(seed, 1 + agent_index(tag));
    let mut trainee = Trainee::build(tag, cfg, probe.as_ref(), init, dqn_horizon(cfg, Budget::Steps(cfg.agent.pretrain_steps)))?;
    let dir = pretrained_dir(out, tag, seed);
    if dir.join("net-0.txt").is_file() {
        let nets = load_networks(&dir, trainee.networks().len())?;
        trainee.load(&nets)?;
        return Ok(nets);
    }
    if cfg.agent.pretrain_steps > 0 && tag.trains() {
        let budget = BudgetTracker::new(Budget::Steps(cfg.agent.pretrain_steps), ClockKind::Wall)?;
        let member = |i: usize| family_env(cfg, i as u64).expect("family parameters validated");
        family_env(cfg, 0)?;
        let (_, failure) = trainee.train(cfg, &budget, member, derive_seed(seed, 0x9e7), None);
        if let Some(e) = failure {
            return Err(e);
        }
        save_networks(&dir, &trainee.networks())?;
    }
    Ok(trainee.networks())
}

/// A fine-tuned agent and its partially filled record.
pub struct Finetuned {
    pub trainee: Trainee,
    pub record: RunRecord,
    pub dir: RunDir,
}

/// Fine-tunes from `nets` for `budget_tag` and checkpoints the result.
/// A training failure persists the partial record and returns the error.
pub fn finetune_point(
    cfg: &ExperimentConfig,
    tag: AgentTag,
    budget_tag: BudgetTag,
    seed: u64,
    nets: &[ParamSet<Real>],
    out: &Path,
) -> Result<Finetuned> {
    let run_id = RunRecord::run_id(tag, budget_tag, seed);
    let dir = RunDir::create(out.join("runs").join(&run_id), &cfg.fingerprint())?;
    let allowance = cfg.budget.specialist.scaled(budget_tag.fraction());
    let probe = target_env(cfg)?;
    let init = derive_seed(seed, 1 + agent_index(tag));
    let mut trainee = Trainee::build(tag, cfg, probe.as_ref(), init, dqn_horizon(cfg, allowance))?;
    trainee.load(nets)?;
    let mut record = RunRecord {
        run_id,
        fingerprint: cfg.fingerprint(),
        config: cfg.canonical(),
        env: cfg.env.kind,
        agent: tag,
        budget: budget_tag,
        seed,
        finetune: None,
        episode_returns: Vec::new(),
        bug_census: None,
        gate_census: None,
        makespans: None,
        train_seconds: 0.0,
        test_seconds: 0.0,
        failure: None,
    };
    let mut finetune = FinetuneRecord {
        budget: allowance,
        usage: BudgetUsage { steps: 0, episodes: 0, seconds: 0.0 },
        updates: 0,
        episode_returns: Vec::new(),
    };
    if !allowance.is_zero() && tag.trains() {
        // Environments are built before the clock starts.
        let slots: Vec<Mutex<Option<DynEnv>>> = (0..cfg.agent.actors)
            .map(|_| target_env(cfg).map(|e| Mutex::new(Some(e))))
            .collect::<Result<_>>()?;
        let make_env = |i: usize| {
            slots[i].lock().expect("env slot").take().unwrap_or_else(|| target_env(cfg).expect("validated"))
        };
        let mut budget = BudgetTracker::new(allowance, cfg.budget.clock)?;
        budget.restart_clock();
        let logs = if cfg.run.segment_logs { Some(&dir) } else { None };
        let (summary, failure) = trainee.train(cfg, &budget, make_env, derive_seed(seed, 0xf1e), logs);
        finetune.usage = budget.usage();
        finetune.updates = summary.updates;
        finetune.episode_returns = summary.episode_returns;
        record.train_seconds = finetune.usage.seconds;
        if let Some(e) = failure {
            record.failure = Some(e.to_string());
            record.finetune = Some(finetune);
            dir.write_json("record", &record)?;
            return Err(e);
        }
    }
    record.finetune = Some(finetune);
    for (i, net) in trainee.networks().iter().enumerate() {
        dir.write_checkpoint(&format!("net-{i}"), &params_to_string(net))?;
    }
    Ok(Finetuned { trainee, record, dir })
}

/// One grid point: fine-tune, evaluate, persist the record.
pub fn run_point(
    cfg: &ExperimentConfig,
    tag: AgentTag,
    budget_tag: BudgetTag,
    seed: u64,
    nets: &[ParamSet<Real>],
    out: &Path,
) -> Result<RunRecord> {
    let Finetuned { trainee, mut record, dir } = finetune_point(cfg, tag, budget_tag, seed, nets, out)?;
    let metrics = trainee.evaluate(cfg, derive_seed(cfg.eval.seed, seed))?;
    record.episode_returns = metrics.episode_returns;
    record.bug_census = metrics.bug_census;
    record.gate_census = metrics.gate_census;
    record.makespans = metrics.makespans;
    record.test_seconds = metrics.seconds;
    dir.write_json("record", &record)?;
    Ok(record)
}

/// The full protocol: for each agent and seed, pre-train (optionally),
/// then fine-tune for every budget and evaluate; then write the report.
pub fn run_experiment(cfg: &ExperimentConfig, out: &Path) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    fs::create_dir_all(out).map_err(io)?;
    fs::write(out.join("config.txt"), cfg.canonical()).map_err(io)?;
    fs::write(out.join("fingerprint"), cfg.fingerprint() + "\n").map_err(io)?;
    let mut points = Vec::new();
    for &tag in &cfg.agent.tags {
        for seed in cfg.run_seeds() {
            points.push((tag, seed));
        }
    }
    let run = |&(tag, seed): &(AgentTag, u64)| -> Vec<(String, Result<RunRecord>)> {
        let nets = match pretrain(cfg, tag, seed, out) {
            Ok(n) => n,
            Err(e) => {
                return cfg
                    .budget
                    .tags
                    .iter()
                    .map(|&b| (RunRecord::run_id(tag, b, seed), Err(e.clone())))
                    .collect()
            }
        };
        cfg.budget
            .tags
            .iter()
            .map(|&b| (RunRecord::run_id(tag, b, seed), run_point(cfg, tag, b, seed, &nets, out)))
            .collect()
    };
    let results: Vec<_> = if cfg.run.parallel {
        points.par_iter().flat_map_iter(run).collect()
    } else {
        points.iter().flat_map(run).collect()
    };
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for (id, r) in results {
        match r {
            Ok(rec) => records.push(rec),
            Err(e) => failures.push((id, e)),
        }
    }
    records.sort_by(|a, b| a.run_id.cmp(&b.run_id));
    let table = write_report(&out.join("report"), &records)?;
    Ok(ExperimentOutcome { records, table, failures })
}

/// Every completed record under `out/runs`, sorted by run id.
pub fn load_records(out: &Path) -> Result<Vec<RunRecord>> {
    let runs = out.join("runs");
    let mut records = Vec::new();
    if !runs.is_dir() {
        return Ok(records);
    }
    for entry in fs::read_dir(&runs).map_err(io)? {
        let path = entry.map_err(io)?.path();
        if path.join("record.json").is_file() {
            let rec: RunRecord = RunDir::open(&path)?.read_json("record")?;
            if rec.failure.is_none() {
                records.push(rec);
            }
        }
    }
    records.sort_by(|a, b| a.run_id.cmp(&b.run_id));
    Ok(records)
}
