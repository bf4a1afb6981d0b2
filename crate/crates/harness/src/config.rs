use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use gsea_core::{Error, Result};
use gsea_runtime::{Budget, ClockKind};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvKind {
    Blockmaze,
    Pacgrid,
    Jssp,
}

impl EnvKind {
    pub fn name(self) -> &'static str {
        match self {
            EnvKind::Blockmaze => "blockmaze",
            EnvKind::Pacgrid => "pacgrid",
            EnvKind::Jssp => "jssp",
        }
    }
}

impl FromStr for EnvKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "blockmaze" => Ok(EnvKind::Blockmaze),
            "pacgrid" => Ok(EnvKind::Pacgrid),
            "jssp" => Ok(EnvKind::Jssp),
            _ => Err(Error::Config(format!("unknown environment `{s}`"))),
        }
    }
}

impl fmt::Display for EnvKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Agent configurations compared by an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum AgentTag {
    ImpalaVTrace,
    ImpalaPpo,
    MgdtDqn,
    MgdtPpo,
    MgdtMaent,
    /// Untrained dispatching-rule baseline (scheduling only).
    Pdr(PdrRule),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PdrRule {
    Spt,
    Lpt,
    Mwr,
    Fifo,
}

impl AgentTag {
    pub const LEARNED: [AgentTag; 5] = [
        AgentTag::ImpalaVTrace,
        AgentTag::ImpalaPpo,
        AgentTag::MgdtDqn,
        AgentTag::MgdtPpo,
        AgentTag::MgdtMaent,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AgentTag::ImpalaVTrace => "IMPALA-V_TRACE",
            AgentTag::ImpalaPpo => "IMPALA-PPO",
            AgentTag::MgdtDqn => "MGDT-DQN",
            AgentTag::MgdtPpo => "MGDT-PPO",
            AgentTag::MgdtMaent => "MGDT-MAENT",
            AgentTag::Pdr(PdrRule::Spt) => "PDR-SPT",
            AgentTag::Pdr(PdrRule::Lpt) => "PDR-LPT",
            AgentTag::Pdr(PdrRule::Mwr) => "PDR-MWR",
            AgentTag::Pdr(PdrRule::Fifo) => "PDR-FIFO",
        }
    }

    pub fn trains(self) -> bool {
        !matches!(self, AgentTag::Pdr(_))
    }
}

impl FromStr for AgentTag {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "IMPALA-V_TRACE" => AgentTag::ImpalaVTrace,
            "IMPALA-PPO" => AgentTag::ImpalaPpo,
            "MGDT-DQN" => AgentTag::MgdtDqn,
            "MGDT-PPO" => AgentTag::MgdtPpo,
            "MGDT-MAENT" => AgentTag::MgdtMaent,
            "PDR-SPT" => AgentTag::Pdr(PdrRule::Spt),
            "PDR-LPT" => AgentTag::Pdr(PdrRule::Lpt),
            "PDR-MWR" => AgentTag::Pdr(PdrRule::Mwr),
            "PDR-FIFO" => AgentTag::Pdr(PdrRule::Fifo),
            _ => return Err(Error::Config(format!("unknown agent tag `{s}`"))),
        })
    }
}

impl fmt::Display for AgentTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl From<AgentTag> for String {
    fn from(t: AgentTag) -> String {
        t.name().to_string()
    }
}

impl TryFrom<String> for AgentTag {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

/// Fine-tuning allowance as a share of the specialist budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum BudgetTag {
    ZeroShot,
    OnePct,
    TwoPct,
    Custom(f64),
}

impl BudgetTag {
    pub fn fraction(self) -> f64 {
        match self {
            BudgetTag::ZeroShot => 0.0,
            BudgetTag::OnePct => 0.01,
            BudgetTag::TwoPct => 0.02,
            BudgetTag::Custom(f) => f,
        }
    }

    /// Sort key: the named budgets first, in increasing size.
    pub fn rank(self) -> (u8, u64) {
        match self {
            BudgetTag::ZeroShot => (0, 0),
            BudgetTag::OnePct => (1, 0),
            BudgetTag::TwoPct => (2, 0),
            BudgetTag::Custom(f) => (3, f.to_bits()),
        }
    }
}

impl fmt::Display for BudgetTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BudgetTag::ZeroShot => f.write_str("zero_shot"),
            BudgetTag::OnePct => f.write_str("one_pct"),
            BudgetTag::TwoPct => f.write_str("two_pct"),
            BudgetTag::Custom(x) => write!(f, "custom:{x}"),
        }
    }
}

impl FromStr for BudgetTag {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zero_shot" => Ok(BudgetTag::ZeroShot),
            "one_pct" => Ok(BudgetTag::OnePct),
            "two_pct" => Ok(BudgetTag::TwoPct),
            _ => {
                let f = s
                    .strip_prefix("custom:")
                    .and_then(|v| v.parse::<f64>().ok())
                    .filter(|f| (0.0..=1.0).contains(f))
                    .ok_or_else(|| Error::Config(format!("unknown budget tag `{s}`")))?;
                Ok(BudgetTag::Custom(f))
            }
        }
    }
}

impl From<BudgetTag> for String {
    fn from(t: BudgetTag) -> String {
        t.to_string()
    }
}

impl TryFrom<String> for BudgetTag {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MazeVariant {
    Standard,
    Small,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvConfig {
    pub kind: EnvKind,
    /// Bug placement (Blockmaze), ghost policy (Pac-grid) or instance
    /// generator (scheduling) seed.
    pub seed: u64,
    pub maze: MazeVariant,
    pub jobs: usize,
    pub machines: usize,
    pub duration_low: i64,
    pub duration_high: i64,
    /// Train on a fresh scheduling instance every episode.
    pub fresh_instances: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentConfig {
    pub tags: Vec<AgentTag>,
    pub actors: usize,
    pub segment_len: usize,
    pub queue_capacity: usize,
    /// Segments per V-trace or PPO update.
    pub batch: usize,
    pub hidden: usize,
    pub synchronous: bool,
    /// Pre-training budget in environment steps on the environment family.
    pub pretrain_steps: u64,
    pub seq_width: usize,
    pub seq_heads: usize,
    pub seq_blocks: usize,
    pub seq_ff: usize,
    pub seq_context: usize,
    pub seq_patches: usize,
    pub return_bins: usize,
    pub return_min: f64,
    pub return_max: f64,
    pub target_return: f64,
    pub temperature: f64,
    pub dual_lr: f64,
    pub dqn_train_every: usize,
    pub dqn_decay_steps: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BudgetConfig {
    /// The specialist's full training budget.
    pub specialist: Budget,
    pub tags: Vec<BudgetTag>,
    pub clock: ClockKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub scale: f64,
    pub runs: usize,
    pub instances: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub segment_logs: bool,
    pub parallel: bool,
}

/// Everything an experiment depends on. Parsed from flat `key = value`
/// text; `#` starts a comment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub env: EnvConfig,
    pub agent: AgentConfig,
    pub budget: BudgetConfig,
    pub eval: EvalConfig,
    pub run: RunConfig,
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("bad value `{value}` for {key}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(Error::Config(format!("bad value `{value}` for {key}; expected true or false"))),
    }
}

fn list<T: FromStr<Err = Error>>(value: &str) -> Result<Vec<T>> {
    value.split(',').map(|s| s.trim()).filter(|s| !s.is_empty()).map(str::parse).collect()
}

fn join<T: fmt::Display>(items: &[T]) -> String {
    items.iter().map(|t| t.to_string()).collect::<Vec<_>>().join(",")
}

impl ExperimentConfig {
    /// Defaults for one environment.
    pub fn defaults(kind: EnvKind) -> Self {
        let (specialist, clock, patches, return_min, return_max, target_return) = match kind {
            EnvKind::Blockmaze => (Budget::Seconds(43_200.0), ClockKind::Wall, 16, -400.0, 100.0, 60.0),
            EnvKind::Pacgrid => (Budget::Episodes(1000), ClockKind::Wall, 7, 0.0, 400.0, 300.0),
            EnvKind::Jssp => (Budget::Steps(36_000), ClockKind::Wall, 6, -3564.0, 0.0, 0.0),
        };
        Self {
            env: EnvConfig {
                kind,
                seed: 0,
                maze: MazeVariant::Standard,
                jobs: 6,
                machines: 6,
                duration_low: 1,
                duration_high: 99,
                fresh_instances: true,
            },
            agent: AgentConfig {
                tags: AgentTag::LEARNED.to_vec(),
                actors: 4,
                segment_len: 20,
                queue_capacity: 64,
                batch: 32,
                hidden: 64,
                synchronous: false,
                pretrain_steps: 0,
                seq_width: 64,
                seq_heads: 4,
                seq_blocks: 2,
                seq_ff: 128,
                seq_context: 4,
                seq_patches: patches,
                return_bins: 64,
                return_min,
                return_max,
                target_return,
                temperature: 1.0,
                dual_lr: 1e-3,
                dqn_train_every: 1,
                dqn_decay_steps: 0,
            },
            budget: BudgetConfig {
                specialist,
                tags: vec![BudgetTag::ZeroShot, BudgetTag::OnePct, BudgetTag::TwoPct],
                clock,
            },
            eval: EvalConfig {
                scale: 1.0,
                runs: 5,
                instances: 100,
                seed: 1_000,
            },
            run: RunConfig {
                seed: 0,
                segment_logs: false,
                parallel: true,
            },
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        let mut seen = BTreeSet::new();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", no + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            if !seen.insert(k.to_string()) {
                return Err(Error::Config(format!("line {}: duplicate key {k}", no + 1)));
            }
            pairs.push((k.to_string(), v.to_string()));
        }
        let kind = match pairs.iter().find(|(k, _)| k == "env.kind") {
            Some((_, v)) => v.parse()?,
            None => EnvKind::Jssp,
        };
        // Keys that others depend on are applied first.
        pairs.sort_by_key(|(k, _)| (!matches!(k.as_str(), "env.kind" | "env.maze" | "budget.kind"), k.clone()));
        let mut cfg = Self::defaults(kind);
        let kind_changes_patches = !pairs.iter().any(|(k, _)| k == "agent.seq_patches");
        for (k, v) in &pairs {
            cfg.set(k, v)?;
        }
        if kind_changes_patches && kind == EnvKind::Blockmaze && cfg.env.maze == MazeVariant::Small {
            cfg.agent.seq_patches = 4;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Sets one key. Unknown keys and malformed values are errors.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let (e, a, b, ev, r) = (&mut self.env, &mut self.agent, &mut self.budget, &mut self.eval, &mut self.run);
        match key {
            "env.kind" => {
                let kind: EnvKind = value.parse()?;
                if kind != e.kind {
                    return Err(Error::Config("env.kind cannot change after defaults are chosen".into()));
                }
            }
            "env.seed" => e.seed = parse(key, value)?,
            "env.maze" => {
                e.maze = match value {
                    "standard" => MazeVariant::Standard,
                    "small" => MazeVariant::Small,
                    _ => return Err(Error::Config(format!("bad value `{value}` for {key}"))),
                }
            }
            "env.jobs" => e.jobs = parse(key, value)?,
            "env.machines" => e.machines = parse(key, value)?,
            "env.duration_low" => e.duration_low = parse(key, value)?,
            "env.duration_high" => e.duration_high = parse(key, value)?,
            "env.fresh_instances" => e.fresh_instances = parse_bool(key, value)?,
            "agent.tags" => a.tags = list(value)?,
            "agent.actors" => a.actors = parse(key, value)?,
            "agent.segment_len" => a.segment_len = parse(key, value)?,
            "agent.queue_capacity" => a.queue_capacity = parse(key, value)?,
            "agent.batch" => a.batch = parse(key, value)?,
            "agent.hidden" => a.hidden = parse(key, value)?,
            "agent.synchronous" => a.synchronous = parse_bool(key, value)?,
            "agent.pretrain_steps" => a.pretrain_steps = parse(key, value)?,
            "agent.seq_width" => a.seq_width = parse(key, value)?,
            "agent.seq_heads" => a.seq_heads = parse(key, value)?,
            "agent.seq_blocks" => a.seq_blocks = parse(key, value)?,
            "agent.seq_ff" => a.seq_ff = parse(key, value)?,
            "agent.seq_context" => a.seq_context = parse(key, value)?,
            "agent.seq_patches" => a.seq_patches = parse(key, value)?,
            "agent.return_bins" => a.return_bins = parse(key, value)?,
            "agent.return_min" => a.return_min = parse(key, value)?,
            "agent.return_max" => a.return_max = parse(key, value)?,
            "agent.target_return" => a.target_return = parse(key, value)?,
            "agent.temperature" => a.temperature = parse(key, value)?,
            "agent.dual_lr" => a.dual_lr = parse(key, value)?,
            "agent.dqn_train_every" => a.dqn_train_every = parse(key, value)?,
            "agent.dqn_decay_steps" => a.dqn_decay_steps = parse(key, value)?,
            "budget.kind" | "budget.amount" => {
                let (kind, amount) = budget_parts(b.specialist);
                let (kind, amount) = if key == "budget.kind" {
                    (value.to_string(), amount)
                } else {
                    (kind.to_string(), value.to_string())
                };
                b.specialist = make_budget(&kind, &amount)?;
            }
            "budget.tags" => b.tags = list(value)?,
            "budget.clock" => {
                b.clock = match value {
                    "wall" => ClockKind::Wall,
                    "logical" => ClockKind::Logical { seconds_per_step: 0.01 },
                    _ => return Err(Error::Config(format!("bad value `{value}` for {key}"))),
                }
            }
            "budget.seconds_per_step" => match &mut b.clock {
                ClockKind::Logical { seconds_per_step } => *seconds_per_step = parse(key, value)?,
                ClockKind::Wall => {
                    return Err(Error::Config("budget.seconds_per_step needs budget.clock = logical".into()))
                }
            },
            "eval.scale" => ev.scale = parse(key, value)?,
            "eval.runs" => ev.runs = parse(key, value)?,
            "eval.instances" => ev.instances = parse(key, value)?,
            "eval.seed" => ev.seed = parse(key, value)?,
            "run.seed" => r.seed = parse(key, value)?,
            "run.segment_logs" => r.segment_logs = parse_bool(key, value)?,
            "run.parallel" => r.parallel = parse_bool(key, value)?,
            _ => return Err(Error::Config(format!("unknown key {key}"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let (e, a) = (&self.env, &self.agent);
        if e.jobs == 0 || e.machines == 0 || e.duration_low < 1 || e.duration_low > e.duration_high {
            return Err(Error::Config("scheduling sizes and durations must be positive and ordered".into()));
        }
        if a.tags.is_empty() {
            return Err(Error::Config("agent.tags is empty".into()));
        }
        if e.kind != EnvKind::Jssp && a.tags.iter().any(|t| !t.trains()) {
            return Err(Error::Config("dispatching-rule baselines apply to scheduling only".into()));
        }
        if a.actors == 0 || a.segment_len == 0 || a.queue_capacity == 0 || a.batch == 0 || a.hidden == 0 {
            return Err(Error::Config("agent sizes must be positive".into()));
        }
        if a.synchronous && a.actors != 1 {
            return Err(Error::Config("agent.synchronous needs agent.actors = 1".into()));
        }
        if !(a.return_min < a.return_max) || a.return_bins < 2 {
            return Err(Error::Config("return range must be increasing with at least two bins".into()));
        }
        if !(a.temperature >= 0.0) || !(a.dual_lr >= 0.0) || a.dqn_train_every == 0 {
            return Err(Error::Config("temperature and dual step must be non-negative".into()));
        }
        if self.budget.tags.is_empty() {
            return Err(Error::Config("budget.tags is empty".into()));
        }
        self.budget.specialist.validate()?;
        if !(self.eval.scale > 0.0 && self.eval.scale.is_finite()) || self.eval.runs == 0 || self.eval.instances == 0 {
            return Err(Error::Config("evaluation scale, runs and instances must be positive".into()));
        }
        Ok(())
    }

    /// Every decided value, one `key = value` per line in key order.
    pub fn canonical(&self) -> String {
        let (e, a, b, ev, r) = (&self.env, &self.agent, &self.budget, &self.eval, &self.run);
        let (bkind, bamount) = budget_parts(b.specialist);
        let mut entries: Vec<(&str, String)> = vec![
            ("env.kind", e.kind.to_string()),
            ("env.seed", e.seed.to_string()),
            ("env.maze", if e.maze == MazeVariant::Small { "small" } else { "standard" }.into()),
            ("env.jobs", e.jobs.to_string()),
            ("env.machines", e.machines.to_string()),
            ("env.duration_low", e.duration_low.to_string()),
            ("env.duration_high", e.duration_high.to_string()),
            ("env.fresh_instances", e.fresh_instances.to_string()),
            ("agent.tags", join(&a.tags)),
            ("agent.actors", a.actors.to_string()),
            ("agent.segment_len", a.segment_len.to_string()),
            ("agent.queue_capacity", a.queue_capacity.to_string()),
            ("agent.batch", a.batch.to_string()),
            ("agent.hidden", a.hidden.to_string()),
            ("agent.synchronous", a.synchronous.to_string()),
            ("agent.pretrain_steps", a.pretrain_steps.to_string()),
            ("agent.seq_width", a.seq_width.to_string()),
            ("agent.seq_heads", a.seq_heads.to_string()),
            ("agent.seq_blocks", a.seq_blocks.to_string()),
            ("agent.seq_ff", a.seq_ff.to_string()),
            ("agent.seq_context", a.seq_context.to_string()),
            ("agent.seq_patches", a.seq_patches.to_string()),
            ("agent.return_bins", a.return_bins.to_string()),
            ("agent.return_min", a.return_min.to_string()),
            ("agent.return_max", a.return_max.to_string()),
            ("agent.target_return", a.target_return.to_string()),
            ("agent.temperature", a.temperature.to_string()),
            ("agent.dual_lr", a.dual_lr.to_string()),
            ("agent.dqn_train_every", a.dqn_train_every.to_string()),
            ("agent.dqn_decay_steps", a.dqn_decay_steps.to_string()),
            ("budget.kind", bkind.to_string()),
            ("budget.amount", bamount),
            ("budget.tags", join(&b.tags)),
            ("eval.scale", ev.scale.to_string()),
            ("eval.runs", ev.runs.to_string()),
            ("eval.instances", ev.instances.to_string()),
            ("eval.seed", ev.seed.to_string()),
            ("run.seed", r.seed.to_string()),
            ("run.segment_logs", r.segment_logs.to_string()),
            ("run.parallel", r.parallel.to_string()),
        ];
        match b.clock {
            ClockKind::Wall => entries.push(("budget.clock", "wall".into())),
            ClockKind::Logical { seconds_per_step } => {
                entries.push(("budget.clock", "logical".into()));
                entries.push(("budget.seconds_per_step", seconds_per_step.to_string()));
            }
        }
        entries.sort();
        entries.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    /// Hex SHA-256 of the canonical form.
    pub fn fingerprint(&self) -> String {
        hex::encode(Sha256::digest(self.canonical().as_bytes()))
    }

    /// Evaluation allowance for the bug-hunting games, after scaling.
    pub fn eval_allowance(&self) -> Budget {
        let scaled = |n: f64| ((n * self.eval.scale).round() as u64).max(1);
        match self.env.kind {
            EnvKind::Blockmaze => Budget::Steps(scaled(300_000.0)),
            EnvKind::Pacgrid => Budget::Episodes(scaled(1000.0)),
            EnvKind::Jssp => Budget::Episodes(self.eval.instances as u64),
        }
    }

    /// Seeds of the repeated runs.
    pub fn run_seeds(&self) -> Vec<u64> {
        (0..self.eval.runs as u64).map(|i| self.run.seed + i).collect()
    }
}

fn budget_parts(b: Budget) -> (&'static str, String) {
    match b {
        Budget::Steps(n) => ("steps", n.to_string()),
        Budget::Episodes(n) => ("episodes", n.to_string()),
        Budget::Seconds(s) => ("seconds", s.to_string()),
    }
}

fn make_budget(kind: &str, amount: &str) -> Result<Budget> {
    let bad = || Error::Config(format!("bad budget amount `{amount}` for {kind}"));
    match kind {
        "steps" => Ok(Budget::Steps(amount.parse().map_err(|_| bad())?)),
        "episodes" => Ok(Budget::Episodes(amount.parse().map_err(|_| bad())?)),
        "seconds" => Ok(Budget::Seconds(amount.parse().map_err(|_| bad())?)),
        _ => Err(Error::Config(format!("unknown budget kind `{kind}`"))),
    }
}
