use std::collections::BTreeMap;
use std::fmt;

use gsea_core::{Error, Result};
use gsea_envs::Census;
use gsea_runtime::{Budget, BudgetUsage};
use serde::{Deserialize, Serialize};

use crate::config::{AgentTag, BudgetTag, EnvKind, ExperimentConfig};

/// Per-kind tallies of a detection census.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CensusSummary {
    /// Distinct items of each kind found at least once.
    pub distinct: BTreeMap<usize, usize>,
    /// Every trigger, by kind.
    pub triggers: BTreeMap<usize, usize>,
}

impl CensusSummary {
    pub fn from_census(census: &Census, kinds: impl IntoIterator<Item = usize>) -> Self {
        let mut out = Self::default();
        for k in kinds {
            out.distinct.insert(k, census.distinct(k));
            out.triggers.insert(k, census.total(k));
        }
        out
    }

    pub fn distinct_total(&self) -> usize {
        self.distinct.values().sum()
    }
}

/// What the fine-tuning phase was allowed and what it used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinetuneRecord {
    pub budget: Budget,
    pub usage: BudgetUsage,
    pub updates: u64,
    pub episode_returns: Vec<f64>,
}

/// Outcome of one (agent, budget, seed) grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run_id: String,
    pub fingerprint: String,
    /// Canonical configuration text the fingerprint is computed from.
    pub config: String,
    pub env: EnvKind,
    pub agent: AgentTag,
    pub budget: BudgetTag,
    pub seed: u64,
    pub finetune: Option<FinetuneRecord>,
    /// Returns of the evaluation episodes.
    pub episode_returns: Vec<f64>,
    pub bug_census: Option<CensusSummary>,
    pub gate_census: Option<CensusSummary>,
    pub makespans: Option<Vec<i64>>,
    /// Machine-local timings, not comparable across hosts.
    pub train_seconds: f64,
    pub test_seconds: f64,
    /// Set when training failed; such records carry no evaluation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

impl RunRecord {
    pub fn run_id(agent: AgentTag, budget: BudgetTag, seed: u64) -> String {
        format!("{}-{}-s{seed}", agent.name().to_lowercase(), budget.to_string().replace(':', "-"))
    }

    /// Recomputes the fingerprint from the stored configuration.
    pub fn verify_fingerprint(&self) -> Result<()> {
        let cfg = ExperimentConfig::parse(&self.config)?;
        if cfg.fingerprint() != self.fingerprint {
            return Err(Error::Contract(format!("{}: fingerprint does not match its config", self.run_id)));
        }
        Ok(())
    }

    pub fn metric(&self, m: Metric) -> Option<f64> {
        let mean = |v: &[f64]| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
        match m {
            Metric::Return => mean(&self.episode_returns),
            Metric::Type1Bugs => self.bug_census.as_ref().and_then(|c| c.distinct.get(&1)).map(|&v| v as f64),
            Metric::Type2Bugs => self.bug_census.as_ref().and_then(|c| c.distinct.get(&2)).map(|&v| v as f64),
            Metric::Gates => self.gate_census.as_ref().map(|c| c.distinct_total() as f64),
            Metric::Makespan => self
                .makespans
                .as_ref()
                .and_then(|v| mean(&v.iter().map(|&x| x as f64).collect::<Vec<_>>())),
            Metric::TrainSeconds => Some(self.train_seconds),
            Metric::TestSeconds => Some(self.test_seconds),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Return,
    Type1Bugs,
    Type2Bugs,
    Gates,
    Makespan,
    TrainSeconds,
    TestSeconds,
}

impl Metric {
    pub const ALL: [Metric; 7] = [
        Metric::Return,
        Metric::Type1Bugs,
        Metric::Type2Bugs,
        Metric::Gates,
        Metric::Makespan,
        Metric::TrainSeconds,
        Metric::TestSeconds,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Return => "return",
            Metric::Type1Bugs => "type1_bugs",
            Metric::Type2Bugs => "type2_bugs",
            Metric::Gates => "gates",
            Metric::Makespan => "makespan",
            Metric::TrainSeconds => "train_seconds",
            Metric::TestSeconds => "test_seconds",
        }
    }

    pub fn applies_to(self, env: EnvKind) -> bool {
        match self {
            Metric::Type1Bugs | Metric::Type2Bugs => env == EnvKind::Blockmaze,
            Metric::Gates => env == EnvKind::Pacgrid,
            Metric::Makespan => env == EnvKind::Jssp,
            _ => true,
        }
    }

    pub fn for_env(env: EnvKind) -> Vec<Metric> {
        Self::ALL.into_iter().filter(|m| m.applies_to(env)).collect()
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}
