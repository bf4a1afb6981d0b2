use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use gsea_core::{Error, Result};
use serde::{Deserialize, Serialize};

use crate::config::{AgentTag, BudgetTag, EnvKind};
use crate::record::{Metric, RunRecord};
use crate::stats::{aggregate, cles, Summary};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub env: EnvKind,
    pub agent: AgentTag,
    pub budget: BudgetTag,
    pub metric: Metric,
    pub summary: Summary,
}

/// Aggregates keyed by (environment, agent, budget, metric).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportTable {
    pub rows: Vec<ReportRow>,
}

type GroupKey = (EnvKind, AgentTag, (u8, u64), Metric);

fn groups(records: &[RunRecord]) -> BTreeMap<(EnvKind, AgentTag, (u8, u64)), (BudgetTag, Vec<RunRecord>)> {
    let mut out: BTreeMap<_, (BudgetTag, Vec<RunRecord>)> = BTreeMap::new();
    for r in records {
        out.entry((r.env, r.agent, r.budget.rank()))
            .or_insert_with(|| (r.budget, Vec::new()))
            .1
            .push(r.clone());
    }
    for (_, runs) in out.values_mut() {
        runs.sort_by(|a, b| a.run_id.cmp(&b.run_id));
    }
    out
}

impl ReportTable {
    pub fn build(records: &[RunRecord]) -> Result<Self> {
        let mut rows: BTreeMap<GroupKey, ReportRow> = BTreeMap::new();
        for ((env, agent, rank), (budget, runs)) in groups(records) {
            for metric in Metric::for_env(env) {
                let summary = aggregate(&runs, metric)?;
                rows.insert((env, agent, rank, metric), ReportRow { env, agent, budget, metric, summary });
            }
        }
        Ok(Self { rows: rows.into_values().collect() })
    }

    pub fn for_env(&self, env: EnvKind) -> impl Iterator<Item = &ReportRow> {
        self.rows.iter().filter(move |r| r.env == env)
    }

    /// `agent,budget,metric,mean,std,median` rows for one environment.
    pub fn csv(&self, env: EnvKind) -> String {
        let mut out = String::from("agent,budget,metric,mean,std,median\n");
        for r in self.for_env(env) {
            let s = &r.summary;
            writeln!(out, "{},{},{},{:?},{:?},{:?}", r.agent, r.budget, r.metric, s.mean, s.std, s.median)
                .expect("write to string");
        }
        out
    }

    /// Aligned plain-text table with three significant digits.
    pub fn text(&self) -> String {
        let header = ["environment", "agent", "budget", "metric", "mean", "std", "median"].map(String::from);
        let mut lines = vec![header];
        for r in &self.rows {
            let s = &r.summary;
            lines.push([
                r.env.to_string(),
                r.agent.to_string(),
                r.budget.to_string(),
                r.metric.to_string(),
                sci(s.mean),
                sci(s.std),
                sci(s.median),
            ]);
        }
        let widths: Vec<usize> = (0..7).map(|c| lines.iter().map(|l| l[c].len()).max().unwrap_or(0)).collect();
        let mut out = String::new();
        for l in &lines {
            let cells: Vec<String> = l.iter().zip(&widths).map(|(v, w)| format!("{v:<w$}")).collect();
            out.push_str(cells.join("  ").trim_end());
            out.push('\n');
        }
        out
    }
}

/// Three significant digits with a signed exponent, e.g. `5.73e+2`.
pub fn sci(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    let s = format!("{x:.2e}");
    let (mantissa, exp) = s.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    format!("{mantissa}e{}{}", if exp < 0 { '-' } else { '+' }, exp.abs())
}

/// Pairwise effect sizes of one metric within one budget. Row `i`,
/// column `j` holds `cles(rows[i], cols[j])` when `rows[i]` precedes
/// `cols[j]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClesMatrix {
    pub env: EnvKind,
    pub budget: BudgetTag,
    pub metric: Metric,
    pub rows: Vec<AgentTag>,
    pub cols: Vec<AgentTag>,
    pub cells: Vec<Vec<Option<f64>>>,
}

pub fn cles_matrices(records: &[RunRecord], env: EnvKind) -> Result<Vec<ClesMatrix>> {
    let mut by_budget: BTreeMap<(u8, u64), (BudgetTag, BTreeMap<AgentTag, Vec<RunRecord>>)> = BTreeMap::new();
    for ((e, agent, rank), (budget, runs)) in groups(records) {
        if e == env {
            by_budget.entry(rank).or_insert_with(|| (budget, BTreeMap::new())).1.insert(agent, runs);
        }
    }
    let mut out = Vec::new();
    for (budget, agents) in by_budget.into_values() {
        let tags: Vec<AgentTag> = agents.keys().copied().collect();
        if tags.len() < 2 {
            continue;
        }
        for metric in Metric::for_env(env) {
            let values = |t: &AgentTag| -> Result<Vec<f64>> {
                agents[t]
                    .iter()
                    .map(|r| r.metric(metric).ok_or_else(|| Error::State(format!("run {} has no {metric}", r.run_id))))
                    .collect()
            };
            let rows = tags[..tags.len() - 1].to_vec();
            let cols = tags[1..].to_vec();
            let mut cells = Vec::new();
            for (i, a) in rows.iter().enumerate() {
                let mut row = Vec::new();
                for (j, b) in cols.iter().enumerate() {
                    row.push(if j >= i { Some(cles(&values(a)?, &values(b)?)?) } else { None });
                }
                cells.push(row);
            }
            out.push(ClesMatrix { env, budget, metric, rows, cols, cells });
        }
    }
    Ok(out)
}

pub fn cles_csv(matrices: &[ClesMatrix]) -> String {
    let mut out = String::new();
    for m in matrices {
        writeln!(out, "# {} {}", m.budget, m.metric).expect("write to string");
        let head: Vec<String> = m.cols.iter().map(|t| t.to_string()).collect();
        writeln!(out, "agent,{}", head.join(",")).expect("write to string");
        for (a, row) in m.rows.iter().zip(&m.cells) {
            let cells: Vec<String> = row.iter().map(|c| c.map(|v| format!("{v:?}")).unwrap_or_default()).collect();
            writeln!(out, "{a},{}", cells.join(",")).expect("write to string");
        }
    }
    out
}

/// Writes `<env>.csv`, `<env>-cles.csv` and `report.txt` into `dir`.
pub fn write_report(dir: &Path, records: &[RunRecord]) -> Result<ReportTable> {
    let io = |e: std::io::Error| Error::State(format!("i/o: {e}"));
    fs::create_dir_all(dir).map_err(io)?;
    let table = ReportTable::build(records)?;
    let envs: BTreeSet<EnvKind> = records.iter().map(|r| r.env).collect();
    for env in envs {
        fs::write(dir.join(format!("{env}.csv")), table.csv(env)).map_err(io)?;
        fs::write(dir.join(format!("{env}-cles.csv")), cles_csv(&cles_matrices(records, env)?)).map_err(io)?;
    }
    fs::write(dir.join("report.txt"), table.text()).map_err(io)?;
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::sci;

    #[test]
    fn scientific_format() {
        assert_eq!(sci(573.0), "5.73e+2");
        assert_eq!(sci(3.27), "3.27e+0");
        assert_eq!(sci(-0.00123), "-1.23e-3");
        assert_eq!(sci(0.0), "0.00e+0");
    }
}
