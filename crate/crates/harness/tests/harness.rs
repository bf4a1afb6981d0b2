use gsea_harness::record::{CensusSummary, FinetuneRecord};
use gsea_harness::report::{cles_csv, sci};
use gsea_harness::{
    aggregate, cles, cles_exact, cles_matrices, load_records, run_experiment, summarize, write_report, AgentTag,
    BudgetTag, EnvKind, ExperimentConfig, Metric, ReportTable, RunRecord,
};
use gsea_runtime::{Budget, BudgetUsage};
use num_rational::Ratio;
use proptest::prelude::*;

fn record(agent: AgentTag, budget: BudgetTag, seed: u64, makespan: i64) -> RunRecord {
    let cfg = ExperimentConfig::defaults(EnvKind::Jssp);
    RunRecord {
        run_id: RunRecord::run_id(agent, budget, seed),
        fingerprint: cfg.fingerprint(),
        config: cfg.canonical(),
        env: EnvKind::Jssp,
        agent,
        budget,
        seed,
        finetune: Some(FinetuneRecord {
            budget: Budget::Steps(0),
            usage: BudgetUsage { steps: 0, episodes: 0, seconds: 0.0 },
            updates: 0,
            episode_returns: vec![],
        }),
        episode_returns: vec![-(makespan as f64)],
        bug_census: None,
        gate_census: None,
        makespans: Some(vec![makespan]),
        train_seconds: 0.0,
        test_seconds: 1.5,
        failure: None,
    }
}

fn pairs(a: &[f64], b: &[f64]) -> Ratio<u64> {
    let mut twice = 0u64;
    for x in a {
        for y in b {
            twice += if x > y { 2 } else if x == y { 1 } else { 0 };
        }
    }
    Ratio::new(twice, 2 * (a.len() * b.len()) as u64)
}

#[test]
fn config_round_trips_through_canonical_text() {
    let cfg = ExperimentConfig::parse(
        "# small run\nenv.kind = blockmaze\nenv.maze = small\nbudget.kind = steps\nbudget.amount = 5000\n\
         budget.clock = logical\nbudget.seconds_per_step = 0.5\nagent.tags = MGDT-DQN,IMPALA-PPO\n",
    )
    .unwrap();
    assert_eq!(cfg.budget.specialist, Budget::Steps(5000));
    assert_eq!(cfg.agent.seq_patches, 4);
    let again = ExperimentConfig::parse(&cfg.canonical()).unwrap();
    assert_eq!(again, cfg);
    assert_eq!(again.fingerprint(), cfg.fingerprint());
    assert_eq!(cfg.fingerprint().len(), 64);
    let mut other = cfg.clone();
    other.set("run.seed", "7").unwrap();
    assert_ne!(other.fingerprint(), cfg.fingerprint());
}

#[test]
fn bad_configs_are_config_errors() {
    for text in [
        "env.kind = jssp\nagent.flavour = spicy\n",
        "env.seed = 1\nenv.seed = 2\n",
        "budget.amount = 1.5\n",
        "agent.tags = NOPE\n",
        "agent.synchronous = true\n",
        "env.kind = pacgrid\nagent.tags = PDR-SPT\n",
        "no equals sign\n",
    ] {
        let err = ExperimentConfig::parse(text).unwrap_err();
        assert!(matches!(err, gsea_core::Error::Config(_)), "{text:?} gave {err:?}");
    }
}

#[test]
fn budget_tags_parse_and_scale() {
    let tags: Vec<BudgetTag> = ["zero_shot", "one_pct", "two_pct", "custom:0.25"]
        .iter()
        .map(|s| s.parse().unwrap())
        .collect();
    assert_eq!(tags.iter().map(|t| t.fraction()).collect::<Vec<_>>(), vec![0.0, 0.01, 0.02, 0.25]);
    assert_eq!(tags[3].to_string(), "custom:0.25");
    assert!("custom:2".parse::<BudgetTag>().is_err());
    assert_eq!(Budget::Steps(36_000).scaled(0.01), Budget::Steps(360));
    assert_eq!(Budget::Episodes(1000).scaled(0.02), Budget::Episodes(20));
}

#[test]
fn evaluation_allowance_follows_scale() {
    let mut cfg = ExperimentConfig::defaults(EnvKind::Blockmaze);
    cfg.set("eval.scale", "0.01").unwrap();
    assert_eq!(cfg.eval_allowance(), Budget::Steps(3000));
    let mut pac = ExperimentConfig::defaults(EnvKind::Pacgrid);
    pac.set("eval.scale", "0.1").unwrap();
    assert_eq!(pac.eval_allowance(), Budget::Episodes(100));
    assert_eq!(ExperimentConfig::defaults(EnvKind::Jssp).eval_allowance(), Budget::Episodes(100));
}

#[test]
fn cles_hand_examples() {
    assert_eq!(cles_exact(&[1.0, 2.0, 3.0], &[2.0]).unwrap(), Ratio::new(1, 2));
    assert_eq!(cles(&[5.0], &[1.0, 9.0]).unwrap(), 0.5);
    assert_eq!(cles(&[3.0, 3.0], &[3.0]).unwrap(), 0.5);
    assert!(cles(&[1.0], &[]).is_err());
    assert!(matches!(cles(&[f64::NAN], &[1.0]), Err(gsea_core::Error::Numeric(_))));
}

proptest! {
    #[test]
    fn cles_matches_pair_enumeration(
        a in prop::collection::vec(-5i32..5, 1..12),
        b in prop::collection::vec(-5i32..5, 1..12),
    ) {
        let a: Vec<f64> = a.into_iter().map(f64::from).collect();
        let b: Vec<f64> = b.into_iter().map(f64::from).collect();
        let ab = cles_exact(&a, &b).unwrap();
        prop_assert_eq!(ab, pairs(&a, &b));
        prop_assert_eq!(ab + cles_exact(&b, &a).unwrap(), Ratio::from_integer(1));
    }

    #[test]
    fn summary_ignores_order(mut v in prop::collection::vec(-1e3f64..1e3, 1..20), k in 0usize..20) {
        let s = summarize(&v).unwrap();
        let k = k % v.len();
        v.rotate_left(k);
        v.reverse();
        let t = summarize(&v).unwrap();
        prop_assert_eq!(s.median, t.median);
        prop_assert!((s.mean - t.mean).abs() < 1e-9);
        prop_assert!((s.std - t.std).abs() < 1e-9);
        prop_assert!(s.std >= 0.0);
    }
}

#[test]
fn aggregate_examples() {
    let runs: Vec<RunRecord> = [10, 20, 30, 50]
        .iter()
        .enumerate()
        .map(|(s, &m)| record(AgentTag::ImpalaPpo, BudgetTag::OnePct, s as u64, m))
        .collect();
    let s = aggregate(&runs, Metric::Makespan).unwrap();
    assert_eq!((s.mean, s.median, s.n), (27.5, 25.0, 4));
    assert!((s.std - 14.790199457749041).abs() < 1e-12);
    let mut shuffled = runs.clone();
    shuffled.swap(0, 3);
    shuffled.swap(1, 2);
    assert_eq!(aggregate(&shuffled, Metric::Makespan).unwrap(), s);
    assert!(matches!(aggregate(&runs, Metric::Gates), Err(gsea_core::Error::State(_))));
}

#[test]
fn empty_report_is_header_only() {
    let table = ReportTable::build(&[]).unwrap();
    assert_eq!(table.csv(EnvKind::Jssp), "agent,budget,metric,mean,std,median\n");
    assert!(cles_matrices(&[], EnvKind::Jssp).unwrap().is_empty());
}

#[test]
fn two_agents_give_one_by_one_cles_matrices() {
    let mut records = Vec::new();
    for s in 0..3 {
        records.push(record(AgentTag::ImpalaPpo, BudgetTag::ZeroShot, s, 10 + s as i64));
        records.push(record(AgentTag::MgdtMaent, BudgetTag::ZeroShot, s, 20));
    }
    let ms = cles_matrices(&records, EnvKind::Jssp).unwrap();
    assert_eq!(ms.len(), Metric::for_env(EnvKind::Jssp).len());
    let makespan = ms.iter().find(|m| m.metric == Metric::Makespan).unwrap();
    assert_eq!((makespan.rows.len(), makespan.cols.len()), (1, 1));
    assert_eq!(makespan.cells[0][0], Some(0.0));
    assert!(cles_csv(&ms).contains("# zero_shot makespan"));
}

#[test]
fn reports_are_byte_stable() {
    let mut records = Vec::new();
    for s in 0..4 {
        records.push(record(AgentTag::ImpalaVTrace, BudgetTag::TwoPct, s, 40 + 3 * s as i64));
        records.push(record(AgentTag::MgdtDqn, BudgetTag::OnePct, s, 50 - s as i64));
    }
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    write_report(a.path(), &records).unwrap();
    records.reverse();
    write_report(b.path(), &records).unwrap();
    for name in ["jssp.csv", "jssp-cles.csv", "report.txt"] {
        let x = std::fs::read(a.path().join(name)).unwrap();
        let y = std::fs::read(b.path().join(name)).unwrap();
        assert_eq!(x, y, "{name}");
    }
    let text = std::fs::read_to_string(a.path().join("report.txt")).unwrap();
    assert!(text.contains(&sci(44.5)), "{text}");
}

#[test]
fn census_summary_counts_distinct_cells() {
    let mut census = gsea_envs::Census::new();
    for (id, kind) in [(0, 1), (0, 1), (5, 1), (9, 2)] {
        census.record(gsea_core::BugEvent { id, kind });
    }
    let s = CensusSummary::from_census(&census, [1, 2, 3]);
    assert_eq!(s.distinct[&1], 2);
    assert_eq!(s.distinct[&2], 1);
    assert_eq!(s.distinct[&3], 0);
    assert_eq!(s.distinct_total(), 3);
}

fn small_jssp(agents: &str) -> ExperimentConfig {
    ExperimentConfig::parse(&format!(
        "env.kind = jssp\nenv.jobs = 3\nenv.machines = 3\nenv.duration_high = 9\nenv.fresh_instances = false\n\
         agent.tags = {agents}\nagent.actors = 1\nagent.synchronous = true\nagent.segment_len = 5\nagent.batch = 2\n\
         agent.hidden = 8\nagent.seq_width = 8\nagent.seq_heads = 2\nagent.seq_blocks = 1\nagent.seq_ff = 8\n\
         agent.seq_patches = 3\nagent.return_min = -100\nbudget.kind = steps\nbudget.amount = 1000\n\
         eval.runs = 2\neval.instances = 4\nrun.parallel = false\n"
    ))
    .unwrap()
}

#[test]
fn experiment_uses_exact_budget_fractions_and_skips_zero_shot() {
    let cfg = small_jssp("IMPALA-PPO,PDR-SPT");
    let out = tempfile::tempdir().unwrap();
    let outcome = run_experiment(&cfg, out.path()).unwrap();
    assert!(outcome.failures.is_empty(), "{:?}", outcome.failures);
    assert_eq!(outcome.records.len(), 2 * 2 * 3);
    for r in &outcome.records {
        r.verify_fingerprint().unwrap();
        let ft = r.finetune.as_ref().unwrap();
        let expected = if r.agent.trains() { (r.budget.fraction() * 1000.0) as u64 } else { 0 };
        assert_eq!(ft.usage.steps, expected, "{}", r.run_id);
        if r.budget == BudgetTag::ZeroShot {
            assert_eq!(ft.updates, 0);
        }
        assert_eq!(r.makespans.as_ref().unwrap().len(), 4);
    }
    assert_eq!(load_records(out.path()).unwrap(), outcome.records);
    let csv = std::fs::read_to_string(out.path().join("report/jssp.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 2 * 3 * Metric::for_env(EnvKind::Jssp).len());
}

#[test]
fn evaluation_on_one_hundred_fresh_instances() {
    let mut cfg = small_jssp("PDR-MWR");
    cfg.set("eval.instances", "100").unwrap();
    cfg.set("eval.runs", "1").unwrap();
    cfg.set("budget.tags", "zero_shot").unwrap();
    let out = tempfile::tempdir().unwrap();
    let outcome = run_experiment(&cfg, out.path()).unwrap();
    let spans = outcome.records[0].makespans.as_ref().unwrap();
    assert_eq!(spans.len(), 100);
    // Each makespan is at least the longest job on some instance.
    assert!(spans.iter().all(|&m| m >= 3));
}
