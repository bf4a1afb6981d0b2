use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gsea_core::rng::{derive_seed, seeded};
use gsea_core::{Error, Result};
use gsea_envs::jssp::{brute_force_optimal, classic_pdr, run_dispatch, JsspInstance, Pdr};
use gsea_harness::protocol::{finetune_point, pretrain};
use gsea_harness::{cles, cles_exact, load_records, run_experiment, write_report, EnvKind, ExperimentConfig};
use rand::Rng as _;
use serde_json::json;

#[derive(Parser)]
#[command(name = "gsea", about = "Generalist-agent experiments on bug hunting and job-shop scheduling")]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
    /// Experiment configuration (flat key = value).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Base seed of the repeated runs.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "gsea-out")]
    out: PathBuf,
    /// Multiplier on evaluation length.
    #[arg(long, global = true)]
    eval_scale: Option<f64>,
    /// Comma-separated agent tags.
    #[arg(long, global = true)]
    agents: Option<String>,
    /// Comma-separated budget tags.
    #[arg(long, global = true)]
    budgets: Option<String>,
}

#[derive(Subcommand)]
enum Verb {
    /// Pre-train every agent on the environment family.
    Pretrain,
    /// Pre-train (or load), then fine-tune at every budget.
    Finetune,
    /// Full protocol: pre-train, fine-tune, evaluate, report.
    Evaluate,
    /// Rebuild the report from stored run records.
    Report,
    /// Check the scheduling and effect-size oracles.
    Oracle {
        /// Number of random cases.
        #[arg(long, default_value_t = 200)]
        cases: usize,
    },
}

fn config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
            ExperimentConfig::parse(&text)?
        }
        None => ExperimentConfig::defaults(EnvKind::Jssp),
    };
    if let Some(s) = cli.seed {
        cfg.set("run.seed", &s.to_string())?;
    }
    if let Some(s) = cli.eval_scale {
        cfg.set("eval.scale", &s.to_string())?;
    }
    if let Some(a) = &cli.agents {
        cfg.set("agent.tags", a)?;
    }
    if let Some(b) = &cli.budgets {
        cfg.set("budget.tags", b)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn oracle(cases: usize, seed: u64) -> Result<bool> {
    let mut rng = seeded(seed);
    let mut ok = true;
    for i in 0..cases {
        let jobs = rng.gen_range(1..=4);
        let machines = rng.gen_range(1..=(12 / jobs).min(4));
        let inst = JsspInstance::generate(jobs, machines, 1, 20, derive_seed(seed, i as u64))?;
        let best = brute_force_optimal(&inst)?.makespan;
        let mut worst_gap = i64::MAX;
        for rule in Pdr::ALL {
            worst_gap = worst_gap.min(classic_pdr(&inst, rule).makespan - best);
        }
        let random = run_dispatch(&inst, |s| {
            let valid: Vec<usize> = (0..s.instance().jobs()).filter(|&j| s.eligible()[j]).collect();
            valid[rng.gen_range(0..valid.len())]
        })?;
        worst_gap = worst_gap.min(random.makespan - best);
        ok &= worst_gap >= 0;
    }
    println!("{}", json!({"oracle": "jssp_dominance", "cases": cases, "pass": ok}));
    let mut sym = true;
    for _ in 0..cases {
        let a: Vec<f64> = (0..rng.gen_range(1..8)).map(|_| rng.gen_range(0..5) as f64).collect();
        let b: Vec<f64> = (0..rng.gen_range(1..8)).map(|_| rng.gen_range(0..5) as f64).collect();
        sym &= cles_exact(&a, &b)? + cles_exact(&b, &a)? == 1.into();
        sym &= (0.0..=1.0).contains(&cles(&a, &b)?);
    }
    println!("{}", json!({"oracle": "cles_symmetry", "cases": cases, "pass": sym}));
    Ok(ok && sym)
}

fn run(cli: &Cli) -> Result<bool> {
    if let Verb::Oracle { cases } = cli.verb {
        return oracle(cases, cli.seed.unwrap_or(0));
    }
    if let Verb::Report = cli.verb {
        let records = load_records(&cli.out)?;
        let table = write_report(&cli.out.join("report"), &records)?;
        println!("{}", json!({"records": records.len(), "rows": table.rows.len()}));
        return Ok(true);
    }
    let cfg = config(cli)?;
    std::fs::create_dir_all(&cli.out).map_err(|e| Error::State(format!("i/o: {e}")))?;
    match cli.verb {
        Verb::Pretrain => {
            for &tag in &cfg.agent.tags {
                for seed in cfg.run_seeds() {
                    let nets = pretrain(&cfg, tag, seed, &cli.out)?;
                    println!("{}", json!({"agent": tag.name(), "seed": seed, "networks": nets.len()}));
                }
            }
            Ok(true)
        }
        Verb::Finetune => {
            for &tag in &cfg.agent.tags {
                for seed in cfg.run_seeds() {
                    let nets = pretrain(&cfg, tag, seed, &cli.out)?;
                    for &budget in &cfg.budget.tags {
                        let done = finetune_point(&cfg, tag, budget, seed, &nets, &cli.out)?;
                        let ft = done.record.finetune.expect("set by fine-tuning");
                        println!(
                            "{}",
                            json!({"run": done.record.run_id, "updates": ft.updates, "steps": ft.usage.steps,
                                   "episodes": ft.usage.episodes, "seconds": ft.usage.seconds})
                        );
                    }
                }
            }
            Ok(true)
        }
        Verb::Evaluate => {
            let outcome = run_experiment(&cfg, &cli.out)?;
            for r in &outcome.records {
                println!("{}", json!({"run": r.run_id, "fingerprint": r.fingerprint}));
            }
            for (id, e) in &outcome.failures {
                eprintln!("{}", json!({"run": id, "error": e.to_string()}));
            }
            print!("{}", outcome.table.text());
            Ok(outcome.failures.is_empty())
        }
        Verb::Report | Verb::Oracle { .. } => unreachable!("handled above"),
    }
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::Config(_) => "config",
        Error::Parse(_) => "parse",
        Error::Contract(_) => "contract",
        Error::State(_) => "state",
        Error::Shape(_) => "shape",
        Error::Index { .. } => "index",
        Error::Numeric(_) => "numeric",
        Error::InvalidDistribution(_) => "distribution",
        Error::MaskedAction(_) => "masked_action",
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("{}", json!({"error": error_kind(&e), "message": e.to_string()}));
            ExitCode::from(2)
        }
    }
}
