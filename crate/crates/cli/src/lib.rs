//! Command implementations behind the `vrscp` binary: seeded runs from a
//! config file, PR/LCI evaluation of record sets and the oracle check suites.

pub mod config;
pub mod presets;

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use vrscp_core::baselines::{reinforce_run, scrn_run};
use vrscp_core::cubic::SolverTrace;
use vrscp_core::eval::{default_grid_step, pr_metric, PrReport};
use vrscp_core::objective::StochasticObjective;
use vrscp_core::oracle_suites::{run_suite, CheckResult, Suite};
use vrscp_core::policy::write_params;
use vrscp_core::record::{RunFailure, RunRecord};
use vrscp_core::vrscp::{vrscp_run, RunOptions};

use crate::config::{AlgorithmConfig, ExperimentConfig, Objective};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config_hash: String,
    pub version: String,
    pub algorithm: String,
    pub seeds: Vec<u64>,
    pub records: Vec<String>,
    pub failed_seeds: Vec<u64>,
    pub workers: usize,
    pub wall_time_seconds: f64,
}

pub fn record_file_name(algorithm: &str, seed: u64) -> String {
    format!("{algorithm}-seed{seed}.jsonl")
}

/// Where a run's outputs go: the explicit directory, else the config's,
/// else `runs/`.
pub fn output_dir(cfg: &ExperimentConfig, out: Option<PathBuf>) -> PathBuf {
    out.or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("runs"))
}

fn run_seed<O: StochasticObjective>(
    alg: &AlgorithmConfig,
    obj: &O,
    seed: u64,
    trace: Option<&mut SolverTrace>,
) -> std::result::Result<RunRecord, RunFailure> {
    let opts = RunOptions {
        trace,
        ..RunOptions::default()
    };
    match alg {
        AlgorithmConfig::Vrscp(hp) => vrscp_run(hp, obj, seed, opts),
        AlgorithmConfig::Scrn(hp) => scrn_run(hp, obj, seed, opts),
        AlgorithmConfig::Reinforce(c) => reinforce_run(c, obj, seed, None),
    }
}

/// Runs one seed and writes its record, final parameters and optional trace.
/// Returns whether the run completed.
fn run_and_write(
    alg: &AlgorithmConfig,
    obj: &Objective,
    seed: u64,
    dir: &Path,
    trace: bool,
) -> Result<bool> {
    let name = alg.name();
    let mut solver_trace = SolverTrace::default();
    let tr = trace.then_some(&mut solver_trace);
    let outcome = match obj {
        Objective::Policy(o) => run_seed(alg, o, seed, tr),
        Objective::Synthetic(o) => run_seed(alg, o, seed, tr),
    };
    let path = dir.join(record_file_name(name, seed));
    let mut w = BufWriter::new(File::create(&path).with_context(|| format!("creating {}", path.display()))?);
    let ok = match &outcome {
        Ok(rec) => {
            rec.write_jsonl(&mut w)?;
            let params = dir.join("params").join(format!("{name}-seed{seed}.params"));
            write_params(BufWriter::new(File::create(&params)?), &rec.summary.final_params)?;
            true
        }
        Err(fail) => {
            fail.write_jsonl(&mut w)?;
            eprintln!("{fail}");
            false
        }
    };
    w.flush()?;
    if trace && !matches!(alg, AlgorithmConfig::Reinforce(_)) {
        let path = dir.join("traces").join(format!("{name}-seed{seed}.csv"));
        solver_trace.write_csv(BufWriter::new(File::create(path)?))?;
    }
    Ok(ok)
}

/// Runs every configured seed on a pool of `workers` threads and writes one
/// record per seed plus `manifest.json`. Failed seeds keep their partial
/// record (ending in a failure marker) and make the command return an error
/// after the manifest is written.
pub fn cmd_run(config_path: &Path, out: Option<PathBuf>, workers: usize, trace: bool) -> Result<Manifest> {
    let cfg = ExperimentConfig::load(config_path)?;
    run_config(&cfg, out, workers, trace)
}

pub fn run_config(cfg: &ExperimentConfig, out: Option<PathBuf>, workers: usize, trace: bool) -> Result<Manifest> {
    cfg.validate()?;
    if workers == 0 {
        bail!("--workers must be at least 1");
    }
    let dir = output_dir(cfg, out);
    fs::create_dir_all(dir.join("params"))?;
    if trace {
        fs::create_dir_all(dir.join("traces"))?;
    }
    let alg = cfg.algorithm();
    let obj = cfg.objective()?;
    let start = Instant::now();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build()?;
    let results: Vec<Result<bool>> = pool.install(|| {
        cfg.seeds
            .par_iter()
            .map(|&seed| run_and_write(&alg, &obj, seed, &dir, trace))
            .collect()
    });
    let mut failed = Vec::new();
    for (seed, r) in cfg.seeds.iter().zip(results) {
        if !r.with_context(|| format!("seed {seed}"))? {
            failed.push(*seed);
        }
    }
    let manifest = Manifest {
        config_hash: cfg.hash(),
        version: VERSION.to_string(),
        algorithm: alg.name().to_string(),
        seeds: cfg.seeds.clone(),
        records: cfg.seeds.iter().map(|s| record_file_name(alg.name(), *s)).collect(),
        failed_seeds: failed.clone(),
        workers,
        wall_time_seconds: start.elapsed().as_secs_f64(),
    };
    let f = File::create(dir.join("manifest.json"))?;
    serde_json::to_writer_pretty(BufWriter::new(f), &manifest)?;
    if !failed.is_empty() {
        bail!("{} of {} seeds aborted: {failed:?}", failed.len(), cfg.seeds.len());
    }
    Ok(manifest)
}

#[derive(Debug, Clone)]
pub struct EvalArgs {
    pub pattern: String,
    pub n: usize,
    pub confidence: f64,
    pub grid_step: Option<u64>,
    pub horizon: Option<u64>,
    pub out: PathBuf,
}

/// Loads the records matching `pattern`, in path order.
pub fn load_records(pattern: &str) -> Result<Vec<RunRecord>> {
    let mut paths: Vec<PathBuf> = glob::glob(pattern)
        .with_context(|| format!("bad glob {pattern:?}"))?
        .collect::<std::result::Result<_, _>>()?;
    paths.sort();
    paths
        .iter()
        .map(|p| {
            let f = File::open(p).with_context(|| format!("opening {}", p.display()))?;
            RunRecord::read_jsonl(BufReader::new(f)).with_context(|| format!("reading {}", p.display()))
        })
        .collect()
}

/// PR and LCI curve over the first `n` seeds (in seed order) matching the
/// glob. Writes `<alg>-pr.json` and `<alg>-lci.csv` to `out`.
pub fn cmd_eval(args: &EvalArgs) -> Result<PrReport> {
    let mut records = load_records(&args.pattern)?;
    if records.len() < args.n {
        bail!(
            "{} records match {:?}, {} required",
            records.len(),
            args.pattern,
            args.n
        );
    }
    if let Some(r) = records.iter().find(|r| r.algorithm != records[0].algorithm) {
        bail!(
            "records mix algorithms {} and {}; the glob must select a single algorithm",
            records[0].algorithm,
            r.algorithm
        );
    }
    records.sort_by_key(|r| r.seed);
    if let Some(w) = records.windows(2).find(|w| w[0].seed == w[1].seed) {
        bail!("seed {} appears in more than one record", w[0].seed);
    }
    records.truncate(args.n);
    let grid_step = match args.grid_step {
        Some(g) => g,
        None => default_grid_step(&records).context("records hold no iterations")?,
    };
    let report = pr_metric(&records, args.n, args.horizon, grid_step, args.confidence)?;
    fs::create_dir_all(&args.out)?;
    let alg = &report.algorithm;
    report.write_json(BufWriter::new(File::create(args.out.join(format!("{alg}-pr.json")))?))?;
    report.write_csv(BufWriter::new(File::create(args.out.join(format!("{alg}-lci.csv")))?))?;
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleSummary {
    pub suite: String,
    pub passed: bool,
    pub checks: Vec<CheckResult>,
}

/// Runs a check suite, prints a pass/fail table and writes
/// `oracle-<suite>.json` to `out`.
pub fn cmd_oracle_check(suite: Suite, name: &str, out: &Path) -> Result<OracleSummary> {
    let checks = run_suite(suite)?;
    let width = checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
    for c in &checks {
        let mark = if c.passed { "PASS" } else { "FAIL" };
        println!("{:<10} {:<width$}  {mark}  {}", c.suite, c.name, c.detail);
    }
    let summary = OracleSummary {
        suite: name.to_string(),
        passed: checks.iter().all(|c| c.passed),
        checks,
    };
    fs::create_dir_all(out)?;
    let path = out.join(format!("oracle-{name}.json"));
    serde_json::to_writer_pretty(BufWriter::new(File::create(&path)?), &summary)?;
    println!("summary written to {}", path.display());
    Ok(summary)
}
