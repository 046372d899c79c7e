//! End-to-end behaviour of the `vrscp` binary and the config format.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use vrscp_cli::config::{AlgorithmConfig, EnvironmentConfig, ExperimentConfig, PolicyConfig};
use vrscp_cli::presets::{preset, PRESETS};
use vrscp_core::oracle_suites::{hand_fixture, HAND_FIXTURE_PR};

fn vrscp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vrscp"))
        .args(args)
        .env_remove("VRSCP_OUT_DIR")
        .env_remove("VRSCP_WORKERS")
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// A small gridworld experiment: a few thousand probes per seed.
fn small(algorithm: &str, seeds: &[u64]) -> ExperimentConfig {
    let mut cfg = preset("walker", algorithm).unwrap();
    cfg.seeds = seeds.to_vec();
    cfg.probe_budget = Some(3_000);
    match &mut cfg.algorithm {
        AlgorithmConfig::Vrscp(hp) | AlgorithmConfig::Scrn(hp) => {
            hp.rho = 0.01;
            hp.l = 0.5;
            hp.mu_batch = 50;
        }
        AlgorithmConfig::Reinforce(c) => {
            c.step_size = 10.0;
            c.mu_batch = 50;
        }
    }
    cfg
}

fn write_config(dir: &Path, name: &str, cfg: &ExperimentConfig) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, cfg.to_toml().unwrap()).unwrap();
    path
}

fn top_level_files(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap())
        .filter(|e| e.file_type().unwrap().is_file())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    names
}

#[test]
fn configs_survive_a_round_trip() {
    let mut configs = Vec::new();
    for name in PRESETS {
        for alg in ["vrscp", "scrn", "reinforce"] {
            configs.push(preset(name, alg).unwrap());
        }
    }
    let saddle = r#"
seeds = [3, 1]
confidence = 0.9
grid_step = 40
[environment]
kind = "saddle"
noise = 0.01
[algorithm]
kind = "vrscp"
epsilon = 0.01
m = 4.0
"#;
    configs.push(ExperimentConfig::from_toml(saddle).unwrap());
    let mut out_dir = small("vrscp", &[1]);
    out_dir.output_dir = Some("some/where".into());
    configs.push(out_dir);
    for cfg in configs {
        let text = cfg.to_toml().unwrap();
        let back = ExperimentConfig::from_toml(&text).unwrap();
        assert_eq!(back, cfg, "{text}");
        assert_eq!(back.to_toml().unwrap(), text);
    }
}

#[test]
fn inconsistent_configs_are_rejected() {
    let cases = [
        // softmax on a continuous task
        ("seeds = [1]\n[environment]\nkind = \"linear-gaussian\"\n[policy]\nkind = \"softmax\"\n[algorithm]\nkind = \"vrscp\"\n", "softmax"),
        // saddle with a policy
        ("seeds = [1]\n[environment]\nkind = \"saddle\"\nnoise = 0.0\n[policy]\nkind = \"softmax\"\n[algorithm]\nkind = \"vrscp\"\n", "policy"),
        // missing policy
        ("seeds = [1]\n[environment]\nkind = \"gridworld\"\n[algorithm]\nkind = \"reinforce\"\n", "policy"),
        ("seeds = [1, 1]\n[environment]\nkind = \"gridworld\"\n[policy]\nkind = \"softmax\"\n[algorithm]\nkind = \"vrscp\"\n", "twice"),
        ("seeds = []\n[environment]\nkind = \"gridworld\"\n[policy]\nkind = \"softmax\"\n[algorithm]\nkind = \"vrscp\"\n", "seed"),
        ("seeds = [1]\n[environment]\nkind = \"gridworld\"\nsizee = 4\n[policy]\nkind = \"softmax\"\n[algorithm]\nkind = \"vrscp\"\n", "sizee"),
        ("seeds = [1]\n[environment]\nkind = \"maze\"\n[policy]\nkind = \"softmax\"\n[algorithm]\nkind = \"vrscp\"\n", "maze"),
        ("seeds = [1]\nprobe_budget = 10\n[environment]\nkind = \"gridworld\"\n[policy]\nkind = \"softmax\"\n[algorithm]\nkind = \"vrscp\"\nprobe_budget = 20\n", "probe_budget"),
        ("seeds = [1]\nconfidence = 1.5\n[environment]\nkind = \"gridworld\"\n[policy]\nkind = \"softmax\"\n[algorithm]\nkind = \"vrscp\"\n", "confidence"),
    ];
    for (text, needle) in cases {
        let err = format!("{:#}", ExperimentConfig::from_toml(text).unwrap_err());
        assert!(err.contains(needle), "{needle:?} not in {err}");
    }
}

#[test]
fn the_hash_tracks_meaningful_fields_only() {
    let base = small("vrscp", &[1, 2]);
    let h = base.hash();

    // formatting, comments, key order and spelt-out defaults
    let text = "# comment\nseeds = [1,2]\n\nprobe_budget = 3000\n[algorithm]\nrho = 0.01\nl = 0.5\nkind = \"vrscp\"\nepsilon = 0.005\nq = 2\nmu_batch = 50\ns_max = 256\n[policy]\nkind = \"softmax\"\n[environment]\nkind = \"gridworld\"\nslip = 0.1\n";
    assert_eq!(ExperimentConfig::from_toml(text).unwrap(), base);
    assert_eq!(ExperimentConfig::from_toml(text).unwrap().hash(), h);
    let moved = ExperimentConfig {
        output_dir: Some("elsewhere".into()),
        ..base.clone()
    };
    assert_eq!(moved.hash(), h);

    let mut changed = Vec::new();
    let mut c = base.clone();
    c.seeds = vec![1, 3];
    changed.push(c);
    let mut c = base.clone();
    c.probe_budget = Some(3_001);
    changed.push(c);
    let mut c = base.clone();
    c.confidence = 0.9;
    changed.push(c);
    let mut c = base.clone();
    c.grid_step = Some(100);
    changed.push(c);
    let mut c = base.clone();
    if let EnvironmentConfig::Gridworld(g) = &mut c.environment {
        g.slip = 0.2;
    }
    changed.push(c);
    let mut c = base.clone();
    c.policy = Some(PolicyConfig::Softmax {
        baseline: vrscp_core::estimators::Baseline::PerStepBatchMean,
    });
    changed.push(c);
    let mut c = base.clone();
    if let AlgorithmConfig::Vrscp(hp) = &c.algorithm {
        c.algorithm = AlgorithmConfig::Scrn(hp.clone());
    }
    changed.push(c);
    let mut c = base.clone();
    if let AlgorithmConfig::Vrscp(hp) = &mut c.algorithm {
        hp.epsilon = 0.006;
    }
    changed.push(c);
    let mut c = base.clone();
    if let AlgorithmConfig::Vrscp(hp) = &mut c.algorithm {
        hp.m = Some(0.04);
    }
    changed.push(c);
    let mut hashes: Vec<String> = changed.iter().map(|c| c.hash()).collect();
    assert!(hashes.iter().all(|x| *x != h));
    hashes.sort();
    hashes.dedup();
    assert_eq!(hashes.len(), changed.len());
}

#[test]
fn three_seeds_give_three_records_and_a_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "exp.toml", &small("vrscp", &[1, 2, 3]));
    let out = tmp.path().join("out");
    let o = vrscp(&["run", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(
        top_level_files(&out),
        ["manifest.json", "vrscp-seed1.jsonl", "vrscp-seed2.jsonl", "vrscp-seed3.jsonl"]
    );
    let manifest: Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    let expected = small("vrscp", &[1, 2, 3]).hash();
    assert_eq!(manifest["config_hash"], expected.as_str());
    assert_eq!(manifest["version"], env!("CARGO_PKG_VERSION"));
    assert!(manifest["wall_time_seconds"].as_f64().unwrap() >= 0.0);
    assert_eq!(manifest["failed_seeds"], serde_json::json!([]));
    for s in 1..=3 {
        let bytes = fs::read(out.join(format!("params/vrscp-seed{s}.params"))).unwrap();
        assert_eq!(&bytes[..4], b"VRSP");
    }
}

#[test]
fn reruns_are_byte_identical_across_worker_counts() {
    let tmp = tempfile::tempdir().unwrap();
    for alg in ["vrscp", "reinforce"] {
        let cfg = write_config(tmp.path(), "exp.toml", &small(alg, &[1, 2, 3, 4]));
        let mut dirs = Vec::new();
        for (k, workers) in ["1", "3", "1"].iter().enumerate() {
            let out = tmp.path().join(format!("{alg}-{k}"));
            let o = vrscp(&["run", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--workers", workers]);
            assert!(o.status.success(), "{}", stderr(&o));
            dirs.push(out);
        }
        for s in 1..=4 {
            for rel in [format!("{alg}-seed{s}.jsonl"), format!("params/{alg}-seed{s}.params")] {
                let a = fs::read(dirs[0].join(&rel)).unwrap();
                for d in &dirs[1..] {
                    assert_eq!(a, fs::read(d.join(&rel)).unwrap(), "{rel}");
                }
            }
        }
    }
}

#[test]
fn environment_variables_set_the_output_and_workers() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "exp.toml", &small("vrscp", &[5]));
    let out = tmp.path().join("from-env");
    let o = Command::new(env!("CARGO_BIN_EXE_vrscp"))
        .args(["run", cfg.to_str().unwrap()])
        .env("VRSCP_OUT_DIR", &out)
        .env("VRSCP_WORKERS", "2")
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let manifest: Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["workers"], 2);
}

#[test]
fn a_negative_epsilon_is_rejected_before_sampling() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = small("vrscp", &[1]);
    if let AlgorithmConfig::Vrscp(hp) = &mut cfg.algorithm {
        hp.epsilon = -0.01;
    }
    let path = tmp.path().join("neg.toml");
    fs::write(&path, toml::to_string(&cfg).unwrap()).unwrap();
    let out = tmp.path().join("out");
    let o = vrscp(&["run", path.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("epsilon"), "{}", stderr(&o));
    assert!(!out.exists());
}

#[test]
fn an_unknown_key_reports_its_line() {
    let tmp = tempfile::tempdir().unwrap();
    let text = small("vrscp", &[1]).to_toml().unwrap().replace("b_h = ", "bh = ");
    let path = tmp.path().join("typo.toml");
    fs::write(&path, text).unwrap();
    let o = vrscp(&["run", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("bh") && err.contains("line"), "{err}");
}

#[test]
fn an_aborted_run_keeps_its_partial_record_and_fails() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = preset("reacher", "reinforce").unwrap();
    cfg.seeds = vec![1];
    if let AlgorithmConfig::Reinforce(c) = &mut cfg.algorithm {
        // the first update overflows the parameters
        c.step_size = 1e308;
    }
    let path = write_config(tmp.path(), "boom.toml", &cfg);
    let out = tmp.path().join("out");
    let o = vrscp(&["run", path.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let text = fs::read_to_string(out.join("reinforce-seed1.jsonl")).unwrap();
    let last: Value = serde_json::from_str(text.lines().last().unwrap()).unwrap();
    assert_eq!(last["type"], "failure");
    assert!(last["message"].as_str().unwrap().contains("non-finite"));
    let manifest: Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["failed_seeds"], serde_json::json!([1]));
}

#[test]
fn eval_scores_ten_records_and_rejects_bad_globs() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("runs");
    for alg in ["vrscp", "reinforce"] {
        let cfg = write_config(tmp.path(), &format!("{alg}.toml"), &small(alg, &(1..=10).collect::<Vec<_>>()));
        let o = vrscp(&["run", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let report_dir = tmp.path().join("report");
    let glob = format!("{}/vrscp-seed*.jsonl", out.display());
    let o = vrscp(&["eval", &glob, "--n", "10", "--out", report_dir.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report: Value = serde_json::from_str(&fs::read_to_string(report_dir.join("vrscp-pr.json")).unwrap()).unwrap();
    assert_eq!(report["n"], 10);
    assert_eq!(report["algorithm"], "vrscp");
    let csv = fs::read_to_string(report_dir.join("vrscp-lci.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("probe,lci,mean,std"));
    assert_eq!(csv.lines().count() - 1, report["curve"].as_array().unwrap().len());

    let mixed = format!("{}/*-seed*.jsonl", out.display());
    let o = vrscp(&["eval", &mixed, "--n", "10", "--out", report_dir.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("single algorithm"), "{}", stderr(&o));

    let o = vrscp(&["eval", &glob, "--n", "11", "--out", report_dir.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("11 required"), "{}", stderr(&o));
}

#[test]
fn eval_reproduces_the_hand_fixture() {
    let tmp = tempfile::tempdir().unwrap();
    for rec in hand_fixture() {
        let f = fs::File::create(tmp.path().join(format!("fixture-seed{}.jsonl", rec.seed))).unwrap();
        rec.write_jsonl(f).unwrap();
    }
    let glob = format!("{}/fixture-*.jsonl", tmp.path().display());
    let o = vrscp(&["eval", &glob, "--n", "3", "--grid-step", "10", "--out", tmp.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report: Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("fixture-pr.json")).unwrap()).unwrap();
    assert!((report["pr"].as_f64().unwrap() - HAND_FIXTURE_PR).abs() <= 1e-12);
}

#[test]
fn an_unknown_suite_is_a_usage_error() {
    let o = vrscp(&["oracle-check", "unknown"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("possible values"), "{}", stderr(&o));
}

#[test]
fn oracle_check_all_writes_a_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let o = vrscp(&["oracle-check", "all", "--out", tmp.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}{}", String::from_utf8_lossy(&o.stdout), stderr(&o));
    let table = String::from_utf8_lossy(&o.stdout);
    assert!(table.lines().filter(|l| l.contains("PASS")).count() >= 8);
    let summary: Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("oracle-all.json")).unwrap()).unwrap();
    assert_eq!(summary["suite"], "all");
    assert_eq!(summary["passed"], true);
    let checks = summary["checks"].as_array().unwrap();
    let suites: Vec<&str> = checks.iter().map(|c| c["suite"].as_str().unwrap()).collect();
    for s in ["estimators", "cubic", "saddle", "eval"] {
        assert!(suites.contains(&s), "{s}");
    }
    for c in checks {
        assert!(c["name"].is_string() && c["detail"].is_string() && c["passed"].is_boolean());
    }
}

#[test]
fn presets_print_loadable_configs() {
    for name in PRESETS {
        let o = vrscp(&["preset", name, "--algorithm", "reinforce"]);
        assert!(o.status.success());
        let cfg = ExperimentConfig::from_toml(&String::from_utf8(o.stdout).unwrap()).unwrap();
        assert_eq!(cfg, preset(name, "reinforce").unwrap());
    }
    assert_eq!(vrscp(&["preset", "ant"]).status.code(), Some(2));
    let walker = preset("walker", "vrscp").unwrap();
    match walker.algorithm {
        AlgorithmConfig::Vrscp(hp) => assert_eq!((hp.l, hp.rho, hp.q), (50.0, 50.0, Some(2))),
        _ => unreachable!(),
    }
}
