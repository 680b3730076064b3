//! End-to-end behaviour of the `rfk` binary: output contract, exit codes and
//! determinism.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use proptest::prelude::*;
use rfk_cli::config::Config;
use rfk_cli::csv::{COLUMNS, FORMAT_TAG};

struct Scratch(PathBuf);

impl Scratch {
    fn new(tag: &str) -> Self {
        let dir = std::env::temp_dir().join(format!("rfk-cli-{tag}-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        Scratch(dir)
    }

    fn file(&self, name: &str, text: &str) -> PathBuf {
        let p = self.0.join(name);
        std::fs::write(&p, text).unwrap();
        p
    }
}

impl Drop for Scratch {
    fn drop(&mut self) {
        let _ = std::fs::remove_dir_all(&self.0);
    }
}

fn rfk(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rfk")).args(args).output().unwrap()
}

fn arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Splits a data row on commas outside quotes.
fn fields(line: &str) -> Vec<String> {
    let mut out = vec![String::new()];
    let mut quoted = false;
    for ch in line.chars() {
        match ch {
            '"' => quoted = !quoted,
            ',' if !quoted => out.push(String::new()),
            c => out.last_mut().unwrap().push(c),
        }
    }
    out
}

const INTERVAL: &str = "experiment = estimate\nmodel = euclidean1\ndomain.kind = interval\ndomain.radius = 1\n\
                        lambda.re = 1\nsim.dt = 1e-4\nmc.paths = 40000\n";

#[test]
fn estimate_on_the_interval_matches_the_sech_oracle() {
    let s = Scratch::new("estimate");
    let cfg = s.file("interval.cfg", INTERVAL);
    let out = s.0.join("h.csv");
    let run = rfk(&["estimate", "--config", arg(&cfg), "--out", arg(&out)]);
    assert_eq!(run.status.code(), Some(0), "{}", String::from_utf8_lossy(&run.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some(FORMAT_TAG));
    assert_eq!(lines.next(), Some(COLUMNS.join(",").as_str()));
    let row = fields(lines.next().unwrap());
    assert_eq!(row.len(), COLUMNS.len());
    let col = |name: &str| &row[COLUMNS.iter().position(|c| *c == name).unwrap()];
    let mean: f64 = col("value_re").parse().unwrap();
    let reference: f64 = col("reference").parse().unwrap();
    let se: f64 = col("se_re").parse().unwrap();
    assert!((reference - 1.0 / 1f64.cosh()).abs() < 1e-6);
    assert!((mean - 0.6480543).abs() <= 3.0 * se + 0.005, "mean {mean} se {se}");
    assert_eq!(col("horizon_mass").parse::<f64>().unwrap(), 0.0);
    assert_eq!(col("n"), "40000");
    assert_eq!(col("pass"), "PASS");
}

#[test]
fn verify_kernels_passes_without_a_config() {
    let run = rfk(&["verify-kernels"]);
    let text = String::from_utf8(run.stdout).unwrap();
    assert_eq!(run.status.code(), Some(0), "{text}");
    assert!(text.starts_with(FORMAT_TAG));
    for model in ["euclidean2", "hyperbolic_disk2", "hyperbolic3"] {
        assert!(text.contains(&format!("kernelcheck,short_bound,{model}")), "{model} missing");
    }
    assert!(!text.contains("FAIL"));
}

#[test]
fn malformed_config_exits_nonzero_and_writes_nothing() {
    let s = Scratch::new("malformed");
    let out = s.0.join("h.csv");
    for (name, text) in [
        ("no-equals.cfg", "model euclidean1\n"),
        ("unknown.cfg", "colour = red\n"),
        ("bad-number.cfg", "sim.dt = soon\n"),
        ("no-domain.cfg", "model = euclidean1\n"),
    ] {
        let cfg = s.file(name, text);
        let run = rfk(&["estimate", "--config", arg(&cfg), "--out", arg(&out)]);
        assert_eq!(run.status.code(), Some(2), "{name}");
        assert!(!String::from_utf8_lossy(&run.stderr).is_empty(), "{name}: no diagnostic");
        assert!(!out.exists(), "{name}: wrote output");
        assert!(!out.with_extension("csv.partial").exists(), "{name}: left a partial file");
    }
}

#[test]
fn seed_flag_overrides_the_file_and_reruns_are_identical() {
    let s = Scratch::new("seed");
    let cfg = s.file("interval.cfg", &INTERVAL.replace("40000", "2000"));
    let run = |seed: &str, threads: &str| {
        let out = rfk(&["estimate", "--config", arg(&cfg), "--seed", seed, "--threads", threads]);
        assert!(out.status.success());
        out.stdout
    };
    let a = run("7", "1");
    assert_eq!(a, run("7", "2"));
    assert_ne!(a, run("8", "1"));
    let text = String::from_utf8(a).unwrap();
    assert_eq!(fields(text.lines().nth(2).unwrap())[4], "7");
}

#[test]
fn thread_count_env_fallback_is_validated() {
    let out = Command::new(env!("CARGO_BIN_EXE_rfk"))
        .arg("kernelcheck")
        .env("RFK_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn eigenscan_reports_the_limit_gap_as_a_failure() {
    let s = Scratch::new("eigenscan");
    let cfg = s.file("scan.cfg", "model = hyperbolic_disk2\ncheck.tol = 0.02\n");
    let run = rfk(&["eigenscan", "--config", arg(&cfg)]);
    assert_eq!(run.status.code(), Some(1));
    let text = String::from_utf8(run.stdout).unwrap();
    assert!(text.contains("ordering") && text.contains("PASS"));
    assert!(text.lines().any(|l| l.contains(",limit,") && l.ends_with(",FAIL,")));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn canonical_form_round_trips(
        entries in proptest::collection::btree_map("[a-z]{1,6}\\.[a-z_]{1,8}", "[A-Za-z0-9.+-]{1,10}", 0..8)
    ) {
        let text: String = entries.iter().map(|(k, v)| format!("{k} = {v}\n")).collect();
        let a = Config::parse(&text).unwrap();
        let b = Config::parse(&a.canonical()).unwrap();
        prop_assert_eq!(a.canonical(), b.canonical());
        prop_assert_eq!(a.hash(), b.hash());
    }

    #[test]
    fn entry_order_does_not_change_the_hash(
        entries in proptest::collection::btree_map("[a-z]{1,6}\\.[a-z]{1,6}", "[0-9]{1,6}", 1..8)
    ) {
        let forward: String = entries.iter().map(|(k, v)| format!("{k}={v}\n")).collect();
        let backward: String = entries.iter().rev().map(|(k, v)| format!("  {k} =  {v}\n")).collect();
        prop_assert_eq!(Config::parse(&forward).unwrap().hash(), Config::parse(&backward).unwrap().hash());
    }
}
