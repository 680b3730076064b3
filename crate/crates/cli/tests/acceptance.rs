//! The full acceptance suite at its stated sample sizes, plus the
//! reproducibility criterion, which drives the `rfk` binary twice.
//!
//! Exits nonzero if any criterion outside `KNOWN_UNATTAINABLE` fails, or if a
//! known-unattainable one unexpectedly passes (the list would then be stale).

use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::Instant;

use rfk_cli::accept::{run_all, AcceptOptions, KNOWN_UNATTAINABLE};

/// Path-count multiplier for the two reproducibility runs; small enough that
/// both finish in seconds while still exercising every Monte Carlo criterion.
const REPRO_SCALE: f64 = 0.002;

fn accept_csv(dir: &Path, threads: usize) -> Result<Vec<u8>, String> {
    let config = dir.join("accept.cfg");
    std::fs::write(&config, format!("accept.scale = {REPRO_SCALE}\nsim.seed = 20241\n")).map_err(|e| e.to_string())?;
    let out = dir.join(format!("accept-{threads}.csv"));
    // the exit status reflects the verdicts, which are not under test here
    let status = Command::new(env!("CARGO_BIN_EXE_rfk"))
        .arg("accept")
        .arg("--config")
        .arg(&config)
        .arg("--threads")
        .arg(threads.to_string())
        .arg("--out")
        .arg(&out)
        .stderr(std::process::Stdio::null())
        .status()
        .map_err(|e| e.to_string())?;
    if status.code().is_none_or(|c| c > 1) {
        return Err(format!("rfk accept --threads {threads} ended with {status}"));
    }
    std::fs::read(&out).map_err(|e| e.to_string())
}

fn reproducibility() -> (bool, String) {
    let dir = std::env::temp_dir().join(format!("rfk-accept-{}", std::process::id()));
    if let Err(e) = std::fs::create_dir_all(&dir) {
        return (false, e.to_string());
    }
    let result = accept_csv(&dir, 1).and_then(|a| accept_csv(&dir, 3).map(|b| (a, b)));
    let _ = std::fs::remove_dir_all(&dir);
    match result {
        Ok((a, b)) if a == b => (true, format!("{} bytes identical across 1 and 3 threads", a.len())),
        Ok((a, b)) => (false, format!("outputs differ ({} vs {} bytes)", a.len(), b.len())),
        Err(e) => (false, e),
    }
}

fn main() -> ExitCode {
    let start = Instant::now();
    let opts = AcceptOptions {
        scale: 1.0,
        master_seed: 0,
    };
    let mut verdicts: Vec<(u32, bool)> = Vec::new();
    let criteria = run_all(&opts, |c| println!("{}", c.line()));
    verdicts.extend(criteria.iter().map(|c| (c.id, c.pass)));

    let (pass, summary) = reproducibility();
    println!(
        "criterion 14 {}: byte-identical CSV across thread counts ({summary})",
        if pass { "PASS" } else { "FAIL" }
    );
    verdicts.push((14, pass));

    let unexpected: Vec<u32> = verdicts
        .iter()
        .filter(|(id, pass)| !pass && !KNOWN_UNATTAINABLE.contains(id))
        .map(|(id, _)| *id)
        .collect();
    let stale: Vec<u32> = verdicts
        .iter()
        .filter(|(id, pass)| *pass && KNOWN_UNATTAINABLE.contains(id))
        .map(|(id, _)| *id)
        .collect();
    let passed = verdicts.iter().filter(|(_, p)| *p).count();
    println!(
        "acceptance: {passed}/{} PASS, known unattainable {:?}, {:.0}s",
        verdicts.len(),
        KNOWN_UNATTAINABLE,
        start.elapsed().as_secs_f64()
    );
    if unexpected.is_empty() && stale.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("acceptance: unexpected failures {unexpected:?}, stale unattainable entries {stale:?}");
        ExitCode::FAILURE
    }
}
