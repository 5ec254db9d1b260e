//! Acceptance suite: one PASS/FAIL line per criterion, then the detail
//! lines of every criterion. Exits nonzero when any criterion fails.
//!
//! Pass criterion numbers as arguments to run a subset, e.g.
//! `cargo test -p polya-profile-cli --test acceptance -- 6 11`.

use std::process::Command;
use std::time::{Duration, Instant};

use polya_profile::verify::{run_criterion, VerifyContext, VerifyOptions};

const BIN: &str = env!("CARGO_BIN_EXE_polya-profile");

const CONSTANTS_BUDGET: Duration = Duration::from_secs(30);
const COVARIANCE_BUDGET: Duration = Duration::from_secs(5 * 60);
const QUICK_BUDGET: Duration = Duration::from_secs(10 * 60);

struct Outcome {
    id: u32,
    title: String,
    passed: bool,
    lines: Vec<String>,
}

fn budget_line(ok: &mut bool, elapsed: Duration, budget: Duration) -> String {
    let within = elapsed < budget;
    *ok &= within;
    format!(
        "runtime {:.1} s (budget {} s) {}",
        elapsed.as_secs_f64(),
        budget.as_secs(),
        if within { "ok" } else { "FAILED" }
    )
}

fn run_bin(args: &[&str]) -> (bool, Vec<u8>, String) {
    let out = Command::new(BIN).args(args).output().expect("binary runs");
    (out.status.success(), out.stdout, String::from_utf8_lossy(&out.stderr).into_owned())
}

/// Criterion 1 also goes through the `constants` command on one thread.
fn constants_via_cli(ctx: &VerifyContext, opts: &VerifyOptions) -> Outcome {
    let report = run_criterion(1, opts, ctx).expect("criterion 1 runs");
    let mut passed = report.passed;
    let mut lines = report.lines;
    let start = Instant::now();
    let (ok, stdout, stderr) = run_bin(&["constants", "--order", "400", "--degrees", "1..3", "--threads", "1", "--no-timestamp"]);
    let elapsed = start.elapsed();
    passed &= ok;
    if !ok {
        lines.push(format!("constants command failed: {stderr}"));
    } else {
        let v: serde_json::Value = serde_json::from_slice(&stdout).expect("constants prints json");
        for (key, target, tol) in [("rho", 0.3383219, 1e-5), ("b", 2.681, 1e-2), ("C", 7.758, 1e-3)] {
            let got = v["data"][key]["value"].as_f64().unwrap_or(f64::NAN);
            let within = (got - target).abs() <= tol;
            passed &= within;
            lines.push(format!("cli {key} = {got:.10} {}", if within { "ok" } else { "FAILED" }));
        }
    }
    lines.push(budget_line(&mut passed, elapsed, CONSTANTS_BUDGET));
    Outcome { id: 1, title: report.title.into(), passed, lines }
}

fn library_criterion(id: u32, ctx: &VerifyContext, opts: &VerifyOptions) -> Outcome {
    let start = Instant::now();
    match run_criterion(id, opts, ctx) {
        Ok(report) => {
            let mut passed = report.passed;
            let mut lines = report.lines;
            if id == 6 {
                lines.push(budget_line(&mut passed, start.elapsed(), COVARIANCE_BUDGET));
            }
            Outcome { id, title: report.title.into(), passed, lines }
        }
        Err(e) => Outcome { id, title: format!("criterion {id}"), passed: false, lines: vec![format!("error: {e}")] },
    }
}

fn determinism() -> Outcome {
    let args = ["verify", "--quick", "--threads", "1", "--no-timestamp"];
    let mut passed = true;
    let mut lines = Vec::new();
    let mut outputs = Vec::new();
    for run in 1..=2 {
        let start = Instant::now();
        let (ok, stdout, stderr) = run_bin(&args);
        let elapsed = start.elapsed();
        passed &= ok;
        lines.push(format!("run {run}: exit {} ({} bytes)", if ok { "0" } else { "nonzero" }, stdout.len()));
        if !ok {
            lines.push(format!("stderr: {}", stderr.trim()));
        }
        lines.push(budget_line(&mut passed, elapsed, QUICK_BUDGET));
        outputs.push(stdout);
    }
    let same = outputs[0] == outputs[1];
    passed &= same;
    lines.push(format!("outputs byte-identical: {}", if same { "ok" } else { "FAILED" }));
    Outcome { id: 11, title: "determinism of verify --quick".into(), passed, lines }
}

fn main() {
    let wanted: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    // the libtest flags cargo forwards (--list, --format ...) are ignored
    if std::env::args().any(|a| a == "--list") {
        for id in 1..=11 {
            println!("criterion_{id}: test");
        }
        return;
    }
    let ids: Vec<u32> = if wanted.is_empty() { (1..=11).collect() } else { wanted };
    let ctx = VerifyContext::new();
    let opts = VerifyOptions::default();
    let mut outcomes = Vec::new();
    for id in ids {
        let outcome = match id {
            1 => constants_via_cli(&ctx, &opts),
            11 => determinism(),
            2..=10 => library_criterion(id, &ctx, &opts),
            _ => continue,
        };
        println!("criterion {:>2} {}: {}", outcome.id, if outcome.passed { "PASS" } else { "FAIL" }, outcome.title);
        outcomes.push(outcome);
    }
    println!();
    for o in &outcomes {
        println!("criterion {} details", o.id);
        for l in &o.lines {
            println!("    {l}");
        }
    }
    let failed: Vec<u32> = outcomes.iter().filter(|o| !o.passed).map(|o| o.id).collect();
    println!();
    println!("acceptance: {} of {} criteria passed", outcomes.len() - failed.len(), outcomes.len());
    if !failed.is_empty() {
        println!("failing criteria: {failed:?}");
        std::process::exit(1);
    }
}
