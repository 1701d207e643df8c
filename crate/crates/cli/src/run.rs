//! Suite execution and report assembly.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::ops::{execute, OpOutput};
use crate::store;
use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    pub os: String,
    pub arch: String,
    pub version: String,
    pub threads: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub operations: usize,
    pub checks: usize,
    pub failed_enforced: usize,
    pub failed_recorded: usize,
    pub errors: usize,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: String,
    pub config_hash: String,
    /// Hash of the config hash and all operation outputs; timing and the
    /// environment stamp are left out so reruns compare equal.
    pub report_hash: String,
    pub seed: u64,
    pub tolerance_scale: f64,
    pub environment: Environment,
    pub wall_clock_seconds: f64,
    pub operation_seconds: BTreeMap<String, f64>,
    pub summary: Summary,
    pub operations: Vec<OpOutput>,
}

impl SuiteReport {
    pub fn exit_code(&self) -> i32 {
        if self.summary.pass {
            0
        } else {
            1
        }
    }
}

fn report_hash(config_hash: &str, ops: &[OpOutput]) -> String {
    let mut h = Sha256::new();
    h.update(config_hash.as_bytes());
    h.update(serde_json::to_vec(ops).expect("outputs serialize"));
    for o in ops {
        for f in &o.files {
            h.update(f.0.as_bytes());
            h.update(f.1.as_bytes());
        }
    }
    hex::encode(h.finalize())
}

/// Run every operation (on `jobs` workers; 0 lets rayon decide), then write
/// the report, CSV tables and stored objects under `<out>/<suite>`.
pub fn run_suite(cfg: &ExperimentConfig, out: &Path, jobs: usize) -> Result<(SuiteReport, PathBuf), CliError> {
    let start = Instant::now();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start {jobs} workers: {e}")))?;
    let timed: Vec<(OpOutput, f64)> = pool.install(|| {
        cfg.operations
            .par_iter()
            .map(|op| {
                let t = Instant::now();
                let o = execute(op, cfg.seed, cfg.tolerance_scale);
                (o, t.elapsed().as_secs_f64())
            })
            .collect()
    });
    let operation_seconds = timed.iter().map(|(o, s)| (o.id.clone(), *s)).collect();
    let outputs: Vec<OpOutput> = timed.into_iter().map(|(o, _)| o).collect();

    let checks: usize = outputs.iter().map(|o| o.checks.len()).sum();
    let failed = |enforced: bool| {
        outputs
            .iter()
            .flat_map(|o| &o.checks)
            .filter(|c| !c.pass && c.enforce == enforced)
            .count()
    };
    let errors = outputs.iter().filter(|o| o.error.is_some()).count();
    let summary = Summary {
        operations: outputs.len(),
        checks,
        failed_enforced: failed(true),
        failed_recorded: failed(false),
        errors,
        pass: failed(true) == 0 && errors == 0,
    };
    let config_hash = cfg.hash();
    let report = SuiteReport {
        suite: cfg.suite.clone(),
        report_hash: report_hash(&config_hash, &outputs),
        config_hash,
        seed: cfg.seed,
        tolerance_scale: cfg.tolerance_scale,
        environment: Environment {
            os: std::env::consts::OS.into(),
            arch: std::env::consts::ARCH.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            threads: pool.current_num_threads(),
        },
        wall_clock_seconds: start.elapsed().as_secs_f64(),
        operation_seconds,
        summary,
        operations: outputs,
    };
    let dir = out.join(&cfg.suite);
    write_outputs(cfg, &report, &dir)?;
    Ok((report, dir))
}

fn write_outputs(cfg: &ExperimentConfig, report: &SuiteReport, dir: &Path) -> Result<(), CliError> {
    // clear a previous run of the same suite, recognised by its report
    if dir.join("report.json").is_file() {
        std::fs::remove_dir_all(dir)?;
    }
    std::fs::create_dir_all(dir)?;
    store::write(&dir.join("config.json"), serde_json::to_string_pretty(cfg).expect("config serializes").as_bytes())?;
    store::write(&dir.join("report.json"), serde_json::to_string_pretty(report).expect("report serializes").as_bytes())?;
    for o in &report.operations {
        for t in &o.tables {
            store::write(&dir.join(format!("{}.{}.csv", o.id, t.name)), t.to_csv().as_bytes())?;
        }
        for (name, text) in &o.files {
            store::write(&dir.join(name), text.as_bytes())?;
        }
        for obj in &o.objects {
            store::save_object(dir, obj)?;
        }
    }
    Ok(())
}

/// One line per operation for the terminal.
pub fn summary_lines(report: &SuiteReport) -> Vec<String> {
    let mut lines: Vec<String> = report
        .operations
        .iter()
        .map(|o| {
            let tag = match (&o.error, o.passed()) {
                (Some(_), _) => "ERROR",
                (None, true) => "PASS",
                (None, false) => "FAIL",
            };
            let failing: Vec<&str> = o.checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect();
            let mut s = format!("{tag:5} {} [{}] {} checks", o.id, o.op, o.checks.len());
            if !failing.is_empty() {
                let shown = failing.iter().take(4).cloned().collect::<Vec<_>>().join(", ");
                let more = if failing.len() > 4 { format!(" and {} more", failing.len() - 4) } else { String::new() };
                s.push_str(&format!("; failing: {shown}{more}"));
                if !o.enforce {
                    s.push_str(" (not enforced)");
                }
            }
            if let Some(e) = &o.error {
                s.push_str(&format!("; {e}"));
            }
            s
        })
        .collect();
    let m = &report.summary;
    lines.push(format!(
        "suite {}: {} operations, {} checks, {} enforced failures, {} recorded failures, {} errors -> {}",
        report.suite,
        m.operations,
        m.checks,
        m.failed_enforced,
        m.failed_recorded,
        m.errors,
        if m.pass { "pass" } else { "fail" }
    ));
    lines
}
