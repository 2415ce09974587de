//! Experiment runner for `heatobs-core`: a JSON config selects one of five
//! experiment families; a run writes CSV tables, a `summary.json` with every
//! fitted constant and invariant check, and a plain-text `run.log`.

// `!(x > 0.0)` is the NaN-rejecting form used for argument checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod experiments;
pub mod io;
pub mod model;

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use config::{ConfigError, Experiment, ExperimentConfig};

pub const ARTIFACT_VERSION: &str = concat!("heatobs/", env!("CARGO_PKG_VERSION"));
pub const OUT_DIR_ENV: &str = "HEATOBS_OUT_DIR";

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{context}: {source}")]
    Core {
        context: &'static str,
        source: heatobs_core::Error,
    },
    #[error("input: {0}")]
    Input(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("thread pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
    #[error("internal: {0}")]
    Internal(String),
}

/// Attaches the module that raised a core error.
pub trait Context<T> {
    fn context(self, what: &'static str) -> Result<T, RunError>;
}

impl<T> Context<T> for heatobs_core::Result<T> {
    fn context(self, what: &'static str) -> Result<T, RunError> {
        self.map_err(|source| RunError::Core {
            context: what,
            source,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// Measured value; `None` when it is not finite.
    pub value: Option<f64>,
    pub threshold: Option<f64>,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub artifact_version: String,
    pub config_hash: String,
    pub experiment: String,
    pub seed: Option<u64>,
    pub passed: bool,
    pub checks: Vec<Check>,
    pub results: serde_json::Value,
    pub files: Vec<String>,
}

impl Summary {
    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

/// Mutable state of one run: artifact directory, checks and log lines.
pub struct Run {
    dir: PathBuf,
    checks: Vec<Check>,
    files: Vec<String>,
    log: Vec<String>,
    start: Instant,
    pub seed: Option<u64>,
}

impl Run {
    fn new(dir: PathBuf, seed: Option<u64>) -> Self {
        Self {
            dir,
            checks: Vec::new(),
            files: Vec::new(),
            log: Vec::new(),
            start: Instant::now(),
            seed,
        }
    }

    pub fn note(&mut self, msg: impl Into<String>) {
        let msg = msg.into();
        log::info!("{msg}");
        self.log.push(format!(
            "[{:9.3}s] {msg}",
            self.start.elapsed().as_secs_f64()
        ));
    }

    pub fn table(
        &mut self,
        name: &str,
        header: &[&str],
        rows: &[Vec<io::Cell>],
    ) -> Result<(), RunError> {
        io::write_table(&self.dir.join(name), header, rows)?;
        self.files.push(name.to_string());
        self.note(format!("wrote {name} ({} rows)", rows.len()));
        Ok(())
    }

    /// Records `value <= threshold` (or the given verdict) under `name`.
    pub fn check(
        &mut self,
        name: &str,
        passed: bool,
        value: f64,
        threshold: f64,
        detail: impl Into<String>,
    ) {
        let detail = detail.into();
        self.note(format!(
            "check {name}: {} (value {value:e}, threshold {threshold:e}) {detail}",
            if passed { "pass" } else { "FAIL" }
        ));
        self.checks.push(Check {
            name: name.into(),
            passed,
            value: finite(value),
            threshold: finite(threshold),
            detail,
        });
    }

    pub fn check_le(&mut self, name: &str, value: f64, threshold: f64, detail: impl Into<String>) {
        self.check(name, value <= threshold, value, threshold, detail);
    }

    pub fn flag(&mut self, name: &str, passed: bool, detail: impl Into<String>) {
        self.check(name, passed, f64::NAN, f64::NAN, detail);
    }
}

/// SHA-256 of the canonical config (sorted keys, defaults filled in, output
/// directory left out) plus the bytes of any coefficient table it reads.
pub fn config_hash(cfg: &ExperimentConfig) -> Result<String, RunError> {
    let mut v = serde_json::to_value(cfg)?;
    if let Some(m) = v.as_object_mut() {
        m.remove("output_dir");
    }
    let mut h = Sha256::new();
    h.update(serde_json::to_vec(&v)?);
    if let config::CoefficientConfig::Table { path, .. } = &cfg.coefficients {
        h.update(std::fs::read(cfg.base_dir.join(path))?);
    }
    Ok(h.finalize().iter().map(|b| format!("{b:02x}")).collect())
}

/// `--out` (or its environment variable) first, then the config, then
/// `heatobs-out` in the working directory.
pub fn resolve_out_dir(flag: Option<&Path>, cfg: &ExperimentConfig) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("heatobs-out"))
}

/// Runs the experiment into `out`, using at most `threads` workers (all
/// cores when `None`).
pub fn run(
    cfg: &ExperimentConfig,
    out: &Path,
    threads: Option<usize>,
) -> Result<Summary, RunError> {
    cfg.validate()?;
    std::fs::create_dir_all(out)?;
    let hash = config_hash(cfg)?;
    let mut run = Run::new(out.to_path_buf(), cfg.seed);
    run.note(format!(
        "{ARTIFACT_VERSION} {} config {hash}",
        cfg.experiment.name()
    ));
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        pool = pool.num_threads(n.max(1));
    }
    let pool = pool.build()?;
    run.note(format!("{} worker threads", pool.current_num_threads()));
    let results = pool.install(|| experiments::dispatch(&mut run, cfg));
    let results = match results {
        Ok(v) => v,
        Err(e) => {
            run.note(format!("error: {e}"));
            write_log(&run)?;
            return Err(e);
        }
    };
    let passed = run.checks.iter().all(|c| c.passed);
    run.note(format!(
        "{} of {} checks passed",
        run.checks.iter().filter(|c| c.passed).count(),
        run.checks.len()
    ));
    let mut files = run.files.clone();
    files.extend(["summary.json".to_string(), "run.log".to_string()]);
    let summary = Summary {
        artifact_version: ARTIFACT_VERSION.into(),
        config_hash: hash,
        experiment: cfg.experiment.name().into(),
        seed: cfg.seed,
        passed,
        checks: run.checks.clone(),
        results,
        files,
    };
    let mut text = serde_json::to_string_pretty(&summary)?;
    text.push('\n');
    std::fs::write(out.join("summary.json"), text)?;
    write_log(&run)?;
    Ok(summary)
}

fn write_log(run: &Run) -> Result<(), RunError> {
    let mut text = run.log.join("\n");
    text.push('\n');
    std::fs::write(run.dir.join("run.log"), text)?;
    Ok(())
}
