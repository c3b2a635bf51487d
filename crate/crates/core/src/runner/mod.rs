//! Scenario runner: loads a `condgeo.scenario.v1` config, executes it under
//! its seed, and writes a deterministic `report.json` with CSV artifacts.
//! Wall-clock time goes to a separate `timing.json` so the report bytes
//! depend only on the config.

mod config;
mod report;
mod scenarios;
pub mod verify;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde_json::Value;

pub use config::{
    default_times, normal_quantiles, pair_from_rows, square, EncoderChoice, GenerationChoice, LabeledSource, MeasureSource,
    MetricConfig, OtSolver, PipelineScenario, Scenario, ScenarioConfig, SCENARIO_SCHEMA,
};
pub use report::{nums, stringify_numbers, Artifact, Check, Report, Series};

use crate::error::Error;
use crate::generator::num;
use crate::ot::DEFAULT_MAX_TUPLES;

pub const REPORT_SCHEMA: &str = "condgeo.report.v1";
pub const MAX_TUPLES_ENV: &str = "CONDGEO_MAX_TUPLES";

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("numerical error: {0}")]
    Numerical(String),
    #[error("unknown artifact '{0}'")]
    UnknownArtifact(String),
    #[error("{0} asserted check(s) failed")]
    ChecksFailed(usize),
    #[error("io error: {0}")]
    Io(String),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Data(_) => 3,
            RunError::Numerical(_) => 4,
            RunError::UnknownArtifact(_) => 5,
            RunError::ChecksFailed(_) | RunError::Io(_) => 1,
        }
    }

    /// Errors raised while reading input files.
    pub fn data(e: Error) -> Self {
        RunError::Data(e.to_string())
    }

    /// Errors in values written into the config itself.
    pub fn config(e: Error) -> Self {
        match e {
            Error::Solver(_) | Error::Infeasible(_) | Error::MaxIterExceeded(_) | Error::SingularCovariance => {
                RunError::Numerical(e.to_string())
            }
            _ => RunError::Config(e.to_string()),
        }
    }

    fn io(e: std::io::Error) -> Self {
        RunError::Io(e.to_string())
    }
}

/// Errors raised while executing a scenario on loaded inputs.
impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        match e {
            Error::WeightSum(_)
            | Error::NegativeWeight { .. }
            | Error::EmptySupport
            | Error::DimensionMismatch { .. }
            | Error::LabelMismatch(_)
            | Error::Data(_) => RunError::Data(e.to_string()),
            Error::InvalidArgument(_) | Error::OutOfRange(_) | Error::UnknownLabel(_) | Error::InstanceTooLarge { .. } => {
                RunError::Config(e.to_string())
            }
            Error::UnknownArtifact(name) => RunError::UnknownArtifact(name),
            Error::NotPsd(_)
            | Error::ZeroRow(_)
            | Error::NotInvertible(_)
            | Error::SingularCovariance
            | Error::MaxIterExceeded(_)
            | Error::Infeasible(_)
            | Error::Solver(_) => RunError::Numerical(e.to_string()),
        }
    }
}

/// Multimarginal tuple cap, overridable through `CONDGEO_MAX_TUPLES`.
pub fn max_tuples() -> Result<usize, RunError> {
    match std::env::var(MAX_TUPLES_ENV) {
        Ok(v) => v.trim().parse::<usize>().map_err(|_| RunError::Config(format!("{MAX_TUPLES_ENV}={v:?} is not a count"))),
        Err(_) => Ok(DEFAULT_MAX_TUPLES),
    }
}

/// The in-memory result of a run: the report document and every artifact
/// file by name.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub report: Report,
    pub report_json: String,
    pub files: Vec<(String, Vec<u8>)>,
}

/// Runs the scenario without touching the filesystem except to read inputs
/// relative to `base`.
pub fn execute(cfg: &ScenarioConfig, base: &Path) -> Result<Outcome, RunError> {
    let mut files = Vec::new();
    let report = scenarios::run(cfg, base, &mut files)?;
    let echo = serde_json::to_value(cfg).map_err(|e| RunError::Io(e.to_string()))?;
    let doc = report.to_json(REPORT_SCHEMA, cfg.seed, echo);
    let mut report_json = serde_json::to_string_pretty(&doc).map_err(|e| RunError::Io(e.to_string()))?;
    report_json.push('\n');
    Ok(Outcome { report, report_json, files })
}

/// Where a run writes: `--out`, else the config's `output_dir` (relative to
/// the config), else `out/<config stem>` next to the config.
pub fn output_dir(cfg: &ScenarioConfig, config_path: &Path, out: Option<&Path>) -> PathBuf {
    let base = config_path.parent().unwrap_or(Path::new("."));
    match (out, &cfg.output_dir) {
        (Some(o), _) => o.to_path_buf(),
        (None, Some(d)) => base.join(d),
        (None, None) => {
            let stem = config_path.file_stem().and_then(|s| s.to_str()).unwrap_or("scenario");
            base.join("out").join(stem)
        }
    }
}

/// Loads, runs and writes one scenario. Returns the outcome and the output
/// directory; asserted check failures surface as `ChecksFailed` after the
/// files are written.
pub fn run_scenario(config_path: &Path, out: Option<&Path>, seed: Option<u64>) -> Result<(Outcome, PathBuf), RunError> {
    let mut cfg = ScenarioConfig::from_path(config_path)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let dir = output_dir(&cfg, config_path, out);
    let start = Instant::now();
    let outcome = execute(&cfg, config_path.parent().unwrap_or(Path::new(".")))?;
    let elapsed = start.elapsed().as_secs_f64();
    std::fs::create_dir_all(&dir).map_err(RunError::io)?;
    for (name, bytes) in &outcome.files {
        std::fs::write(dir.join(name), bytes).map_err(RunError::io)?;
    }
    std::fs::write(dir.join("report.json"), &outcome.report_json).map_err(RunError::io)?;
    let timing = serde_json::json!({ "wall_clock_seconds": num(elapsed), "report": "report.json" });
    let timing = serde_json::to_string_pretty(&timing).map_err(|e| RunError::Io(e.to_string()))? + "\n";
    std::fs::write(dir.join("timing.json"), timing).map_err(RunError::io)?;
    Ok((outcome, dir))
}

fn read_cloud(path: &Path) -> Result<crate::measures::DiscreteMeasure, RunError> {
    crate::measures::measure_from_csv_path(path).map_err(RunError::data)
}

/// Writes the long-format CSV `series,t,x1..xd,weight` for one artifact of a
/// saved report. Coupling matrices are written as `(row, col)` points
/// weighted by their mass, with zero entries skipped.
pub fn emit_plot_data<W: Write>(report_path: &Path, which: &str, out: W) -> Result<(), RunError> {
    let text = std::fs::read_to_string(report_path).map_err(RunError::io)?;
    let doc: Value = serde_json::from_str(&text).map_err(|e| RunError::Data(format!("{}: {e}", report_path.display())))?;
    let dir = report_path.parent().unwrap_or(Path::new("."));
    let art = doc.get("artifacts").and_then(|a| a.get(which)).ok_or_else(|| RunError::UnknownArtifact(which.into()))?;
    let kind = art.get("kind").and_then(Value::as_str).unwrap_or("");
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| RunError::Io(e.to_string());
    match kind {
        "clouds" => {
            let series = art.get("series").and_then(Value::as_array).ok_or_else(|| RunError::Data("artifact has no series".into()))?;
            let mut blocks = Vec::new();
            for s in series {
                let name = s.get("name").and_then(Value::as_str).unwrap_or("").to_string();
                let t = s.get("t").and_then(Value::as_str).unwrap_or("").to_string();
                let file = s.get("file").and_then(Value::as_str).ok_or_else(|| RunError::Data("series without file".into()))?;
                blocks.push((name, t, read_cloud(&dir.join(file))?));
            }
            let d = blocks.iter().map(|b| b.2.dim()).max().unwrap_or(0);
            let mut header = vec!["series".to_string(), "t".to_string()];
            header.extend((1..=d).map(|k| format!("x{k}")));
            header.push("weight".into());
            w.write_record(&header).map_err(csv_err)?;
            for (name, t, m) in &blocks {
                for (x, wt) in m.iter() {
                    let mut rec = vec![name.clone(), t.clone()];
                    rec.extend(x.iter().map(|v| num(*v)));
                    rec.extend(std::iter::repeat_n(String::new(), d - x.len()));
                    rec.push(num(wt));
                    w.write_record(&rec).map_err(csv_err)?;
                }
            }
        }
        "matrix" => {
            let file = art.get("file").and_then(Value::as_str).ok_or_else(|| RunError::Data("matrix without file".into()))?;
            let mut rdr = csv::Reader::from_path(dir.join(file)).map_err(|e| RunError::Data(e.to_string()))?;
            w.write_record(["series", "t", "x1", "x2", "weight"]).map_err(csv_err)?;
            for (i, rec) in rdr.records().enumerate() {
                let rec = rec.map_err(|e| RunError::Data(e.to_string()))?;
                for (j, v) in rec.iter().enumerate() {
                    let mass: f64 = v.parse().map_err(|_| RunError::Data(format!("bad matrix entry {v:?}")))?;
                    if mass != 0.0 {
                        w.write_record([which.to_string(), String::new(), i.to_string(), j.to_string(), num(mass)]).map_err(csv_err)?;
                    }
                }
            }
        }
        _ => return Err(RunError::UnknownArtifact(format!("{which} (not plottable)"))),
    }
    w.flush().map_err(RunError::io)
}
