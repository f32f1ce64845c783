//! Run artifacts: metrics.json, loss_trace.csv, predictions.csv and the
//! per-context parameter and Fisher snapshots.
//!
//! Every file goes through [`write_atomic`] so an interrupted run never
//! leaves a truncated artifact behind.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use cel_core::data::TimeSeries;
use cel_core::{ExperimentConfig, MetricsReport, ParameterSet, RunLog};
use serde::{Deserialize, Serialize, Serializer};
use serde_json::value::RawValue;

use crate::error::{HarnessError, Result};

pub const METRICS_FILE: &str = "metrics.json";
pub const LOSS_TRACE_FILE: &str = "loss_trace.csv";
pub const PREDICTIONS_FILE: &str = "predictions.csv";
pub const FIM_EXPORT_FILE: &str = "fim_export.csv";

pub fn params_snapshot_path(dir: &Path, context: usize) -> PathBuf {
    dir.join(format!("params_ctx_{context}.snapshot"))
}

pub fn fisher_snapshot_path(dir: &Path, context: usize) -> PathBuf {
    dir.join(format!("fisher_ctx_{context}.snapshot"))
}

/// Writes `bytes` to a sibling temp file, syncs it, then renames over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let file_name = path
        .file_name()
        .ok_or_else(|| HarnessError::Usage(format!("not a file path: {}", path.display())))?;
    let tmp = path.with_file_name(format!(
        ".{}.tmp-{}",
        file_name.to_string_lossy(),
        std::process::id()
    ));
    let result = (|| {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        std::fs::rename(&tmp, path)
    })();
    if let Err(e) = result {
        let _ = std::fs::remove_file(&tmp);
        return Err(HarnessError::io(path, e));
    }
    Ok(())
}

pub fn write_snapshot_atomic(path: &Path, tensors: &ParameterSet) -> Result<()> {
    let mut buf = Vec::new();
    tensors
        .write_snapshot(&mut buf)
        .map_err(|e| HarnessError::io(path, e))?;
    write_atomic(path, &buf)
}

/// An `f64` that serializes with 17 significant digits (`d.dddddddddddddddde±x`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sci(pub f64);

pub fn sci(x: f64) -> String {
    format!("{x:.16e}")
}

impl Serialize for Sci {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if !self.0.is_finite() {
            return Err(serde::ser::Error::custom(format!(
                "cannot serialize non-finite {}",
                self.0
            )));
        }
        RawValue::from_string(sci(self.0))
            .map_err(serde::ser::Error::custom)?
            .serialize(s)
    }
}

fn sci_vec(v: &[f64]) -> Vec<Sci> {
    v.iter().copied().map(Sci).collect()
}

#[derive(Debug, Serialize)]
struct ContextStatsOut<'a> {
    context_id: usize,
    start_index: usize,
    end_index: usize,
    start_label: &'a str,
    end_label: &'a str,
    points: usize,
    mean: Sci,
    std: Sci,
    n_train: usize,
    n_test: usize,
}

#[derive(Debug, Serialize)]
struct MetricsOut<'a> {
    config: ConfigJson,
    config_fingerprint: &'a str,
    eval_r2: Vec<Sci>,
    reeval_r2: Vec<Sci>,
    forgetting: Vec<Sci>,
    memory_stability: Sci,
    mean_eval_r2: Sci,
    per_context_stats: Vec<ContextStatsOut<'a>>,
}

/// Parsed back from metrics.json.
#[derive(Debug, Clone, Deserialize, PartialEq)]
pub struct MetricsFile {
    pub config: serde_json::Map<String, serde_json::Value>,
    pub config_fingerprint: String,
    pub eval_r2: Vec<f64>,
    pub reeval_r2: Vec<f64>,
    pub forgetting: Vec<f64>,
    pub memory_stability: f64,
    pub mean_eval_r2: f64,
    pub per_context_stats: Vec<serde_json::Value>,
}

impl MetricsFile {
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        serde_json::from_str(&text).map_err(|source| HarnessError::Json {
            path: path.to_path_buf(),
            source,
        })
    }
}

/// Config as an ordered JSON object: integers as numbers, reals in 17-digit form.
#[derive(Debug)]
pub struct ConfigJson(Vec<(&'static str, Box<RawValue>)>);

impl Serialize for ConfigJson {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeMap;
        let mut map = s.serialize_map(Some(self.0.len()))?;
        for (k, v) in &self.0 {
            map.serialize_entry(k, v)?;
        }
        map.end()
    }
}

pub fn config_json(cfg: &ExperimentConfig) -> ConfigJson {
    let entries = cfg
        .entries()
        .into_iter()
        .map(|(key, value)| {
            let raw = match key {
                "lr" | "lambda" | "clip_norm" => sci(value.parse().expect("canonical float")),
                "optimizer" | "train_frac" | "normalizer_scope" => {
                    serde_json::to_string(&value).expect("string")
                }
                _ => value,
            };
            (key, RawValue::from_string(raw).expect("valid JSON scalar"))
        })
        .collect();
    ConfigJson(entries)
}

pub fn metrics_json(
    report: &MetricsReport,
    log: &RunLog,
    series: &TimeSeries,
    cfg: &ExperimentConfig,
) -> Result<String> {
    let per_context_stats = log
        .contexts
        .iter()
        .map(|c| ContextStatsOut {
            context_id: c.id,
            start_index: c.raw_span.start,
            end_index: c.raw_span.end,
            start_label: &series.timestamps[c.raw_span.start],
            end_label: &series.timestamps[c.raw_span.end - 1],
            points: c.raw_span.len(),
            mean: Sci(c.stats.mean),
            std: Sci(c.stats.std),
            n_train: c.n_train,
            n_test: c.n_test,
        })
        .collect();
    let out = MetricsOut {
        config: config_json(cfg),
        config_fingerprint: &report.config_fingerprint,
        eval_r2: sci_vec(&report.eval_r2),
        reeval_r2: sci_vec(&report.reeval_r2),
        forgetting: sci_vec(&report.forgetting),
        memory_stability: Sci(report.memory_stability),
        mean_eval_r2: Sci(report.mean_eval_r2()),
        per_context_stats,
    };
    let mut text = serde_json::to_string_pretty(&out).map_err(|source| HarnessError::Json {
        path: PathBuf::from(METRICS_FILE),
        source,
    })?;
    text.push('\n');
    Ok(text)
}

pub fn loss_trace_csv(log: &RunLog) -> String {
    let mut out = String::from("context_id,epoch,mse,penalty,regularized_loss\n");
    for e in &log.loss_trace {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            e.context,
            e.epoch,
            sci(e.mse),
            sci(e.penalty),
            sci(e.regularized)
        );
    }
    out
}

/// Test-split predictions for both phases, in normalized and raw units.
pub fn predictions_csv(log: &RunLog, series: &TimeSeries) -> String {
    let norm = log.normalizer;
    let mut out = String::from(
        "context_id,phase,sample,date,target,prediction,target_raw,prediction_raw\n",
    );
    for ctx in &log.predictions {
        for (phase, preds) in [("eval", &ctx.eval), ("reeval", &ctx.reeval)] {
            for (k, (&y, &p)) in ctx.targets.iter().zip(preds.iter()).enumerate() {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{},{}",
                    ctx.context,
                    phase,
                    k,
                    series.timestamps[ctx.target_indices[k]],
                    sci(y),
                    sci(p),
                    sci(norm.denormalize(y)),
                    sci(norm.denormalize(p)),
                );
            }
        }
    }
    out
}
