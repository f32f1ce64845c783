//! Per-context Fisher export: one row per (context, parameter coordinate).

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use cel_core::ParameterSet;

use crate::error::{HarnessError, Result};
use crate::output::{fisher_snapshot_path, sci, write_atomic, MetricsFile, FIM_EXPORT_FILE, METRICS_FILE};

#[derive(Debug, Clone, PartialEq)]
pub struct FimRow {
    pub context_id: usize,
    pub parameter_name: &'static str,
    /// Index within the parameter group, in row-major storage order.
    pub flat_index: usize,
    pub fisher_value: f64,
}

pub fn fim_rows(context_id: usize, fisher: &ParameterSet) -> impl Iterator<Item = FimRow> + '_ {
    fisher.groups().into_iter().flat_map(move |(name, group)| {
        group.iter().enumerate().map(move |(i, &v)| FimRow {
            context_id,
            parameter_name: name,
            flat_index: i,
            fisher_value: v,
        })
    })
}

pub fn fim_csv<'a>(fishers: impl IntoIterator<Item = (usize, &'a ParameterSet)>) -> String {
    let mut out = String::from("context_id,parameter_name,flat_index,fisher_value\n");
    for (ctx, fisher) in fishers {
        for row in fim_rows(ctx, fisher) {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                row.context_id,
                row.parameter_name,
                row.flat_index,
                sci(row.fisher_value)
            );
        }
    }
    out
}

/// Rebuilds `fim_export.csv` in `run_dir` from the run's Fisher snapshots.
pub fn fim_export(run_dir: &Path) -> Result<PathBuf> {
    let metrics_path = run_dir.join(METRICS_FILE);
    if !metrics_path.is_file() {
        return Err(HarnessError::Artifact(format!(
            "{} not found; is this a completed run directory?",
            metrics_path.display()
        )));
    }
    let n_contexts = MetricsFile::read(&metrics_path)?.eval_r2.len();
    let mut fishers = Vec::with_capacity(n_contexts);
    for ctx in 0..n_contexts {
        let path = fisher_snapshot_path(run_dir, ctx);
        if !path.is_file() {
            return Err(HarnessError::Artifact(format!("missing {}", path.display())));
        }
        let fisher = ParameterSet::load(&path)?;
        if let Some(i) = fisher.iter().position(|v| !(*v >= 0.0)) {
            return Err(HarnessError::Artifact(format!(
                "{}: entry {i} is negative or NaN",
                path.display()
            )));
        }
        fishers.push(fisher);
    }
    let out = run_dir.join(FIM_EXPORT_FILE);
    write_atomic(&out, fim_csv(fishers.iter().enumerate()).as_bytes())?;
    Ok(out)
}
