//! Experiment drivers behind the CLI subcommands.

use std::path::{Path, PathBuf};

use cel_core::data::{load_csv, TimeSeries};
use cel_core::{run_sequence, ExperimentConfig, MetricsReport, RunLog};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{HarnessError, Result};
use crate::fim::fim_csv;
use crate::output::{
    fisher_snapshot_path, loss_trace_csv, metrics_json, params_snapshot_path, predictions_csv,
    write_atomic, write_snapshot_atomic, Sci, FIM_EXPORT_FILE, LOSS_TRACE_FILE, METRICS_FILE,
    PREDICTIONS_FILE,
};

/// Scores within this distance of the best count as tied.
pub const TIE_TOLERANCE: f64 = 1e-6;

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    ExperimentConfig::from_text(&text).map_err(HarnessError::Config)
}

pub fn load_series(path: &Path) -> Result<TimeSeries> {
    load_csv(path).map_err(HarnessError::Data)
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))
}

/// Thread pool sized by `CEL_THREADS` (default 1).
pub fn cell_pool() -> Result<rayon::ThreadPool> {
    let threads = match std::env::var("CEL_THREADS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n >= 1)
            .ok_or_else(|| HarnessError::Usage(format!("CEL_THREADS must be >= 1, got `{v}`")))?,
        Err(_) => 1,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| HarnessError::Usage(format!("cannot start thread pool: {e}")))
}

/// Writes every artifact of a finished run into `out_dir`.
pub fn write_run_outputs(
    out_dir: &Path,
    log: &RunLog,
    report: &MetricsReport,
    series: &TimeSeries,
    cfg: &ExperimentConfig,
) -> Result<()> {
    ensure_dir(out_dir)?;
    for (i, snap) in log.snapshots.iter().enumerate() {
        write_snapshot_atomic(&params_snapshot_path(out_dir, i), snap)?;
    }
    for rec in log.bank.records() {
        write_snapshot_atomic(&fisher_snapshot_path(out_dir, rec.context_id()), rec.fisher_diag())?;
    }
    let fim = fim_csv(log.bank.records().iter().map(|r| (r.context_id(), r.fisher_diag())));
    write_atomic(&out_dir.join(FIM_EXPORT_FILE), fim.as_bytes())?;
    write_atomic(&out_dir.join(LOSS_TRACE_FILE), loss_trace_csv(log).as_bytes())?;
    write_atomic(&out_dir.join(PREDICTIONS_FILE), predictions_csv(log, series).as_bytes())?;
    // metrics.json last: its presence marks a complete run directory
    write_atomic(
        &out_dir.join(METRICS_FILE),
        metrics_json(report, log, series, cfg)?.as_bytes(),
    )?;
    Ok(())
}

pub fn run(config_path: &Path, data_path: &Path, out_dir: &Path) -> Result<MetricsReport> {
    let cfg = load_config(config_path)?;
    let series = load_series(data_path)?;
    let (log, report) = run_sequence(&series, &cfg)?;
    write_run_outputs(out_dir, &log, &report, &series, &cfg)?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Selection {
    pub chosen_n: usize,
    pub best_score: Sci,
    /// Every N whose score is within [`TIE_TOLERANCE`] of the best.
    pub tied: Vec<usize>,
    pub trace: Vec<String>,
}

/// Picks the context count with the highest score; near-ties go to the smallest N.
pub fn select_n(scores: &[(usize, f64)]) -> Option<Selection> {
    let best = scores
        .iter()
        .map(|&(_, s)| s)
        .filter(|s| s.is_finite())
        .fold(f64::NEG_INFINITY, f64::max);
    if !best.is_finite() {
        return None;
    }
    let mut tied: Vec<usize> = scores
        .iter()
        .filter(|&&(_, s)| s.is_finite() && best - s <= TIE_TOLERANCE)
        .map(|&(n, _)| n)
        .collect();
    tied.sort_unstable();
    tied.dedup();
    let chosen_n = tied[0];
    let mut trace: Vec<String> = scores
        .iter()
        .map(|&(n, s)| format!("N={n}: mean eval R2 {s:.6}"))
        .collect();
    trace.push(format!("best {best:.6}; within {TIE_TOLERANCE:e}: {tied:?}; chose N={chosen_n}"));
    Some(Selection {
        chosen_n,
        best_score: Sci(best),
        tied,
        trace,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct GridCell {
    pub n_contexts: usize,
    pub seed: u64,
    pub ok: bool,
    pub mean_eval_r2: Option<Sci>,
    pub eval_r2: Vec<Sci>,
    pub memory_stability: Option<Sci>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct GridSearchResult {
    pub cells: Vec<GridCell>,
    pub selection: Selection,
}

pub fn grid_search(
    config_path: &Path,
    data_path: &Path,
    n_values: &[usize],
    out_dir: &Path,
) -> Result<GridSearchResult> {
    if n_values.is_empty() {
        return Err(HarnessError::Usage("--n needs at least one value".into()));
    }
    let base = load_config(config_path)?;
    let series = load_series(data_path)?;
    ensure_dir(out_dir)?;
    let pool = cell_pool()?;

    let cells: Vec<GridCell> = pool.install(|| {
        n_values
            .par_iter()
            .map(|&n| {
                let cfg = ExperimentConfig {
                    n_contexts: n,
                    ..base.clone()
                };
                let outcome = run_sequence(&series, &cfg)
                    .map_err(HarnessError::from)
                    .and_then(|(log, report)| {
                        let dir = out_dir.join(format!("n_{n}"));
                        write_run_outputs(&dir, &log, &report, &series, &cfg)?;
                        Ok(report)
                    });
                match outcome {
                    Ok(report) => GridCell {
                        n_contexts: n,
                        seed: cfg.seed,
                        ok: true,
                        mean_eval_r2: Some(Sci(report.mean_eval_r2())),
                        eval_r2: report.eval_r2.iter().copied().map(Sci).collect(),
                        memory_stability: Some(Sci(report.memory_stability)),
                        error: None,
                    },
                    Err(e) => GridCell {
                        n_contexts: n,
                        seed: cfg.seed,
                        ok: false,
                        mean_eval_r2: None,
                        eval_r2: Vec::new(),
                        memory_stability: None,
                        error: Some(format!("{}: {e}", e.kind())),
                    },
                }
            })
            .collect()
    });

    let scores: Vec<(usize, f64)> = cells
        .iter()
        .filter_map(|c| c.mean_eval_r2.map(|s| (c.n_contexts, s.0)))
        .collect();
    let selection = select_n(&scores).ok_or(HarnessError::AllCellsFailed)?;
    let result = GridSearchResult { cells, selection };
    write_json(&out_dir.join("grid.json"), &result)?;
    Ok(result)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|source| HarnessError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

#[derive(Debug, Clone, Serialize)]
pub struct ArmSeed {
    pub seed: u64,
    pub memory_stability: Sci,
    pub mean_forgetting: Sci,
    pub mean_eval_r2: Sci,
}

#[derive(Debug, Clone, Serialize)]
pub struct ArmSummary {
    pub lambda: Sci,
    pub per_seed: Vec<ArmSeed>,
    pub mean_memory_stability: Sci,
    pub mean_forgetting: Sci,
}

#[derive(Debug, Clone, Serialize)]
pub struct AblationResult {
    pub seeds: Vec<u64>,
    pub ewc: ArmSummary,
    pub naive: ArmSummary,
}

fn summarize(lambda: f64, runs: &[(u64, MetricsReport)]) -> ArmSummary {
    let n = runs.len() as f64;
    ArmSummary {
        lambda: Sci(lambda),
        per_seed: runs
            .iter()
            .map(|(seed, r)| ArmSeed {
                seed: *seed,
                memory_stability: Sci(r.memory_stability),
                mean_forgetting: Sci(r.mean_forgetting()),
                mean_eval_r2: Sci(r.mean_eval_r2()),
            })
            .collect(),
        mean_memory_stability: Sci(runs.iter().map(|(_, r)| r.memory_stability).sum::<f64>() / n),
        mean_forgetting: Sci(runs.iter().map(|(_, r)| r.mean_forgetting()).sum::<f64>() / n),
    }
}

/// EWC at `cfg.lambda` against λ = 0 over seeds `cfg.seed .. cfg.seed + n_seeds`.
pub fn ablate_series(
    series: &TimeSeries,
    cfg: &ExperimentConfig,
    n_seeds: usize,
) -> Result<AblationResult> {
    if n_seeds == 0 {
        return Err(HarnessError::Usage("--seeds must be >= 1".into()));
    }
    let seeds: Vec<u64> = (0..n_seeds as u64).map(|k| cfg.seed + k).collect();
    let cells: Vec<(u64, f64)> = seeds
        .iter()
        .flat_map(|&s| [(s, cfg.lambda), (s, 0.0)])
        .collect();
    let pool = cell_pool()?;
    let outcomes: Vec<Result<MetricsReport>> = pool.install(|| {
        cells
            .par_iter()
            .map(|&(seed, lambda)| {
                let cell_cfg = ExperimentConfig {
                    seed,
                    lambda,
                    ..cfg.clone()
                };
                run_sequence(series, &cell_cfg)
                    .map(|(_, r)| r)
                    .map_err(HarnessError::from)
            })
            .collect()
    });
    let mut ewc = Vec::new();
    let mut naive = Vec::new();
    for ((seed, _), outcome) in cells.iter().zip(outcomes) {
        let report = outcome?;
        if ewc.len() == naive.len() {
            ewc.push((*seed, report));
        } else {
            naive.push((*seed, report));
        }
    }
    Ok(AblationResult {
        seeds,
        ewc: summarize(cfg.lambda, &ewc),
        naive: summarize(0.0, &naive),
    })
}

pub fn ablate(
    config_path: &Path,
    data_path: &Path,
    n_seeds: usize,
    out_dir: &Path,
) -> Result<AblationResult> {
    let cfg = load_config(config_path)?;
    let series = load_series(data_path)?;
    ensure_dir(out_dir)?;
    let result = ablate_series(&series, &cfg, n_seeds)?;
    write_json(&out_dir.join("ablation.json"), &result)?;
    Ok(result)
}

pub fn ablation_table(result: &AblationResult) -> String {
    let mut out = String::from("seed    MST(ewc)   MST(naive)  F(ewc)     F(naive)\n");
    for (e, n) in result.ewc.per_seed.iter().zip(&result.naive.per_seed) {
        out.push_str(&format!(
            "{:<7} {:<10.5} {:<11.5} {:<10.5} {:.5}\n",
            e.seed, e.memory_stability.0, n.memory_stability.0, e.mean_forgetting.0, n.mean_forgetting.0
        ));
    }
    out.push_str(&format!(
        "mean    {:<10.5} {:<11.5} {:<10.5} {:.5}\n",
        result.ewc.mean_memory_stability.0,
        result.naive.mean_memory_stability.0,
        result.ewc.mean_forgetting.0,
        result.naive.mean_forgetting.0
    ));
    out
}

/// Writes a synthetic stand-in series as `date,value` CSV.
pub fn write_series_csv(path: &Path, series: &TimeSeries) -> Result<PathBuf> {
    let mut text = String::from("date,value\n");
    for (t, v) in series.timestamps.iter().zip(&series.values) {
        text.push_str(&format!("{t},{v}\n"));
    }
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        ensure_dir(parent)?;
    }
    write_atomic(path, text.as_bytes())?;
    Ok(path.to_path_buf())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn measles_row_picks_six() {
        let s = [(6, 0.657), (7, 0.029), (8, 0.457), (9, 0.498), (10, 0.577)];
        assert_eq!(select_n(&s).unwrap().chosen_n, 6);
    }

    #[test]
    fn mpox_row_picks_ten() {
        let s = [(6, 0.728), (7, 0.729), (8, 0.358), (9, 0.718), (10, 0.818)];
        assert_eq!(select_n(&s).unwrap().chosen_n, 10);
    }

    #[test]
    fn ties_go_to_smallest_n() {
        let sel = select_n(&[(10, 0.80), (6, 0.80)]).unwrap();
        assert_eq!(sel.chosen_n, 6);
        assert_eq!(sel.tied, vec![6, 10]);
        let sel = select_n(&[(6, 0.8), (7, 0.8 + 5e-7), (8, 0.8 + 2e-6)]).unwrap();
        assert_eq!(sel.chosen_n, 8);
        let sel = select_n(&[(6, 0.8 + 5e-7), (7, 0.8), (8, 0.1)]).unwrap();
        assert_eq!(sel.chosen_n, 6);
    }

    #[test]
    fn selection_skips_non_finite_and_empty() {
        assert!(select_n(&[]).is_none());
        assert!(select_n(&[(6, f64::NAN)]).is_none());
        assert_eq!(select_n(&[(6, f64::NAN), (9, 0.1)]).unwrap().chosen_n, 9);
    }

    #[test]
    fn selection_ignores_input_order() {
        let a = [(6, 0.3), (7, 0.9), (8, 0.9), (9, 0.2)];
        let mut b = a;
        b.reverse();
        assert_eq!(select_n(&a).unwrap().chosen_n, select_n(&b).unwrap().chosen_n);
    }
}
