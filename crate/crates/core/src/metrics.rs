//! Retention metrics: R², per-context forgetting and memory stability.
//!
//! Forgetting is evaluation R² minus reevaluation R², so positive values mean
//! knowledge was lost and negative values mean later contexts helped. Because
//! R² is unbounded below, forgetting is not clamped to [−1, 1].

use crate::config::ExperimentConfig;
use crate::error::{CelError, Result};

/// `1 − SS_res / SS_tot` with `ȳ` the mean of `targets`.
pub fn r_squared(targets: &[f64], predictions: &[f64]) -> Result<f64> {
    if targets.len() != predictions.len() {
        return Err(CelError::LengthMismatch {
            what: "targets vs predictions",
            left: targets.len(),
            right: predictions.len(),
        });
    }
    if targets.len() < 2 {
        return Err(CelError::InvalidArgument(format!(
            "R² needs at least 2 points, got {}",
            targets.len()
        )));
    }
    let mean = targets.iter().sum::<f64>() / targets.len() as f64;
    let ss_tot: f64 = targets.iter().map(|y| (y - mean) * (y - mean)).sum();
    if targets.iter().all(|&y| y == targets[0]) || ss_tot == 0.0 {
        return Err(CelError::ConstantTargets);
    }
    let ss_res: f64 = targets
        .iter()
        .zip(predictions)
        .map(|(y, p)| (y - p) * (y - p))
        .sum();
    Ok(1.0 - ss_res / ss_tot)
}

pub fn forgetting(eval_r2: &[f64], reeval_r2: &[f64]) -> Result<Vec<f64>> {
    if eval_r2.len() != reeval_r2.len() {
        return Err(CelError::LengthMismatch {
            what: "evaluation vs reevaluation R²",
            left: eval_r2.len(),
            right: reeval_r2.len(),
        });
    }
    Ok(eval_r2.iter().zip(reeval_r2).map(|(e, r)| e - r).collect())
}

/// `1 − mean(forgetting)`.
pub fn memory_stability(forgetting: &[f64]) -> Result<f64> {
    if forgetting.is_empty() {
        return Err(CelError::Empty("memory stability of zero contexts"));
    }
    Ok(1.0 - forgetting.iter().sum::<f64>() / forgetting.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub eval_r2: Vec<f64>,
    pub reeval_r2: Vec<f64>,
    pub forgetting: Vec<f64>,
    pub memory_stability: f64,
    pub config_fingerprint: String,
}

impl MetricsReport {
    pub fn mean_eval_r2(&self) -> f64 {
        self.eval_r2.iter().sum::<f64>() / self.eval_r2.len() as f64
    }

    pub fn mean_forgetting(&self) -> f64 {
        self.forgetting.iter().sum::<f64>() / self.forgetting.len() as f64
    }

    /// Recomputes forgetting and stability from the stored R² lists and
    /// checks they match bit for bit.
    pub fn is_consistent(&self) -> bool {
        let Ok(f) = forgetting(&self.eval_r2, &self.reeval_r2) else {
            return false;
        };
        let Ok(mst) = memory_stability(&f) else {
            return false;
        };
        f.iter()
            .zip(&self.forgetting)
            .all(|(a, b)| a.to_bits() == b.to_bits())
            && f.len() == self.forgetting.len()
            && mst.to_bits() == self.memory_stability.to_bits()
    }
}

pub fn build_report(
    eval_r2: &[f64],
    reeval_r2: &[f64],
    cfg: &ExperimentConfig,
) -> Result<MetricsReport> {
    let forgetting = forgetting(eval_r2, reeval_r2)?;
    let memory_stability = memory_stability(&forgetting)?;
    Ok(MetricsReport {
        eval_r2: eval_r2.to_vec(),
        reeval_r2: reeval_r2.to_vec(),
        forgetting,
        memory_stability,
        config_fingerprint: cfg.fingerprint(),
    })
}
