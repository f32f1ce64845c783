//! Elastic weight consolidation.
//!
//! After each context finishes training, the trainer stores the parameters it
//! ended with (the anchor) together with a diagonal Fisher estimate: the mean
//! over training samples of the squared per-sample MSE gradient. Later
//! contexts pay `Σ_i (λ/2)·F_i·(θ − θ*_i)²` summed over every stored record.

use crate::error::{CelError, Result};
use crate::nn::{backward, GradientSet, ParamTensors, ParameterSet, Sample};

pub type FisherDiagonal = ParamTensors;

#[derive(Debug, Clone, PartialEq)]
pub struct ConsolidationRecord {
    context_id: usize,
    fisher_diag: FisherDiagonal,
    anchor: ParameterSet,
}

impl ConsolidationRecord {
    pub fn new(context_id: usize, fisher_diag: FisherDiagonal, anchor: ParameterSet) -> Result<Self> {
        anchor.check_shape(&fisher_diag)?;
        let negative = fisher_diag.groups().into_iter().find_map(|(name, group)| {
            group.iter().position(|f| !(*f >= 0.0)).map(|idx| (name, idx))
        });
        if let Some((group, index)) = negative {
            return Err(CelError::InvalidArgument(format!(
                "Fisher entry {group}[{index}] is negative or NaN"
            )));
        }
        Ok(Self {
            context_id,
            fisher_diag,
            anchor,
        })
    }

    pub fn context_id(&self) -> usize {
        self.context_id
    }

    pub fn fisher_diag(&self) -> &FisherDiagonal {
        &self.fisher_diag
    }

    pub fn anchor(&self) -> &ParameterSet {
        &self.anchor
    }
}

/// Ordered per-context records; ids strictly increase.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConsolidationBank {
    records: Vec<ConsolidationRecord>,
}

impl ConsolidationBank {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn records(&self) -> &[ConsolidationRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn push(&mut self, record: ConsolidationRecord) -> Result<()> {
        if let Some(last) = self.records.last() {
            if record.context_id <= last.context_id {
                return Err(CelError::OutOfOrderContext {
                    got: record.context_id,
                    last: last.context_id,
                });
            }
            last.anchor.check_shape(&record.anchor)?;
        }
        self.records.push(record);
        Ok(())
    }
}

/// Empirical diagonal Fisher: mean over samples of the squared batch-of-one gradient.
pub fn compute_fim_diagonal(params: &ParameterSet, train_set: &[Sample]) -> Result<FisherDiagonal> {
    if train_set.is_empty() {
        return Err(CelError::Empty("Fisher estimate needs training samples"));
    }
    let mut fisher = params.zeros_like();
    for sample in train_set {
        let (_, grad) = backward(params, std::slice::from_ref(sample), None)?;
        for (f, g) in fisher.iter_mut().zip(grad.iter()) {
            *f += g * g;
        }
    }
    fisher.scale(1.0 / train_set.len() as f64);
    fisher.ensure_finite_gradient()?;
    Ok(fisher)
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda >= 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(CelError::InvalidArgument(format!(
            "lambda must be finite and >= 0, got {lambda}"
        )))
    }
}

/// `Σ_records Σ_coords (λ/2)·F·(θ − θ*)²`; zero for an empty bank.
pub fn ewc_penalty(params: &ParameterSet, bank: &ConsolidationBank, lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    let mut total = 0.0;
    for record in bank.records() {
        params.check_shape(&record.anchor)?;
        let weighted: f64 = params
            .iter()
            .zip(record.anchor.iter())
            .zip(record.fisher_diag.iter())
            .map(|((p, a), f)| f * (p - a) * (p - a))
            .sum();
        total += 0.5 * lambda * weighted;
    }
    Ok(total)
}

/// Gradient of [`ewc_penalty`]: `Σ_records λ·F·(θ − θ*)` per coordinate.
pub fn ewc_penalty_gradient(
    params: &ParameterSet,
    bank: &ConsolidationBank,
    lambda: f64,
) -> Result<GradientSet> {
    check_lambda(lambda)?;
    let mut grad = params.zeros_like();
    for record in bank.records() {
        params.check_shape(&record.anchor)?;
        for (((g, p), a), f) in grad
            .iter_mut()
            .zip(params.iter())
            .zip(record.anchor.iter())
            .zip(record.fisher_diag.iter())
        {
            *g += lambda * f * (p - a);
        }
    }
    Ok(grad)
}

/// Loss minimized on every context after the first: MSE plus the EWC penalty.
pub fn regularized_loss(mse: f64, penalty: f64) -> f64 {
    mse + penalty
}

/// Snapshots `params` as the anchor for `context_id` and records its Fisher estimate.
pub fn consolidate(
    bank: &mut ConsolidationBank,
    context_id: usize,
    params: &ParameterSet,
    train_set: &[Sample],
) -> Result<()> {
    if let Some(last) = bank.records.last() {
        if context_id <= last.context_id {
            return Err(CelError::OutOfOrderContext {
                got: context_id,
                last: last.context_id,
            });
        }
    }
    let fisher = compute_fim_diagonal(params, train_set)?;
    bank.push(ConsolidationRecord::new(context_id, fisher, params.clone())?)
}
