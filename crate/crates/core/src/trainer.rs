//! Sequential training over contexts.
//!
//! Context 0 minimizes plain MSE. Every later context minimizes MSE plus the
//! EWC penalty accumulated from all earlier contexts. Each context is
//! evaluated on its own test split right after its training, and every
//! context is evaluated again once the last one has been trained.
//!
//! `train_context` only ever sees the current context and the consolidation
//! bank; earlier contexts influence training through the bank alone.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{ExperimentConfig, NormalizerScope};
use crate::consolidation::{
    consolidate, ewc_penalty, ewc_penalty_gradient, regularized_loss, ConsolidationBank,
};
use crate::data::{
    fit_normalizer, segment_contexts, Context, NormalizationParams, SpanStats, TimeSeries,
};
use crate::error::{CelError, Result};
use crate::metrics::{build_report, r_squared, MetricsReport};
use crate::nn::{backward, optimizer_step, predict_all, OptimizerState, ParameterSet, Sample};

/// Mean losses over one epoch, weighted by batch size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLoss {
    pub context: usize,
    pub epoch: usize,
    pub mse: f64,
    pub penalty: f64,
    pub regularized: f64,
}

/// Shape and statistics of one context, kept for reporting.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextSummary {
    pub id: usize,
    pub raw_span: std::ops::Range<usize>,
    pub stats: SpanStats,
    pub n_train: usize,
    pub n_test: usize,
}

/// Test-split predictions for one context, in normalized space.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextPredictions {
    pub context: usize,
    pub target_indices: Vec<usize>,
    pub targets: Vec<f64>,
    pub eval: Vec<f64>,
    pub reeval: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunLog {
    pub loss_trace: Vec<EpochLoss>,
    pub eval_r2: Vec<f64>,
    pub reeval_r2: Vec<f64>,
    /// Parameters right after each context finished training.
    pub snapshots: Vec<ParameterSet>,
    pub bank: ConsolidationBank,
    pub normalizer: NormalizationParams,
    pub contexts: Vec<ContextSummary>,
    pub predictions: Vec<ContextPredictions>,
}

/// Seeded generator used for per-epoch shuffling. Stream 1 keeps it apart
/// from the initialization stream drawn from the same seed.
pub fn shuffle_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    rng
}

/// Trains on one context, then consolidates it into `bank`.
pub fn train_context(
    params: &mut ParameterSet,
    opt: &mut OptimizerState,
    bank: &mut ConsolidationBank,
    ctx: &Context,
    cfg: &ExperimentConfig,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<EpochLoss>> {
    let train = &ctx.train.samples;
    if train.is_empty() {
        return Err(CelError::Training {
            context: ctx.id,
            epoch: 0,
            source: Box::new(CelError::Empty("context has no training samples")),
        });
    }
    let regularize = ctx.id > 0 && !bank.is_empty();
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut trace = Vec::with_capacity(cfg.epochs_per_context);
    let mut batch: Vec<Sample> = Vec::with_capacity(cfg.batch_size);

    for epoch in 0..cfg.epochs_per_context {
        let at = |e: CelError| CelError::Training {
            context: ctx.id,
            epoch,
            source: Box::new(e),
        };
        if cfg.shuffle {
            order.shuffle(rng);
        }
        let (mut mse_sum, mut pen_sum) = (0.0, 0.0);
        for chunk in order.chunks(cfg.batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| train[i].clone()));
            let (penalty, penalty_grad) = if regularize {
                (
                    ewc_penalty(params, bank, cfg.lambda).map_err(at)?,
                    Some(ewc_penalty_gradient(params, bank, cfg.lambda).map_err(at)?),
                )
            } else {
                (0.0, None)
            };
            let (mse, grads) = backward(params, &batch, penalty_grad.as_ref()).map_err(at)?;
            optimizer_step(params, &grads, opt, cfg.lr, cfg.clip_norm).map_err(at)?;
            let w = chunk.len() as f64;
            mse_sum += w * mse;
            pen_sum += w * penalty;
        }
        let n = train.len() as f64;
        let (mse, penalty) = (mse_sum / n, pen_sum / n);
        let regularized = regularized_loss(mse, penalty);
        if !regularized.is_finite() {
            return Err(at(CelError::InvalidArgument(format!(
                "epoch loss is not finite ({regularized})"
            ))));
        }
        trace.push(EpochLoss {
            context: ctx.id,
            epoch,
            mse,
            penalty,
            regularized,
        });
    }

    consolidate(bank, ctx.id, params, train).map_err(|e| CelError::Training {
        context: ctx.id,
        epoch: cfg.epochs_per_context,
        source: Box::new(e),
    })?;
    Ok(trace)
}

/// Test-split predictions for `ctx`.
pub fn predict_context(params: &ParameterSet, ctx: &Context) -> Result<Vec<f64>> {
    predict_all(params, &ctx.test.samples)
}

/// R² on the context's test split.
pub fn evaluate_context(params: &ParameterSet, ctx: &Context) -> Result<f64> {
    let predictions = predict_context(params, ctx)?;
    r_squared(&ctx.test.targets(), &predictions)
}

fn eval_at(params: &ParameterSet, ctx: &Context) -> Result<(f64, Vec<f64>)> {
    let wrap = |e| CelError::Evaluation {
        context: ctx.id,
        source: Box::new(e),
    };
    let predictions = predict_context(params, ctx).map_err(wrap)?;
    let r2 = r_squared(&ctx.test.targets(), &predictions).map_err(wrap)?;
    Ok((r2, predictions))
}

/// Runs the full sequence over already-segmented contexts.
pub fn run_contexts(
    contexts: &[Context],
    normalizer: NormalizationParams,
    cfg: &ExperimentConfig,
) -> Result<(RunLog, MetricsReport)> {
    cfg.validate()?;
    let first = contexts
        .first()
        .ok_or(CelError::Empty("no contexts to train on"))?;
    let input_dim = first
        .train
        .samples
        .first()
        .and_then(|s| s.inputs.first())
        .map(Vec::len)
        .ok_or(CelError::Empty("first context has no training samples"))?;

    let mut params = ParameterSet::init(cfg.hidden_dim, input_dim, cfg.seed)?;
    let mut opt = OptimizerState::new(cfg.optimizer, &params);
    let mut bank = ConsolidationBank::new();
    let mut rng = shuffle_rng(cfg.seed);

    let mut loss_trace = Vec::with_capacity(contexts.len() * cfg.epochs_per_context);
    let mut eval_r2 = Vec::with_capacity(contexts.len());
    let mut eval_predictions = Vec::with_capacity(contexts.len());
    let mut snapshots = Vec::with_capacity(contexts.len());

    for ctx in contexts {
        let trace = train_context(&mut params, &mut opt, &mut bank, ctx, cfg, &mut rng)?;
        loss_trace.extend(trace);
        snapshots.push(params.clone());
        let (r2, preds) = eval_at(&params, ctx)?;
        eval_r2.push(r2);
        eval_predictions.push(preds);
    }

    let mut reeval_r2 = Vec::with_capacity(contexts.len());
    let mut predictions = Vec::with_capacity(contexts.len());
    for (ctx, eval) in contexts.iter().zip(eval_predictions) {
        let (r2, reeval) = eval_at(&params, ctx)?;
        reeval_r2.push(r2);
        predictions.push(ContextPredictions {
            context: ctx.id,
            target_indices: ctx.test.target_indices.clone(),
            targets: ctx.test.targets(),
            eval,
            reeval,
        });
    }

    let report = build_report(&eval_r2, &reeval_r2, cfg)?;
    let log = RunLog {
        loss_trace,
        eval_r2,
        reeval_r2,
        snapshots,
        bank,
        normalizer,
        contexts: contexts
            .iter()
            .map(|c| ContextSummary {
                id: c.id,
                raw_span: c.raw_span.clone(),
                stats: c.stats,
                n_train: c.train.len(),
                n_test: c.test.len(),
            })
            .collect(),
        predictions,
    };
    Ok((log, report))
}

/// Normalizer for the configured scope.
pub fn fit_scoped_normalizer(
    series: &TimeSeries,
    cfg: &ExperimentConfig,
) -> Result<NormalizationParams> {
    match cfg.normalizer_scope {
        NormalizerScope::Global => fit_normalizer(series),
        NormalizerScope::FirstContext => {
            let span = cfg.segmentation().span_len(series.len());
            NormalizationParams::fit_values(&series.values[..span.min(series.len())])
        }
    }
}

/// Segments `series` per `cfg` and runs every context in order.
pub fn run_sequence(series: &TimeSeries, cfg: &ExperimentConfig) -> Result<(RunLog, MetricsReport)> {
    cfg.validate()?;
    let normalizer = fit_scoped_normalizer(series, cfg)?;
    let contexts = segment_contexts(series, &cfg.segmentation(), &normalizer)?;
    run_contexts(&contexts, normalizer, cfg)
}
