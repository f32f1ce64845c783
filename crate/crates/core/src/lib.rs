//! Continual-learning time-series forecasting with elastic weight consolidation.
//!
//! A single-layer LSTM regressor is trained over a sequence of contexts cut
//! from one univariate series. After each context the trainer stores an
//! anchor copy of the parameters and a diagonal Fisher estimate; later
//! contexts add a quadratic penalty that keeps important parameters close to
//! their anchors. Retention is measured with R² before and after the full
//! sequence.

pub mod config;
pub mod consolidation;
pub mod data;
pub mod error;
pub mod metrics;
pub mod nn;
pub mod synthetic;
pub mod trainer;

pub use config::{ExperimentConfig, NormalizerScope};
pub use consolidation::{ConsolidationBank, ConsolidationRecord};
pub use data::{Context, NormalizationParams, TimeSeries, WindowedDataset};
pub use error::{CelError, Result};
pub use metrics::MetricsReport;
pub use nn::{GradientSet, OptimizerKind, OptimizerState, ParameterSet};
pub use trainer::{run_contexts, run_sequence, RunLog};
