//! The LSTM regressor: parameters, forward pass, loss, gradients and optimizer.

pub mod gradcheck;
pub mod lstm;
pub mod optim;
pub mod params;

pub use gradcheck::{central_difference, finite_difference_gradient, max_relative_error};
pub use lstm::{
    backward, batch_loss, forward, lstm_step, lstm_step_traced, mse_loss, predict_all,
    GateActivations, LstmState, Sample,
};
pub use optim::{optimizer_step, OptimizerKind, OptimizerState};
pub use params::{parameter_count, GradientSet, ParamTensors, ParameterSet, GROUP_NAMES};
