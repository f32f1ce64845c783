//! Central finite differences over every parameter coordinate.
//!
//! These routines only ever evaluate the loss, never `backward`, so they can
//! serve as an independent check on the analytic gradients.

use crate::error::{CelError, Result};
use crate::nn::lstm::{batch_loss, Sample};
use crate::nn::params::{GradientSet, ParameterSet};

/// `(f(θ + h·e_i) − f(θ − h·e_i)) / 2h` for every coordinate `i`.
pub fn central_difference<F>(params: &ParameterSet, step: f64, mut f: F) -> Result<GradientSet>
where
    F: FnMut(&ParameterSet) -> Result<f64>,
{
    if !(step > 0.0) {
        return Err(CelError::InvalidArgument(format!(
            "finite-difference step must be positive, got {step}"
        )));
    }
    let mut probe = params.clone();
    let mut grads = params.zeros_like();
    for idx in 0..params.len() {
        let original = params.get_flat(idx);
        probe.set_flat(idx, original + step);
        let plus = f(&probe)?;
        probe.set_flat(idx, original - step);
        let minus = f(&probe)?;
        probe.set_flat(idx, original);
        grads.set_flat(idx, (plus - minus) / (2.0 * step));
    }
    Ok(grads)
}

/// Finite-difference gradient of the batch MSE.
pub fn finite_difference_gradient(
    params: &ParameterSet,
    batch: &[Sample],
    step: f64,
) -> Result<GradientSet> {
    central_difference(params, step, |p| batch_loss(p, batch))
}

/// Largest `|a − b| / max(|a|, |b|, floor)` over all coordinates.
pub fn max_relative_error(analytic: &GradientSet, numeric: &GradientSet, floor: f64) -> f64 {
    analytic
        .iter()
        .zip(numeric.iter())
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(floor))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::lstm::predict_all;
    use crate::nn::params::ParamTensors;

    fn toy_batch() -> Vec<Sample> {
        vec![
            Sample::new(vec![vec![0.1, 0.4], vec![-0.3, 0.2]], 0.5),
            Sample::new(vec![vec![0.7, -0.2], vec![0.0, 0.9]], -0.1),
            Sample::new(vec![vec![0.3, 0.3], vec![0.6, -0.5]], 0.2),
        ]
    }

    #[test]
    fn bias_derivative_is_twice_mean_residual() {
        let p = ParamTensors::init(3, 2, 4).unwrap();
        let batch = toy_batch();
        let preds = predict_all(&p, &batch).unwrap();
        let mean_residual: f64 = preds
            .iter()
            .zip(&batch)
            .map(|(y_hat, s)| y_hat - s.target)
            .sum::<f64>()
            / batch.len() as f64;
        let fd = finite_difference_gradient(&p, &batch, 1e-5).unwrap();
        assert!((fd.linear_bias[0] - 2.0 * mean_residual).abs() < 1e-6);
    }

    #[test]
    fn halving_step_barely_moves_estimate() {
        let p = ParamTensors::init(3, 2, 9).unwrap();
        let batch = toy_batch();
        let coarse = finite_difference_gradient(&p, &batch, 1e-4).unwrap();
        let fine = finite_difference_gradient(&p, &batch, 1e-5).unwrap();
        let rel = max_relative_error(&coarse, &fine, 1e-3);
        assert!(rel < 1e-5, "relative change {rel}");
    }

    #[test]
    fn constant_function_has_zero_derivative() {
        let p = ParamTensors::init(2, 2, 1).unwrap();
        let g = central_difference(&p, 1e-5, |_| Ok(3.25)).unwrap();
        assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rejects_non_positive_step() {
        let p = ParamTensors::zeros(1, 1);
        assert!(finite_difference_gradient(&p, &toy_batch()[..0], 0.0).is_err());
    }
}
