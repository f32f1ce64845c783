//! Global-norm gradient clipping followed by an Adam or plain SGD update.

use crate::error::{CelError, Result};
use crate::nn::params::{GradientSet, ParamTensors, ParameterSet};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OptimizerKind {
    Adam,
    Sgd,
}

impl OptimizerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            OptimizerKind::Adam => "adam",
            OptimizerKind::Sgd => "sgd",
        }
    }
}

impl std::str::FromStr for OptimizerKind {
    type Err = CelError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "adam" => Ok(OptimizerKind::Adam),
            "sgd" => Ok(OptimizerKind::Sgd),
            other => Err(CelError::Config(format!(
                "unknown optimizer `{other}` (expected adam or sgd)"
            ))),
        }
    }
}

/// Moment accumulators shaped like the parameters. SGD leaves them untouched.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub kind: OptimizerKind,
    pub first_moment: ParamTensors,
    pub second_moment: ParamTensors,
    pub step: u64,
}

impl OptimizerState {
    pub fn new(kind: OptimizerKind, params: &ParameterSet) -> Self {
        Self {
            kind,
            first_moment: params.zeros_like(),
            second_moment: params.zeros_like(),
            step: 0,
        }
    }
}

/// Factor that brings `norm` down to `clip_norm`, or 1 when already inside.
pub fn clip_factor(norm: f64, clip_norm: f64) -> f64 {
    if norm > clip_norm {
        clip_norm / norm
    } else {
        1.0
    }
}

/// One bias-corrected Adam update on flat slices, with the gradient multiplied by `grad_scale`.
pub fn adam_update(
    params: &mut [f64],
    grads: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    step: u64,
    lr: f64,
    grad_scale: f64,
) {
    let bias1 = 1.0 - ADAM_BETA1.powi(step as i32);
    let bias2 = 1.0 - ADAM_BETA2.powi(step as i32);
    for (((p, &g), m), v) in params.iter_mut().zip(grads).zip(m.iter_mut()).zip(v.iter_mut()) {
        let g = g * grad_scale;
        *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
        *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
        let m_hat = *m / bias1;
        let v_hat = *v / bias2;
        *p -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
    }
}

/// Clips `grads` to global L2 norm `clip_norm`, then applies one optimizer update in place.
pub fn optimizer_step(
    params: &mut ParameterSet,
    grads: &GradientSet,
    opt: &mut OptimizerState,
    lr: f64,
    clip_norm: f64,
) -> Result<()> {
    if !(lr > 0.0) || !(clip_norm > 0.0) {
        return Err(CelError::InvalidArgument(format!(
            "lr and clip_norm must be positive (got {lr}, {clip_norm})"
        )));
    }
    params.check_shape(grads)?;
    let scale = clip_factor(grads.l2_norm(), clip_norm);
    opt.step += 1;
    match opt.kind {
        OptimizerKind::Adam => {
            let step = opt.step;
            let groups = params
                .groups_mut()
                .into_iter()
                .zip(grads.groups())
                .zip(opt.first_moment.groups_mut())
                .zip(opt.second_moment.groups_mut());
            for ((((_, p), (_, g)), (_, m)), (_, v)) in groups {
                adam_update(p, g, m, v, step, lr, scale);
            }
        }
        OptimizerKind::Sgd => {
            params.add_scaled(grads, -lr * scale)?;
        }
    }
    params.ensure_finite_parameters()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params_and_decays_moments() {
        let mut p = ParamTensors::init(2, 2, 3).unwrap();
        let before = p.clone();
        let mut opt = OptimizerState::new(OptimizerKind::Adam, &p);
        opt.first_moment.weight_ih[0] = 1.0;
        opt.second_moment.weight_ih[0] = 4.0;
        let g = p.zeros_like();
        optimizer_step(&mut p, &g, &mut opt, 0.01, 5.0).unwrap();
        assert!((opt.first_moment.weight_ih[0] - 0.9).abs() < 1e-15);
        assert!((opt.second_moment.weight_ih[0] - 4.0 * 0.999).abs() < 1e-15);
        // untouched coordinates have zero moments and stay put
        for (a, b) in p.iter().zip(before.iter()).skip(1) {
            assert_eq!(a, b);
        }
        assert_eq!(opt.step, 1);
    }

    #[test]
    fn zero_gradient_from_fresh_state_is_a_no_op() {
        let mut p = ParamTensors::init(2, 2, 3).unwrap();
        let before = p.clone();
        let mut opt = OptimizerState::new(OptimizerKind::Adam, &p);
        let g = p.zeros_like();
        optimizer_step(&mut p, &g, &mut opt, 0.01, 5.0).unwrap();
        assert_eq!(p, before);
    }

    #[test]
    fn clipping_halves_norm_ten_gradient() {
        assert_eq!(clip_factor(10.0, 5.0), 0.5);
        assert_eq!(clip_factor(3.0, 5.0), 1.0);

        let mut p = ParamTensors::zeros(1, 1);
        let mut g = p.zeros_like();
        g.weight_ih[0] = 6.0;
        g.weight_hh[0] = 8.0;
        let mut opt = OptimizerState::new(OptimizerKind::Adam, &p);
        optimizer_step(&mut p, &g, &mut opt, 0.01, 5.0).unwrap();
        assert!((opt.first_moment.weight_ih[0] - 0.1 * 3.0).abs() < 1e-15);
        assert!((opt.first_moment.weight_hh[0] - 0.1 * 4.0).abs() < 1e-15);

        let mut p = ParamTensors::zeros(1, 1);
        let mut opt = OptimizerState::new(OptimizerKind::Sgd, &p);
        optimizer_step(&mut p, &g, &mut opt, 0.1, 5.0).unwrap();
        assert!((p.weight_ih[0] + 0.3).abs() < 1e-15);
        assert!((p.weight_hh[0] + 0.4).abs() < 1e-15);
    }

    #[test]
    fn adam_solves_scalar_quadratic() {
        // Independent scalar recursion of clipped Adam on (θ − 3)².
        let mut theta = 0.0f64;
        let (mut m, mut v) = (0.0f64, 0.0f64);
        for t in 1..=500 {
            let mut g = 2.0 * (theta - 3.0);
            if g.abs() > 5.0 {
                g *= 5.0 / g.abs();
            }
            m = 0.9 * m + 0.1 * g;
            v = 0.999 * v + 0.001 * g * g;
            let mh = m / (1.0 - 0.9f64.powi(t));
            let vh = v / (1.0 - 0.999f64.powi(t));
            theta -= 0.1 * mh / (vh.sqrt() + 1e-8);
        }
        assert!((theta - 3.0).abs() < 1e-2, "oracle ended at {theta}");

        let mut p = ParamTensors::zeros(1, 1);
        let mut opt = OptimizerState::new(OptimizerKind::Adam, &p);
        for _ in 0..500 {
            let mut g = p.zeros_like();
            g.linear_bias[0] = 2.0 * (p.linear_bias[0] - 3.0);
            optimizer_step(&mut p, &g, &mut opt, 0.1, 5.0).unwrap();
        }
        assert!((p.linear_bias[0] - 3.0).abs() < 1e-2);
        assert!((p.linear_bias[0] - theta).abs() < 1e-12);
    }

    #[test]
    fn second_moments_stay_non_negative() {
        let mut p = ParamTensors::init(3, 2, 1).unwrap();
        let mut opt = OptimizerState::new(OptimizerKind::Adam, &p);
        for k in 0..20 {
            let mut g = ParamTensors::init(3, 2, 100 + k).unwrap();
            g.scale(if k % 2 == 0 { 1.0 } else { -3.0 });
            optimizer_step(&mut p, &g, &mut opt, 0.01, 5.0).unwrap();
        }
        assert!(opt.second_moment.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn non_finite_update_is_an_error() {
        let mut p = ParamTensors::zeros(1, 1);
        let mut g = p.zeros_like();
        g.weight_ih[0] = f64::NAN;
        let mut opt = OptimizerState::new(OptimizerKind::Sgd, &p);
        assert!(matches!(
            optimizer_step(&mut p, &g, &mut opt, 0.1, 5.0),
            Err(CelError::NonFiniteParameter { .. })
        ));
    }

    #[test]
    fn rejects_bad_hyperparameters() {
        let mut p = ParamTensors::zeros(1, 1);
        let g = p.zeros_like();
        let mut opt = OptimizerState::new(OptimizerKind::Adam, &p);
        assert!(optimizer_step(&mut p, &g, &mut opt, 0.0, 5.0).is_err());
        assert!(optimizer_step(&mut p, &g, &mut opt, 0.1, -1.0).is_err());
    }
}
