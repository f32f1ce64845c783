//! LSTM cell, scalar regression head, MSE loss and backpropagation through time.

use crate::error::{CelError, Result};
use crate::nn::params::{Gate, GradientSet, ParameterSet, GATES};

/// One supervised example: an input sequence of `D`-vectors and the next value.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub inputs: Vec<Vec<f64>>,
    pub target: f64,
}

impl Sample {
    pub fn new(inputs: Vec<Vec<f64>>, target: f64) -> Self {
        Self { inputs, target }
    }
}

/// Cell (long-term) and hidden (short-term) memory.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub cell: Vec<f64>,
    pub hidden: Vec<f64>,
}

impl LstmState {
    pub fn zeros(hidden_dim: usize) -> Self {
        Self {
            cell: vec![0.0; hidden_dim],
            hidden: vec![0.0; hidden_dim],
        }
    }
}

/// Post-activation gate values for one step.
#[derive(Debug, Clone, PartialEq)]
pub struct GateActivations {
    pub forget: Vec<f64>,
    pub input: Vec<f64>,
    pub candidate: Vec<f64>,
    pub output: Vec<f64>,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Advances the cell by one timestep and also returns the gate activations.
pub fn lstm_step_traced(
    params: &ParameterSet,
    state: &LstmState,
    x: &[f64],
    step_index: usize,
) -> Result<(LstmState, GateActivations)> {
    let h = params.hidden_dim();
    let d = params.input_dim();
    if x.len() != d {
        return Err(CelError::InputWidth {
            expected: d,
            got: x.len(),
        });
    }

    let mut pre = vec![0.0; GATES * h];
    for (k, z) in pre.iter_mut().enumerate() {
        let wi = &params.weight_ih[k * d..(k + 1) * d];
        let wh = &params.weight_hh[k * h..(k + 1) * h];
        let mut acc = params.bias_ih[k] + params.bias_hh[k];
        acc += wi.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
        acc += wh.iter().zip(&state.hidden).map(|(w, v)| w * v).sum::<f64>();
        *z = acc;
    }

    let slot = |g: Gate| &pre[g as usize * h..(g as usize + 1) * h];
    let forget: Vec<f64> = slot(Gate::Forget).iter().map(|&z| sigmoid(z)).collect();
    let input: Vec<f64> = slot(Gate::Input).iter().map(|&z| sigmoid(z)).collect();
    let candidate: Vec<f64> = slot(Gate::Candidate).iter().map(|&z| z.tanh()).collect();
    let output: Vec<f64> = slot(Gate::Output).iter().map(|&z| sigmoid(z)).collect();

    for (gate, values) in [
        (Gate::Forget, &forget),
        (Gate::Input, &input),
        (Gate::Candidate, &candidate),
        (Gate::Output, &output),
    ] {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(CelError::NonFiniteGate {
                gate: gate.name(),
                step: step_index,
            });
        }
    }

    let cell: Vec<f64> = (0..h)
        .map(|j| state.cell[j] * forget[j] + input[j] * candidate[j])
        .collect();
    if cell.iter().any(|v| !v.is_finite()) {
        return Err(CelError::NonFiniteGate {
            gate: "cell",
            step: step_index,
        });
    }
    let hidden: Vec<f64> = (0..h).map(|j| output[j] * cell[j].tanh()).collect();

    Ok((
        LstmState { cell, hidden },
        GateActivations {
            forget,
            input,
            candidate,
            output,
        },
    ))
}

pub fn lstm_step(params: &ParameterSet, state: &LstmState, x: &[f64]) -> Result<LstmState> {
    lstm_step_traced(params, state, x, 0).map(|(s, _)| s)
}

fn head(params: &ParameterSet, hidden: &[f64]) -> f64 {
    params.linear_bias[0]
        + params
            .linear_weight
            .iter()
            .zip(hidden)
            .map(|(w, v)| w * v)
            .sum::<f64>()
}

/// Runs the sequence from a zero state and applies the linear head to the last hidden state.
pub fn forward(params: &ParameterSet, inputs: &[Vec<f64>]) -> Result<f64> {
    if inputs.is_empty() {
        return Err(CelError::Empty("sample has no timesteps"));
    }
    let mut state = LstmState::zeros(params.hidden_dim());
    for (t, x) in inputs.iter().enumerate() {
        state = lstm_step_traced(params, &state, x, t)?.0;
    }
    Ok(head(params, &state.hidden))
}

pub fn predict_all(params: &ParameterSet, samples: &[Sample]) -> Result<Vec<f64>> {
    samples.iter().map(|s| forward(params, &s.inputs)).collect()
}

/// Mean squared error `(1/k)·Σ(y − ŷ)²`.
pub fn mse_loss(predictions: &[f64], targets: &[f64]) -> Result<f64> {
    if predictions.len() != targets.len() {
        return Err(CelError::LengthMismatch {
            what: "predictions vs targets",
            left: predictions.len(),
            right: targets.len(),
        });
    }
    if predictions.is_empty() {
        return Err(CelError::Empty("mse_loss needs at least one pair"));
    }
    let sum: f64 = predictions
        .iter()
        .zip(targets)
        .map(|(p, y)| (y - p) * (y - p))
        .sum();
    Ok(sum / predictions.len() as f64)
}

/// Mean MSE over the batch, as the loss `backward` differentiates.
pub fn batch_loss(params: &ParameterSet, batch: &[Sample]) -> Result<f64> {
    let predictions = predict_all(params, batch)?;
    let targets: Vec<f64> = batch.iter().map(|s| s.target).collect();
    mse_loss(&predictions, &targets)
}

struct StepRecord {
    x: Vec<f64>,
    prev: LstmState,
    gates: GateActivations,
    cell: Vec<f64>,
}

/// Batch MSE and its gradient by backpropagation through time.
///
/// `extra`, when given, is added to the gradient elementwise (the EWC
/// penalty gradient during consolidated training).
pub fn backward(
    params: &ParameterSet,
    batch: &[Sample],
    extra: Option<&GradientSet>,
) -> Result<(f64, GradientSet)> {
    if batch.is_empty() {
        return Err(CelError::Empty("backward needs a non-empty batch"));
    }
    let h = params.hidden_dim();
    let d = params.input_dim();
    let scale = 1.0 / batch.len() as f64;
    let mut grads = params.zeros_like();
    let mut loss = 0.0;

    let mut records: Vec<StepRecord> = Vec::new();
    let mut dz = vec![0.0; GATES * h];
    let mut dh_prev = vec![0.0; h];

    for sample in batch {
        if sample.inputs.is_empty() {
            return Err(CelError::Empty("sample has no timesteps"));
        }
        records.clear();
        let mut state = LstmState::zeros(h);
        for (t, x) in sample.inputs.iter().enumerate() {
            let (next, gates) = lstm_step_traced(params, &state, x, t)?;
            records.push(StepRecord {
                x: x.clone(),
                prev: state,
                gates,
                cell: next.cell.clone(),
            });
            state = next;
        }
        let prediction = head(params, &state.hidden);
        let residual = prediction - sample.target;
        loss += residual * residual * scale;

        let dy = 2.0 * residual * scale;
        grads.linear_bias[0] += dy;
        for (g, hv) in grads.linear_weight.iter_mut().zip(&state.hidden) {
            *g += dy * hv;
        }

        let mut dh: Vec<f64> = params.linear_weight.iter().map(|w| dy * w).collect();
        let mut dc = vec![0.0; h];
        for rec in records.iter().rev() {
            let GateActivations {
                forget,
                input,
                candidate,
                output,
            } = &rec.gates;
            for j in 0..h {
                let tc = rec.cell[j].tanh();
                let d_out = dh[j] * tc;
                dc[j] += dh[j] * output[j] * (1.0 - tc * tc);
                let d_forget = dc[j] * rec.prev.cell[j];
                let d_input = dc[j] * candidate[j];
                let d_cand = dc[j] * input[j];
                dz[Gate::Forget as usize * h + j] = d_forget * forget[j] * (1.0 - forget[j]);
                dz[Gate::Input as usize * h + j] = d_input * input[j] * (1.0 - input[j]);
                dz[Gate::Candidate as usize * h + j] = d_cand * (1.0 - candidate[j] * candidate[j]);
                dz[Gate::Output as usize * h + j] = d_out * output[j] * (1.0 - output[j]);
                dc[j] *= forget[j];
            }

            dh_prev.iter_mut().for_each(|v| *v = 0.0);
            for (k, &g) in dz.iter().enumerate() {
                if g == 0.0 {
                    continue;
                }
                grads.bias_ih[k] += g;
                grads.bias_hh[k] += g;
                let gi = &mut grads.weight_ih[k * d..(k + 1) * d];
                for (w, xv) in gi.iter_mut().zip(&rec.x) {
                    *w += g * xv;
                }
                let gh = &mut grads.weight_hh[k * h..(k + 1) * h];
                for (w, hv) in gh.iter_mut().zip(&rec.prev.hidden) {
                    *w += g * hv;
                }
                let wh = &params.weight_hh[k * h..(k + 1) * h];
                for (acc, w) in dh_prev.iter_mut().zip(wh) {
                    *acc += g * w;
                }
            }
            std::mem::swap(&mut dh, &mut dh_prev);
        }
    }

    if let Some(extra) = extra {
        grads.add_scaled(extra, 1.0)?;
    }
    grads.ensure_finite_gradient()?;
    Ok((loss, grads))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::params::ParamTensors;

    fn sig(x: f64) -> f64 {
        1.0 / (1.0 + (-x).exp())
    }

    /// H=1, D=1 with every weight set by hand.
    fn scalar_params() -> ParamTensors {
        let mut p = ParamTensors::zeros(1, 1);
        // (forget, input, candidate, output)
        p.weight_ih = vec![0.5, -0.3, 0.8, 0.2];
        p.weight_hh = vec![0.1, 0.4, -0.6, 0.7];
        p.bias_ih = vec![0.05, -0.1, 0.2, 0.0];
        p.bias_hh = vec![0.15, 0.1, -0.3, 0.25];
        p.linear_weight = vec![1.7];
        p.linear_bias = vec![-0.2];
        p
    }

    #[test]
    fn zero_params_halve_cell() {
        let p = ParamTensors::zeros(3, 2);
        let state = LstmState {
            cell: vec![1.0, -2.0, 0.4],
            hidden: vec![0.3, 0.1, -0.9],
        };
        let (next, gates) = lstm_step_traced(&p, &state, &[4.0, -1.0], 0).unwrap();
        for j in 0..3 {
            assert_eq!(gates.forget[j], 0.5);
            assert_eq!(gates.input[j], 0.5);
            assert_eq!(gates.output[j], 0.5);
            assert_eq!(gates.candidate[j], 0.0);
            assert_eq!(next.cell[j], 0.5 * state.cell[j]);
            assert_eq!(next.hidden[j], 0.5 * (0.5 * state.cell[j]).tanh());
        }
    }

    #[test]
    fn scalar_step_matches_hand_calculation() {
        let p = scalar_params();
        let (c0, h0, x) = (0.3, -0.4, 0.9);
        let f = sig(0.5 * x + 0.1 * h0 + 0.05 + 0.15);
        let i = sig(-0.3 * x + 0.4 * h0 - 0.1 + 0.1);
        let g = (0.8 * x - 0.6 * h0 + 0.2 - 0.3).tanh();
        let o = sig(0.2 * x + 0.7 * h0 + 0.0 + 0.25);
        let c = c0 * f + i * g;
        let hh = o * c.tanh();

        let state = LstmState {
            cell: vec![c0],
            hidden: vec![h0],
        };
        let next = lstm_step(&p, &state, &[x]).unwrap();
        assert!((next.cell[0] - c).abs() < 1e-15);
        assert!((next.hidden[0] - hh).abs() < 1e-15);
    }

    #[test]
    fn single_step_forward_matches_scalar_oracle() {
        let p = scalar_params();
        let x = -0.7;
        // zero initial cell: the forget gate drops out
        let i = sig(-0.3 * x);
        let g = (0.8 * x - 0.1).tanh();
        let o = sig(0.2 * x + 0.25);
        let hh = o * (i * g).tanh();
        let expected = 1.7 * hh - 0.2;
        let y = forward(&p, &[vec![x]]).unwrap();
        assert!((y - expected).abs() < 1e-15);
    }

    #[test]
    fn zero_model_predicts_zero() {
        let p = ParamTensors::zeros(4, 3);
        let y = forward(&p, &[vec![1.0, 2.0, 3.0], vec![-5.0, 0.0, 9.0]]).unwrap();
        assert_eq!(y, 0.0);
    }

    #[test]
    fn forward_rejects_empty_and_wrong_width() {
        let p = ParamTensors::zeros(2, 3);
        assert!(matches!(forward(&p, &[]), Err(CelError::Empty(_))));
        assert!(matches!(
            forward(&p, &[vec![1.0]]),
            Err(CelError::InputWidth { expected: 3, got: 1 })
        ));
    }

    #[test]
    fn non_finite_input_names_a_gate() {
        let p = ParamTensors::init(2, 2, 1).unwrap();
        let err = forward(&p, &[vec![f64::NAN, 0.0]]).unwrap_err();
        assert!(matches!(err, CelError::NonFiniteGate { gate: "forget", .. }));
    }

    #[test]
    fn mse_examples() {
        assert_eq!(mse_loss(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 0.0);
        assert_eq!(mse_loss(&[0.0, 0.0], &[1.0, 1.0]).unwrap(), 1.0);
        assert!(mse_loss(&[1.0], &[1.0, 2.0]).is_err());
        assert!(mse_loss(&[], &[]).is_err());
    }

    #[test]
    fn mse_matches_sum_of_squares_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        let p: Vec<f64> = (0..10).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let y: Vec<f64> = (0..10).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let mut oracle = 0.0;
        for k in 0..10 {
            let r = p[k] - y[k];
            oracle += r * r;
        }
        oracle /= 10.0;
        assert!((mse_loss(&p, &y).unwrap() - oracle).abs() < 1e-12);
    }

    #[test]
    fn duplicated_batch_has_same_gradient() {
        let p = ParamTensors::init(3, 2, 5).unwrap();
        let s = Sample::new(vec![vec![0.2, -0.1], vec![0.5, 0.3]], 0.7);
        let (l1, g1) = backward(&p, &[s.clone()], None).unwrap();
        let (l2, g2) = backward(&p, &[s.clone(), s], None).unwrap();
        assert!((l1 - l2).abs() < 1e-15);
        for (a, b) in g1.iter().zip(g2.iter()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_extra_is_identity() {
        let p = ParamTensors::init(3, 2, 8).unwrap();
        let batch = vec![
            Sample::new(vec![vec![0.2, -0.1]], 0.7),
            Sample::new(vec![vec![0.9, 0.4]], 0.1),
        ];
        let (l1, g1) = backward(&p, &batch, None).unwrap();
        let zeros = p.zeros_like();
        let (l2, g2) = backward(&p, &batch, Some(&zeros)).unwrap();
        assert_eq!(l1.to_bits(), l2.to_bits());
        assert_eq!(g1, g2);
    }

    #[test]
    fn backward_loss_equals_batch_loss() {
        let p = ParamTensors::init(4, 3, 21).unwrap();
        let batch = vec![
            Sample::new(vec![vec![0.2, -0.1, 0.3], vec![0.0, 0.5, 0.1]], 0.7),
            Sample::new(vec![vec![0.9, 0.4, -0.2], vec![0.3, 0.3, 0.3]], 0.1),
        ];
        let (l, _) = backward(&p, &batch, None).unwrap();
        assert!((l - batch_loss(&p, &batch).unwrap()).abs() < 1e-14);
    }

    #[test]
    fn backward_rejects_empty_batch() {
        let p = ParamTensors::zeros(2, 2);
        assert!(backward(&p, &[], None).is_err());
    }
}
