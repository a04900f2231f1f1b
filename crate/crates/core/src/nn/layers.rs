//! Layer kernels over concolic tensors. Loop orders are fixed so the
//! recorded branch sequence is deterministic.

use super::activation::{relu, sigmoid_act, softmax, tanh_act};
use super::model::{
    Activation, ActivationThresholds, Conv2D, Dense, Lstm, MaxPool2D, RecurrentActivation,
    SimpleRnn,
};
use super::tensor::Tensor;
use crate::concolic::{BranchTrace, ConcolicValue, Relation};
use crate::error::ExecError;

fn c(v: f64) -> ConcolicValue {
    ConcolicValue::constant(v)
}

/// `acc + x·w`
fn mac(acc: &ConcolicValue, x: &ConcolicValue, w: f64) -> Result<ConcolicValue, ExecError> {
    acc.add(&x.mul(&c(w))?)
}

pub fn activate(
    input: Tensor,
    activation: Activation,
    rec: &mut BranchTrace,
    thresholds: &ActivationThresholds,
) -> Result<Tensor, ExecError> {
    let shape = input.shape().to_vec();
    let data: Result<Vec<ConcolicValue>, ExecError> = match activation {
        Activation::Linear => return Ok(input),
        Activation::Softmax => return softmax(&input),
        Activation::Relu => input.data().iter().map(|x| Ok(relu(x, rec))).collect(),
        Activation::Tanh => input
            .data()
            .iter()
            .map(|x| tanh_act(x, rec, thresholds))
            .collect(),
        Activation::Sigmoid => input
            .data()
            .iter()
            .map(|x| sigmoid_act(x, rec, thresholds))
            .collect(),
    };
    Tensor::new(shape, data?)
}

pub fn dense(
    input: &Tensor,
    layer: &Dense,
    rec: &mut BranchTrace,
    thresholds: &ActivationThresholds,
) -> Result<Tensor, ExecError> {
    input.expect_rank(1, "dense")?;
    if input.len() != layer.weights.len() {
        return Err(ExecError::shape(format!(
            "dense expects {} inputs, got {}",
            layer.weights.len(),
            input.len()
        )));
    }
    let out = layer.bias.len();
    let mut outputs = Vec::with_capacity(out);
    for j in 0..out {
        let mut acc = c(0.0);
        for (x, row) in input.data().iter().zip(&layer.weights) {
            acc = mac(&acc, x, row[j])?;
        }
        outputs.push(acc.add(&c(layer.bias[j]))?);
    }
    activate(
        Tensor::new(vec![out], outputs)?,
        layer.activation,
        rec,
        thresholds,
    )
}

pub fn conv2d(
    input: &Tensor,
    layer: &Conv2D,
    rec: &mut BranchTrace,
    thresholds: &ActivationThresholds,
) -> Result<Tensor, ExecError> {
    input.expect_rank(3, "conv2d")?;
    let (h, w, depth) = (input.shape()[0], input.shape()[1], input.shape()[2]);
    let filters = layer.kernel.len();
    let m = layer.kernel.first().map_or(0, Vec::len);
    let n = layer
        .kernel
        .first()
        .and_then(|f| f.first())
        .map_or(0, Vec::len);
    let l = layer
        .kernel
        .first()
        .and_then(|f| f.first())
        .and_then(|r| r.first())
        .map_or(0, Vec::len);
    let s = layer.stride;
    if filters == 0 || l != depth || h < m || w < n || s == 0 || layer.bias.len() != filters {
        return Err(ExecError::shape(format!(
            "conv2d kernel {filters}x{m}x{n}x{l} stride {s} incompatible with input {:?}",
            input.shape()
        )));
    }
    let (oh, ow) = ((h - m) / s + 1, (w - n) / s + 1);
    let mut out = vec![c(0.0); oh * ow * filters];
    for k in 0..filters {
        for i in 0..oh {
            for j in 0..ow {
                let mut acc = c(0.0);
                for row in i * s..i * s + m {
                    for col in j * s..j * s + n {
                        for dep in 0..depth {
                            let weight = layer.kernel[k][row - i * s][col - j * s][dep];
                            acc = mac(&acc, input.at(&[row, col, dep]), weight)?;
                        }
                    }
                }
                out[(i * ow + j) * filters + k] = acc.add(&c(layer.bias[k]))?;
            }
        }
    }
    activate(
        Tensor::new(vec![oh, ow, filters], out)?,
        layer.activation,
        rec,
        thresholds,
    )
}

pub fn maxpool2d(
    input: &Tensor,
    layer: &MaxPool2D,
    rec: &mut BranchTrace,
) -> Result<Tensor, ExecError> {
    input.expect_rank(3, "maxpool2d")?;
    let (h, w, depth) = (input.shape()[0], input.shape()[1], input.shape()[2]);
    let [m, n] = layer.pool;
    let s = layer.stride();
    if m == 0 || n == 0 || s == 0 || h < m || w < n {
        return Err(ExecError::shape(format!(
            "pool {m}x{n} stride {s} incompatible with input {:?}",
            input.shape()
        )));
    }
    let (oh, ow) = ((h - m) / s + 1, (w - n) / s + 1);
    let mut out = Vec::with_capacity(oh * ow * depth);
    for i in 0..oh {
        for j in 0..ow {
            for k in 0..depth {
                let mut window = (i * s..i * s + m)
                    .flat_map(|row| (j * s..j * s + n).map(move |col| (row, col)))
                    .map(|(row, col)| input.at(&[row, col, k]));
                let mut best = window.next().expect("non-empty window");
                for candidate in window {
                    if rec.compare(best, candidate, Relation::Lt) {
                        best = candidate;
                    }
                }
                out.push(best.clone());
            }
        }
    }
    Tensor::new(vec![oh, ow, depth], out)
}

fn rows(seq: &Tensor, what: &str, features: usize) -> Result<Vec<Vec<ConcolicValue>>, ExecError> {
    seq.expect_rank(2, what)?;
    if seq.shape()[1] != features {
        return Err(ExecError::shape(format!(
            "{what} expects {features} features per step, got {}",
            seq.shape()[1]
        )));
    }
    Ok(seq.data().chunks(features).map(<[_]>::to_vec).collect())
}

pub fn simple_rnn(
    seq: &Tensor,
    layer: &SimpleRnn,
    rec: &mut BranchTrace,
    thresholds: &ActivationThresholds,
) -> Result<Tensor, ExecError> {
    let units = layer.units();
    let steps = rows(seq, "simple_rnn", layer.w_xh.len())?;
    let mut h_prev = vec![c(0.0); units];
    for x in &steps {
        let mut h_next = Vec::with_capacity(units);
        for i in 0..units {
            let mut h = c(0.0);
            for (hj, row) in h_prev.iter().zip(&layer.w_hh) {
                h = mac(&h, hj, row[i])?;
            }
            for (xj, row) in x.iter().zip(&layer.w_xh) {
                h = mac(&h, xj, row[i])?;
            }
            h = h.add(&c(layer.bias[i]))?;
            h_next.push(match layer.activation {
                RecurrentActivation::Tanh => tanh_act(&h, rec, thresholds)?,
                RecurrentActivation::Linear => h,
            });
        }
        h_prev = h_next;
    }
    Tensor::new(vec![units], h_prev)
}

/// Final hidden and cell states of an LSTM run.
#[derive(Debug, Clone)]
pub struct LstmState {
    pub hidden: Vec<ConcolicValue>,
    pub cell: Vec<ConcolicValue>,
}

pub fn lstm_states(
    seq: &Tensor,
    layer: &Lstm,
    rec: &mut BranchTrace,
    thresholds: &ActivationThresholds,
) -> Result<LstmState, ExecError> {
    let units = layer.units();
    let steps = rows(seq, "lstm", layer.w_i.len())?;
    let mut h_prev = vec![c(0.0); units];
    let mut c_prev = vec![c(0.0); units];
    for x in &steps {
        // gate pre-activations: input sums, recurrent sums, then biases
        let (mut gi, mut gf, mut go, mut gc) = (
            vec![c(0.0); units],
            vec![c(0.0); units],
            vec![c(0.0); units],
            vec![c(0.0); units],
        );
        for j in 0..units {
            for (k, xk) in x.iter().enumerate() {
                gi[j] = mac(&gi[j], xk, layer.w_i[k][j])?;
                gf[j] = mac(&gf[j], xk, layer.w_f[k][j])?;
                go[j] = mac(&go[j], xk, layer.w_o[k][j])?;
                gc[j] = mac(&gc[j], xk, layer.w_c[k][j])?;
            }
            for (l, hl) in h_prev.iter().enumerate() {
                gi[j] = mac(&gi[j], hl, layer.u_i[l][j])?;
                gf[j] = mac(&gf[j], hl, layer.u_f[l][j])?;
                go[j] = mac(&go[j], hl, layer.u_o[l][j])?;
                gc[j] = mac(&gc[j], hl, layer.u_c[l][j])?;
            }
            gi[j] = gi[j].add(&c(layer.b_i[j]))?;
            gf[j] = gf[j].add(&c(layer.b_f[j]))?;
            go[j] = go[j].add(&c(layer.b_o[j]))?;
            gc[j] = gc[j].add(&c(layer.b_c[j]))?;
        }
        let mut c_next = Vec::with_capacity(units);
        let mut h_next = Vec::with_capacity(units);
        for j in 0..units {
            let forget = sigmoid_act(&gf[j], rec, thresholds)?.mul(&c_prev[j])?;
            let input_gate = sigmoid_act(&gi[j], rec, thresholds)?;
            let candidate = tanh_act(&gc[j], rec, thresholds)?;
            let cell = forget.add(&input_gate.mul(&candidate)?)?;
            let out_gate = sigmoid_act(&go[j], rec, thresholds)?;
            let hidden = out_gate.mul(&tanh_act(&cell, rec, thresholds)?)?;
            c_next.push(cell);
            h_next.push(hidden);
        }
        c_prev = c_next;
        h_prev = h_next;
    }
    Ok(LstmState {
        hidden: h_prev,
        cell: c_prev,
    })
}

pub fn lstm(
    seq: &Tensor,
    layer: &Lstm,
    rec: &mut BranchTrace,
    thresholds: &ActivationThresholds,
) -> Result<Tensor, ExecError> {
    let state = lstm_states(seq, layer, rec, thresholds)?;
    Tensor::new(vec![layer.units()], state.hidden)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn th() -> ActivationThresholds {
        ActivationThresholds::default()
    }

    #[test]
    fn dense_identity_and_sum() {
        let id = Dense {
            weights: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            bias: vec![0.0, 0.0],
            activation: Activation::Linear,
        };
        let x = Tensor::vector(&[0.3, -1.5]);
        let y = dense(&x, &id, &mut BranchTrace::new(), &th()).unwrap();
        assert_eq!(y.values(), vec![0.3, -1.5]);

        let sum = Dense {
            weights: vec![vec![1.0], vec![1.0]],
            bias: vec![0.5],
            activation: Activation::Linear,
        };
        let y = dense(
            &Tensor::vector(&[1.0, 2.0]),
            &sum,
            &mut BranchTrace::new(),
            &th(),
        )
        .unwrap();
        assert_eq!(y.values(), vec![3.5]);
        assert!(dense(
            &Tensor::vector(&[1.0]),
            &sum,
            &mut BranchTrace::new(),
            &th()
        )
        .is_err());
    }

    #[test]
    fn conv_worked_example() {
        let input = Tensor::from_values(
            vec![3, 3, 1],
            &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0],
        )
        .unwrap();
        let layer = Conv2D {
            kernel: vec![vec![vec![vec![1.0]; 2]; 2]],
            bias: vec![0.0],
            stride: 1,
            activation: Activation::Linear,
        };
        let out = conv2d(&input, &layer, &mut BranchTrace::new(), &th()).unwrap();
        assert_eq!(out.shape(), &[2, 2, 1]);
        assert_eq!(out.values(), vec![12.0, 16.0, 24.0, 28.0]);
    }

    #[test]
    fn conv_identity_kernel_and_bias_only() {
        let vals: Vec<f64> = (0..18).map(|v| v as f64 * 0.25 - 2.0).collect();
        let input = Tensor::from_values(vec![3, 3, 2], &vals).unwrap();
        // two filters, each picking one input channel
        let layer = Conv2D {
            kernel: vec![vec![vec![vec![1.0, 0.0]]], vec![vec![vec![0.0, 1.0]]]],
            bias: vec![0.0, 0.0],
            stride: 1,
            activation: Activation::Linear,
        };
        let out = conv2d(&input, &layer, &mut BranchTrace::new(), &th()).unwrap();
        assert_eq!(out.values(), vals);

        let zeros = Tensor::from_values(vec![2, 2, 1], &[0.0; 4]).unwrap();
        let layer = Conv2D {
            kernel: vec![vec![vec![vec![0.3]]]],
            bias: vec![0.7],
            stride: 1,
            activation: Activation::Linear,
        };
        let out = conv2d(&zeros, &layer, &mut BranchTrace::new(), &th()).unwrap();
        assert_eq!(out.values(), vec![0.7; 4]);
    }

    #[test]
    fn conv_shape_errors() {
        let input = Tensor::from_values(vec![2, 2, 1], &[0.0; 4]).unwrap();
        let layer = Conv2D {
            kernel: vec![vec![vec![vec![1.0]; 3]; 3]],
            bias: vec![0.0],
            stride: 1,
            activation: Activation::Linear,
        };
        assert!(matches!(
            conv2d(&input, &layer, &mut BranchTrace::new(), &th()),
            Err(ExecError::Shape(_))
        ));
    }

    #[test]
    fn maxpool_worked_example() {
        let vals: Vec<f64> = (1..=16).map(f64::from).collect();
        let input = Tensor::from_values(vec![4, 4, 1], &vals).unwrap();
        let layer = MaxPool2D {
            pool: [2, 2],
            stride: Some(2),
        };
        let out = maxpool2d(&input, &layer, &mut BranchTrace::new()).unwrap();
        assert_eq!(out.values(), vec![6.0, 8.0, 14.0, 16.0]);

        let flat = Tensor::from_values(vec![4, 4, 1], &[0.4; 16]).unwrap();
        let out = maxpool2d(&flat, &layer, &mut BranchTrace::new()).unwrap();
        assert_eq!(out.values(), vec![0.4; 4]);
    }

    #[test]
    fn maxpool_keeps_symbolic_winner() {
        let mut data = vec![ConcolicValue::constant(0.1); 4];
        data[2] = ConcolicValue::variable(0.9, 0);
        let input = Tensor::new(vec![2, 2, 1], data).unwrap();
        let layer = MaxPool2D {
            pool: [2, 2],
            stride: None,
        };
        let mut rec = BranchTrace::new();
        let out = maxpool2d(&input, &layer, &mut rec).unwrap();
        assert_eq!(out.data()[0].val, 0.9);
        assert!(out.data()[0].is_symbolic());
        // one compare against the symbolic element, one after it wins
        assert_eq!(rec.len(), 2);
        assert!(rec.predicates()[0].taken);
        assert!(!rec.predicates()[1].taken);
    }

    #[test]
    fn rnn_worked_example() {
        let layer = SimpleRnn {
            w_xh: vec![vec![0.1, 0.02], vec![0.3, 0.5]],
            w_hh: vec![vec![1.0, 0.1], vec![2.0, 0.2]],
            bias: vec![0.2, 0.1],
            activation: RecurrentActivation::Linear,
        };
        let one_step = Tensor::from_values(vec![1, 2], &[0.2, 0.4]).unwrap();
        let h1 = simple_rnn(&one_step, &layer, &mut BranchTrace::new(), &th()).unwrap();
        assert!((h1.values()[0] - 0.34).abs() < 1e-12);
        assert!((h1.values()[1] - 0.304).abs() < 1e-12);

        let seq = Tensor::new(
            vec![2, 2],
            vec![
                ConcolicValue::constant(0.2),
                ConcolicValue::constant(0.4),
                ConcolicValue::variable(-0.8, 0),
                ConcolicValue::constant(-0.4),
            ],
        )
        .unwrap();
        let h2 = simple_rnn(&seq, &layer, &mut BranchTrace::new(), &th()).unwrap();
        let v = h2.values();
        assert!(
            (v[0] - 0.948).abs() < 1e-12 && (v[1] + 0.0212).abs() < 1e-12,
            "{v:?}"
        );
        let a0 = h2.data()[0].exp.as_ref().unwrap().affine().unwrap();
        let a1 = h2.data()[1].exp.as_ref().unwrap().affine().unwrap();
        assert!((a0.constant - 1.028).abs() < 1e-9 && (a0.coeff(0) - 0.1).abs() < 1e-9);
        assert!((a1.constant + 0.0052).abs() < 1e-9 && (a1.coeff(0) - 0.02).abs() < 1e-9);
    }

    #[test]
    fn rnn_zero_weights() {
        let layer = SimpleRnn {
            w_xh: vec![vec![0.0; 3]; 2],
            w_hh: vec![vec![0.0; 3]; 3],
            bias: vec![0.0; 3],
            activation: RecurrentActivation::Tanh,
        };
        let seq = Tensor::from_values(vec![4, 2], &[0.5; 8]).unwrap();
        let h = simple_rnn(&seq, &layer, &mut BranchTrace::new(), &th()).unwrap();
        assert_eq!(h.values(), vec![0.0; 3]);
    }

    fn zero_lstm(features: usize, units: usize) -> Lstm {
        let w = vec![vec![0.0; units]; features];
        let u = vec![vec![0.0; units]; units];
        let b = vec![0.0; units];
        Lstm {
            w_i: w.clone(),
            w_f: w.clone(),
            w_c: w.clone(),
            w_o: w,
            u_i: u.clone(),
            u_f: u.clone(),
            u_c: u.clone(),
            u_o: u,
            b_i: b.clone(),
            b_f: b.clone(),
            b_c: b.clone(),
            b_o: b,
        }
    }

    #[test]
    fn lstm_zero_fixed_point() {
        let layer = zero_lstm(2, 3);
        let seq = Tensor::from_values(vec![3, 2], &[0.7, -0.2, 1.0, 0.0, 0.3, 0.3]).unwrap();
        let st = lstm_states(&seq, &layer, &mut BranchTrace::new(), &th()).unwrap();
        assert!(st.hidden.iter().chain(&st.cell).all(|v| v.val == 0.0));
    }

    #[test]
    fn lstm_forget_bias_sweep_is_monotone() {
        // constant input; bigger forget bias keeps more of the cell state
        let mut layer = zero_lstm(1, 1);
        layer.w_c = vec![vec![0.8]];
        layer.w_i = vec![vec![0.5]];
        let seq = Tensor::from_values(vec![5, 1], &[1.0; 5]).unwrap();
        let mut prev = f64::NEG_INFINITY;
        for bf in [-2.0, 0.0, 2.0] {
            layer.b_f = vec![bf];
            let st = lstm_states(&seq, &layer, &mut BranchTrace::new(), &th()).unwrap();
            let magnitude = st.cell[0].val.abs();
            assert!(magnitude > prev, "b_f={bf}: {magnitude} <= {prev}");
            prev = magnitude;
        }
    }
}
