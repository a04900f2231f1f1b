use super::activation::softmax;
use super::layers::{activate, conv2d, dense, lstm, maxpool2d, simple_rnn};
use super::model::{LayerSpec, ModelSpec};
use super::tensor::Tensor;
use crate::concolic::{BranchTrace, ConcolicValue};
use crate::error::ExecError;

/// Result of one forward pass.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Prediction {
    pub class: usize,
    pub probs: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ConcolicRun {
    pub prediction: Prediction,
    pub trace: BranchTrace,
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

fn run_layers(
    model: &ModelSpec,
    input: Tensor,
    rec: &mut BranchTrace,
) -> Result<Tensor, ExecError> {
    if input.shape() != model.input_shape.as_slice() {
        return Err(ExecError::shape(format!(
            "model expects input {:?}, got {:?}",
            model.input_shape,
            input.shape()
        )));
    }
    let th = &model.thresholds;
    let mut x = input;
    for layer in &model.layers {
        x = match layer {
            LayerSpec::Dense(l) => dense(&x, l, rec, th)?,
            LayerSpec::Conv2d(l) => conv2d(&x, l, rec, th)?,
            LayerSpec::Maxpool2d(l) => maxpool2d(&x, l, rec)?,
            LayerSpec::Flatten => {
                let n = x.len();
                x.reshape(vec![n])?
            }
            LayerSpec::SimpleRnn(l) => simple_rnn(&x, l, rec, th)?,
            LayerSpec::Lstm(l) => lstm(&x, l, rec, th)?,
            LayerSpec::Activation(a) => activate(x, a.activation, rec, th)?,
        };
    }
    x.expect_rank(1, "classifier output")?;
    if x.data().iter().any(|v| !v.val.is_finite()) {
        return Err(ExecError::NumericOverflow);
    }
    Ok(x)
}

/// Runs `model` with the positions in `sym_vars` promoted to attack
/// variables. Each entry is `(flat input index, variable id)`.
pub fn forward_concolic(
    model: &ModelSpec,
    input: &Tensor,
    sym_vars: &[(usize, usize)],
) -> Result<ConcolicRun, ExecError> {
    let mut data: Vec<ConcolicValue> = input
        .values()
        .into_iter()
        .map(ConcolicValue::constant)
        .collect();
    for &(index, id) in sym_vars {
        let slot = data.get_mut(index).ok_or_else(|| {
            ExecError::shape(format!(
                "symbolic index {index} outside input of {}",
                input.len()
            ))
        })?;
        *slot = ConcolicValue::variable(slot.val, id);
    }
    let seeded = Tensor::new(input.shape().to_vec(), data)?;
    let mut trace = BranchTrace::new();
    let out = run_layers(model, seeded, &mut trace)?;
    let probs = out.values();
    Ok(ConcolicRun {
        prediction: Prediction {
            class: argmax(&probs),
            probs,
        },
        trace,
    })
}

/// Plain prediction. Shares every kernel with [`forward_concolic`]; with no
/// symbolic inputs nothing is recorded.
pub fn forward_concrete(model: &ModelSpec, input: &Tensor) -> Result<Prediction, ExecError> {
    let plain = Tensor::from_values(input.shape().to_vec(), &input.values())?;
    let mut scratch = BranchTrace::new();
    let out = run_layers(model, plain, &mut scratch)?;
    debug_assert!(scratch.is_empty());
    let probs = out.values();
    Ok(Prediction {
        class: argmax(&probs),
        probs,
    })
}

/// Probabilities of a logit vector, as the final layer would compute them.
pub fn probabilities(logits: &[f64]) -> Result<Vec<f64>, ExecError> {
    Ok(softmax(&Tensor::vector(logits))?.values())
}
