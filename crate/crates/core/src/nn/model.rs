//! Serialized model and input formats.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::tensor::Tensor;
use crate::error::FormatError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
    Sigmoid,
    Linear,
    Softmax,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecurrentActivation {
    Tanh,
    Linear,
}

fn linear() -> Activation {
    Activation::Linear
}

fn one() -> usize {
    1
}

fn tanh() -> RecurrentActivation {
    RecurrentActivation::Tanh
}

/// `y[j] = Σᵢ x[i]·weights[i][j] + bias[j]`, then `activation`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dense {
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
    #[serde(default = "linear")]
    pub activation: Activation,
}

/// Kernel laid out as `kernel[filter][row][col][depth]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Conv2D {
    pub kernel: Vec<Vec<Vec<Vec<f64>>>>,
    pub bias: Vec<f64>,
    #[serde(default = "one")]
    pub stride: usize,
    #[serde(default = "linear")]
    pub activation: Activation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaxPool2D {
    pub pool: [usize; 2],
    /// Defaults to the pool height.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stride: Option<usize>,
}

impl MaxPool2D {
    pub fn stride(&self) -> usize {
        self.stride.unwrap_or(self.pool[0])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimpleRnn {
    /// `[input features][units]`
    pub w_xh: Vec<Vec<f64>>,
    /// `[units][units]`
    pub w_hh: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
    #[serde(default = "tanh")]
    pub activation: RecurrentActivation,
}

impl SimpleRnn {
    pub fn units(&self) -> usize {
        self.bias.len()
    }
}

/// Input weights `w_*` are `[features][units]`, recurrent weights `u_*`
/// are `[units][units]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Lstm {
    pub w_i: Vec<Vec<f64>>,
    pub w_f: Vec<Vec<f64>>,
    pub w_c: Vec<Vec<f64>>,
    pub w_o: Vec<Vec<f64>>,
    pub u_i: Vec<Vec<f64>>,
    pub u_f: Vec<Vec<f64>>,
    pub u_c: Vec<Vec<f64>>,
    pub u_o: Vec<Vec<f64>>,
    pub b_i: Vec<f64>,
    pub b_f: Vec<f64>,
    pub b_c: Vec<f64>,
    pub b_o: Vec<f64>,
}

impl Lstm {
    pub fn units(&self) -> usize {
        self.b_i.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActivationLayer {
    pub activation: Activation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
#[allow(clippy::large_enum_variant)]
pub enum LayerSpec {
    Dense(Dense),
    Conv2d(Conv2D),
    Maxpool2d(MaxPool2D),
    Flatten,
    SimpleRnn(SimpleRnn),
    Lstm(Lstm),
    Activation(ActivationLayer),
}

/// Saturation thresholds of the tanh and sigmoid branch cascades.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActivationThresholds {
    pub tanh: f64,
    pub sigmoid: f64,
}

impl Default for ActivationThresholds {
    fn default() -> Self {
        ActivationThresholds {
            tanh: 3.0,
            sigmoid: 6.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub input_shape: Vec<usize>,
    pub layers: Vec<LayerSpec>,
    #[serde(default)]
    pub thresholds: ActivationThresholds,
}

impl ModelSpec {
    pub fn from_json(text: &str) -> Result<Self, FormatError> {
        let model: ModelSpec = serde_json::from_str(text)?;
        model.validate()?;
        Ok(model)
    }

    pub fn load(path: &Path) -> Result<Self, FormatError> {
        ModelSpec::from_json(&read(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn input_len(&self) -> usize {
        self.input_shape.iter().product()
    }

    /// Output width of the last layer.
    pub fn class_count(&self) -> Result<usize, FormatError> {
        let shapes = self.layer_shapes()?;
        let last = shapes.last().expect("at least the input shape");
        if last.len() != 1 {
            return Err(FormatError::Model(format!(
                "last layer yields shape {last:?}, expected a vector"
            )));
        }
        Ok(last[0])
    }

    pub fn validate(&self) -> Result<(), FormatError> {
        let t = self.thresholds;
        if !(t.tanh > 0.0 && t.sigmoid > 0.0) {
            return Err(FormatError::Model("thresholds must be positive".into()));
        }
        self.class_count().map(|_| ())
    }

    /// Shape after each layer, starting with the input shape.
    pub fn layer_shapes(&self) -> Result<Vec<Vec<usize>>, FormatError> {
        if self.input_shape.is_empty() || self.input_shape.contains(&0) {
            return Err(FormatError::Model(format!(
                "invalid input shape {:?}",
                self.input_shape
            )));
        }
        let mut shapes = vec![self.input_shape.clone()];
        for (i, layer) in self.layers.iter().enumerate() {
            let prev = shapes.last().unwrap();
            let next = output_shape(layer, prev)
                .map_err(|msg| FormatError::Model(format!("layer {i}: {msg}")))?;
            shapes.push(next);
        }
        Ok(shapes)
    }
}

fn matrix(m: &[Vec<f64>], rows: usize, cols: usize, name: &str) -> Result<(), String> {
    if m.len() != rows || m.iter().any(|r| r.len() != cols) {
        return Err(format!("{name} must be {rows}x{cols}"));
    }
    Ok(())
}

fn output_shape(layer: &LayerSpec, input: &[usize]) -> Result<Vec<usize>, String> {
    match layer {
        LayerSpec::Dense(d) => {
            let [n] = input else {
                return Err(format!("dense needs a vector input, got {input:?}"));
            };
            let out = d.bias.len();
            matrix(&d.weights, *n, out, "weights")?;
            if d.activation == Activation::Softmax && out == 0 {
                return Err("softmax over an empty vector".into());
            }
            Ok(vec![out])
        }
        LayerSpec::Conv2d(c) => {
            let [h, w, depth] = input else {
                return Err(format!("conv2d needs [H, W, D] input, got {input:?}"));
            };
            let filters = c.kernel.len();
            if filters == 0 || c.bias.len() != filters {
                return Err("kernel and bias filter counts differ".into());
            }
            let m = c.kernel[0].len();
            let n = c.kernel[0].first().map_or(0, Vec::len);
            let consistent = c.kernel.iter().all(|f| {
                f.len() == m
                    && f.iter()
                        .all(|r| r.len() == n && r.iter().all(|d| d.len() == *depth))
            });
            if !consistent || m == 0 || n == 0 {
                return Err(format!("kernel must be [filters][m][n][{depth}]"));
            }
            if c.stride == 0 {
                return Err("stride must be at least 1".into());
            }
            if *h < m || *w < n {
                return Err(format!("{m}x{n} kernel larger than {h}x{w} input"));
            }
            if c.activation == Activation::Softmax {
                return Err("softmax needs a vector".into());
            }
            Ok(vec![
                (h - m) / c.stride + 1,
                (w - n) / c.stride + 1,
                filters,
            ])
        }
        LayerSpec::Maxpool2d(p) => {
            let [h, w, depth] = input else {
                return Err(format!("maxpool2d needs [H, W, D] input, got {input:?}"));
            };
            let [m, n] = p.pool;
            let s = p.stride();
            if m == 0 || n == 0 || s == 0 {
                return Err("pool size and stride must be positive".into());
            }
            if *h < m || *w < n {
                return Err(format!("{m}x{n} pool larger than {h}x{w} input"));
            }
            Ok(vec![(h - m) / s + 1, (w - n) / s + 1, *depth])
        }
        LayerSpec::Flatten => Ok(vec![input.iter().product()]),
        LayerSpec::SimpleRnn(r) => {
            let [_, features] = input else {
                return Err(format!("simple_rnn needs [T, F] input, got {input:?}"));
            };
            let units = r.units();
            matrix(&r.w_xh, *features, units, "w_xh")?;
            matrix(&r.w_hh, units, units, "w_hh")?;
            Ok(vec![units])
        }
        LayerSpec::Lstm(l) => {
            let [_, features] = input else {
                return Err(format!("lstm needs [T, F] input, got {input:?}"));
            };
            let units = l.units();
            for (w, name) in [
                (&l.w_i, "w_i"),
                (&l.w_f, "w_f"),
                (&l.w_c, "w_c"),
                (&l.w_o, "w_o"),
            ] {
                matrix(w, *features, units, name)?;
            }
            for (u, name) in [
                (&l.u_i, "u_i"),
                (&l.u_f, "u_f"),
                (&l.u_c, "u_c"),
                (&l.u_o, "u_o"),
            ] {
                matrix(u, units, units, name)?;
            }
            if [&l.b_f, &l.b_c, &l.b_o].iter().any(|b| b.len() != units) {
                return Err("gate biases differ in length".into());
            }
            Ok(vec![units])
        }
        LayerSpec::Activation(a) => {
            if a.activation == Activation::Softmax && input.len() != 1 {
                return Err(format!("softmax needs a vector, got {input:?}"));
            }
            Ok(input.to_vec())
        }
    }
}

/// Input document: `{"shape": [...], "data": [...], "label": 0}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputFile {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<i64>,
}

impl InputFile {
    pub fn from_json(text: &str) -> Result<Self, FormatError> {
        let input: InputFile = serde_json::from_str(text)?;
        let n: usize = input.shape.iter().product();
        if input.shape.is_empty() || n != input.data.len() {
            return Err(FormatError::Input(format!(
                "shape {:?} does not match {} values",
                input.shape,
                input.data.len()
            )));
        }
        if input.data.iter().any(|v| !v.is_finite()) {
            return Err(FormatError::Input("non-finite value".into()));
        }
        Ok(input)
    }

    pub fn load(path: &Path) -> Result<Self, FormatError> {
        InputFile::from_json(&read(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("input serializes")
    }

    pub fn tensor(&self) -> Tensor {
        Tensor::from_values(self.shape.clone(), &self.data).expect("validated on load")
    }
}

pub(crate) fn read(path: &Path) -> Result<String, FormatError> {
    std::fs::read_to_string(path).map_err(|source| FormatError::Io {
        path: path.display().to_string(),
        source,
    })
}
