#![allow(dead_code)]

use std::path::PathBuf;
use std::time::Duration;

use neuroconcolic::concolic::Assignment;
use neuroconcolic::nn::{
    Activation, ActivationLayer, Conv2D, Dense, InputFile, LayerSpec, Lstm, MaxPool2D, ModelSpec,
    RecurrentActivation, SimpleRnn,
};
use neuroconcolic::solve::{
    ConstraintSystem, SmtProcess, Solver, SolverConfig, SolverResult, Status,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
}

pub fn load_fixture(stem: &str) -> (ModelSpec, InputFile) {
    let model = ModelSpec::load(&fixture(&format!("{stem}.model.json"))).unwrap();
    let input = InputFile::load(&fixture(&format!("{stem}.input.json"))).unwrap();
    (model, input)
}

pub fn solver_command() -> String {
    std::env::var("NEUROCONCOLIC_SOLVER").unwrap_or_else(|_| "z3".into())
}

pub fn smt_solver() -> Result<SmtProcess, String> {
    let config = SolverConfig::from_command(&solver_command()).ok_or("empty solver command")?;
    let p = SmtProcess::new(config);
    p.probe()?;
    Ok(p)
}

// ---- brute-force oracles on plain f64 ----

pub fn act(a: Activation, x: f64) -> f64 {
    match a {
        Activation::Relu => x.max(0.0),
        Activation::Tanh => x.tanh(),
        Activation::Sigmoid => 1.0 / (1.0 + (-x).exp()),
        Activation::Linear | Activation::Softmax => x,
    }
}

pub fn softmax_oracle(x: &[f64]) -> Vec<f64> {
    let m = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = x.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|v| v / s).collect()
}

pub fn dense_oracle(x: &[f64], l: &Dense) -> Vec<f64> {
    let y: Vec<f64> = (0..l.bias.len())
        .map(|j| l.bias[j] + (0..x.len()).map(|i| x[i] * l.weights[i][j]).sum::<f64>())
        .collect();
    apply(l.activation, y)
}

fn apply(a: Activation, y: Vec<f64>) -> Vec<f64> {
    if a == Activation::Softmax {
        softmax_oracle(&y)
    } else {
        y.into_iter().map(|v| act(a, v)).collect()
    }
}

/// `x` is `[h][w][d]` flattened; returns `[oh][ow][filters]` flattened.
pub fn conv_oracle(x: &[f64], shape: [usize; 3], l: &Conv2D) -> (Vec<f64>, [usize; 3]) {
    let [h, w, d] = shape;
    let (m, n, s) = (l.kernel[0].len(), l.kernel[0][0].len(), l.stride);
    let (oh, ow, f) = ((h - m) / s + 1, (w - n) / s + 1, l.kernel.len());
    let mut out = vec![0.0; oh * ow * f];
    for (idx, o) in out.iter_mut().enumerate() {
        let (i, j, k) = (idx / (ow * f), (idx / f) % ow, idx % f);
        let mut acc = 0.0;
        for dd in 0..d {
            for a in 0..m {
                for b in 0..n {
                    acc += x[((i * s + a) * w + j * s + b) * d + dd] * l.kernel[k][a][b][dd];
                }
            }
        }
        *o = act(l.activation, acc + l.bias[k]);
    }
    (out, [oh, ow, f])
}

pub fn maxpool_oracle(x: &[f64], shape: [usize; 3], l: &MaxPool2D) -> (Vec<f64>, [usize; 3]) {
    let [h, w, d] = shape;
    let ([m, n], s) = (l.pool, l.stride());
    let (oh, ow) = ((h - m) / s + 1, (w - n) / s + 1);
    let mut out = Vec::new();
    for i in 0..oh {
        for j in 0..ow {
            for k in 0..d {
                let mut best = f64::NEG_INFINITY;
                for a in 0..m {
                    for b in 0..n {
                        best = best.max(x[((i * s + a) * w + j * s + b) * d + k]);
                    }
                }
                out.push(best);
            }
        }
    }
    (out, [oh, ow, d])
}

fn matvec_t(w: &[Vec<f64>], x: &[f64], j: usize) -> f64 {
    x.iter().zip(w).map(|(xi, row)| xi * row[j]).sum()
}

pub fn rnn_oracle(x: &[f64], steps: usize, l: &SimpleRnn) -> Vec<f64> {
    let f = l.w_xh.len();
    let mut h = vec![0.0; l.bias.len()];
    for t in 0..steps {
        let xt = &x[t * f..(t + 1) * f];
        h = (0..h.len())
            .map(|j| {
                let z = matvec_t(&l.w_xh, xt, j) + matvec_t(&l.w_hh, &h, j) + l.bias[j];
                match l.activation {
                    RecurrentActivation::Tanh => z.tanh(),
                    RecurrentActivation::Linear => z,
                }
            })
            .collect();
    }
    h
}

/// Returns `(hidden, cell)` after the last step.
pub fn lstm_oracle(x: &[f64], steps: usize, l: &Lstm) -> (Vec<f64>, Vec<f64>) {
    let sig = |v: f64| 1.0 / (1.0 + (-v).exp());
    let (f, u) = (l.w_i.len(), l.b_i.len());
    let (mut h, mut c) = (vec![0.0; u], vec![0.0; u]);
    for t in 0..steps {
        let xt = &x[t * f..(t + 1) * f];
        let gate = |w: &[Vec<f64>], uu: &[Vec<f64>], b: &[f64], j: usize| {
            matvec_t(w, xt, j) + matvec_t(uu, &h, j) + b[j]
        };
        let mut hn = vec![0.0; u];
        let mut cn = vec![0.0; u];
        for j in 0..u {
            let i_g = sig(gate(&l.w_i, &l.u_i, &l.b_i, j));
            let f_g = sig(gate(&l.w_f, &l.u_f, &l.b_f, j));
            let o_g = sig(gate(&l.w_o, &l.u_o, &l.b_o, j));
            let cand = gate(&l.w_c, &l.u_c, &l.b_c, j).tanh();
            cn[j] = f_g * c[j] + i_g * cand;
            hn[j] = o_g * cn[j].tanh();
        }
        h = hn;
        c = cn;
    }
    (h, c)
}

/// Whole-model oracle; returns the final probabilities.
pub fn model_oracle(model: &ModelSpec, input: &[f64]) -> Vec<f64> {
    let mut x = input.to_vec();
    let mut shape = model.input_shape.clone();
    for layer in &model.layers {
        match layer {
            LayerSpec::Dense(l) => {
                x = dense_oracle(&x, l);
                shape = vec![x.len()];
            }
            LayerSpec::Conv2d(l) => {
                let (y, s) = conv_oracle(&x, [shape[0], shape[1], shape[2]], l);
                x = y;
                shape = s.to_vec();
            }
            LayerSpec::Maxpool2d(l) => {
                let (y, s) = maxpool_oracle(&x, [shape[0], shape[1], shape[2]], l);
                x = y;
                shape = s.to_vec();
            }
            LayerSpec::Flatten => shape = vec![x.len()],
            LayerSpec::SimpleRnn(l) => {
                x = rnn_oracle(&x, shape[0], l);
                shape = vec![x.len()];
            }
            LayerSpec::Lstm(l) => {
                x = lstm_oracle(&x, shape[0], l).0;
                shape = vec![x.len()];
            }
            LayerSpec::Activation(a) => x = apply(a.activation, x),
        }
    }
    x
}

// ---- random instances ----

pub fn vals(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-2.0..=2.0)).collect()
}

pub fn mat(rng: &mut impl Rng, r: usize, c: usize) -> Vec<Vec<f64>> {
    (0..r).map(|_| vals(rng, c)).collect()
}

pub fn pointwise(rng: &mut impl Rng) -> Activation {
    [
        Activation::Linear,
        Activation::Relu,
        Activation::Tanh,
        Activation::Sigmoid,
    ][rng.gen_range(0..4)]
}

pub fn random_dense(rng: &mut impl Rng, inputs: usize, outputs: usize) -> Dense {
    Dense {
        weights: mat(rng, inputs, outputs),
        bias: vals(rng, outputs),
        activation: pointwise(rng),
    }
}

/// Returns the layer and an input shape it accepts.
pub fn random_conv(rng: &mut impl Rng) -> (Conv2D, [usize; 3]) {
    let (h, w, d) = (
        rng.gen_range(1..=6),
        rng.gen_range(1..=6),
        rng.gen_range(1..=3),
    );
    let (m, n) = (rng.gen_range(1..=h), rng.gen_range(1..=w));
    let f = rng.gen_range(1..=4);
    let kernel = (0..f)
        .map(|_| (0..m).map(|_| mat(rng, n, d)).collect())
        .collect();
    let layer = Conv2D {
        kernel,
        bias: vals(rng, f),
        stride: rng.gen_range(1..=2),
        activation: pointwise(rng),
    };
    (layer, [h, w, d])
}

pub fn random_pool(rng: &mut impl Rng) -> (MaxPool2D, [usize; 3]) {
    let (h, w, d) = (
        rng.gen_range(1..=6),
        rng.gen_range(1..=6),
        rng.gen_range(1..=3),
    );
    let pool = [rng.gen_range(1..=h), rng.gen_range(1..=w)];
    let stride = if rng.gen_bool(0.5) {
        None
    } else {
        Some(rng.gen_range(1..=3))
    };
    (MaxPool2D { pool, stride }, [h, w, d])
}

pub fn random_rnn(rng: &mut impl Rng, features: usize, units: usize) -> SimpleRnn {
    SimpleRnn {
        w_xh: mat(rng, features, units),
        w_hh: mat(rng, units, units),
        bias: vals(rng, units),
        activation: if rng.gen_bool(0.8) {
            RecurrentActivation::Tanh
        } else {
            RecurrentActivation::Linear
        },
    }
}

pub fn random_lstm(rng: &mut impl Rng, features: usize, units: usize) -> Lstm {
    Lstm {
        w_i: mat(rng, features, units),
        w_f: mat(rng, features, units),
        w_c: mat(rng, features, units),
        w_o: mat(rng, features, units),
        u_i: mat(rng, units, units),
        u_f: mat(rng, units, units),
        u_c: mat(rng, units, units),
        u_o: mat(rng, units, units),
        b_i: vals(rng, units),
        b_f: vals(rng, units),
        b_c: vals(rng, units),
        b_o: vals(rng, units),
    }
}

fn softmax_layer() -> LayerSpec {
    LayerSpec::Activation(ActivationLayer {
        activation: Activation::Softmax,
    })
}

/// A small classifier of one of four families, chosen by `seed`.
pub fn random_model(seed: u64) -> ModelSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let classes = rng.gen_range(2..=4);
    let (input_shape, mut layers, flat) = match seed % 4 {
        0 => {
            let n = rng.gen_range(1..=6);
            let hidden = rng.gen_range(1..=6);
            (
                vec![n],
                vec![LayerSpec::Dense(random_dense(&mut rng, n, hidden))],
                hidden,
            )
        }
        1 => {
            let (conv, shape) = random_conv(&mut rng);
            let oh = (shape[0] - conv.kernel[0].len()) / conv.stride + 1;
            let ow = (shape[1] - conv.kernel[0][0].len()) / conv.stride + 1;
            let f = conv.kernel.len();
            let pool = MaxPool2D {
                pool: [rng.gen_range(1..=oh), rng.gen_range(1..=ow)],
                stride: Some(1),
            };
            let flat = (oh - pool.pool[0] + 1) * (ow - pool.pool[1] + 1) * f;
            (
                shape.to_vec(),
                vec![
                    LayerSpec::Conv2d(conv),
                    LayerSpec::Maxpool2d(pool),
                    LayerSpec::Flatten,
                ],
                flat,
            )
        }
        2 => {
            let (t, f, u) = (
                rng.gen_range(1..=4),
                rng.gen_range(1..=4),
                rng.gen_range(1..=4),
            );
            (
                vec![t, f],
                vec![LayerSpec::SimpleRnn(random_rnn(&mut rng, f, u))],
                u,
            )
        }
        _ => {
            let (t, f, u) = (
                rng.gen_range(1..=4),
                rng.gen_range(1..=4),
                rng.gen_range(1..=4),
            );
            (
                vec![t, f],
                vec![LayerSpec::Lstm(random_lstm(&mut rng, f, u))],
                u,
            )
        }
    };
    let mut head = random_dense(&mut rng, flat, classes);
    head.activation = Activation::Linear;
    layers.push(LayerSpec::Dense(head));
    layers.push(softmax_layer());
    ModelSpec {
        input_shape,
        layers,
        thresholds: Default::default(),
    }
}

/// Seeded dense+relu classifier: `inputs -> hidden -> hidden -> classes`.
pub fn relu_mlp(seed: u64, inputs: usize, hidden: usize, classes: usize) -> ModelSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut layer = |i: usize, o: usize, a: Activation| {
        let scale = 1.0 / (i as f64).sqrt();
        LayerSpec::Dense(Dense {
            weights: (0..i)
                .map(|_| {
                    (0..o)
                        .map(|_| rng.gen_range(-1.0..1.0) * scale * 1.7)
                        .collect()
                })
                .collect(),
            bias: (0..o).map(|_| rng.gen_range(-0.1..0.1)).collect(),
            activation: a,
        })
    };
    let layers = vec![
        layer(inputs, hidden, Activation::Relu),
        layer(hidden, hidden, Activation::Relu),
        layer(hidden, classes, Activation::Linear),
        softmax_layer(),
    ];
    ModelSpec {
        input_shape: vec![inputs],
        layers,
        thresholds: Default::default(),
    }
}

// ---- in-process solvers ----

/// Answers `unsat` to everything and remembers how deep each formula was.
#[derive(Default)]
pub struct RecordingSolver {
    pub sizes: Vec<usize>,
}

impl Solver for RecordingSolver {
    fn solve(&mut self, system: &ConstraintSystem, _timeout: Duration) -> SolverResult {
        self.sizes.push(system.assertions.len());
        SolverResult {
            status: Status::Unsat,
            model: None,
            approximate: false,
            elapsed: Duration::ZERO,
            query_bytes: system.render().len(),
            diagnostic: None,
        }
    }
}

/// Sampling search over `[lo, hi]` per variable. Reports `unknown` when
/// nothing satisfying turns up.
pub struct SamplingSolver {
    pub lo: f64,
    pub hi: f64,
    pub samples: usize,
    rng: ChaCha8Rng,
}

impl SamplingSolver {
    pub fn new(lo: f64, hi: f64, samples: usize, seed: u64) -> Self {
        SamplingSolver {
            lo,
            hi,
            samples,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl Solver for SamplingSolver {
    fn solve(&mut self, system: &ConstraintSystem, _timeout: Duration) -> SolverResult {
        let vars: Vec<usize> = system.referenced_vars().into_iter().collect();
        let mut result = SolverResult {
            status: Status::Unknown,
            model: None,
            approximate: false,
            elapsed: Duration::ZERO,
            query_bytes: system.render().len(),
            diagnostic: None,
        };
        for s in 0..self.samples {
            let a: Assignment = vars
                .iter()
                .map(|&v| {
                    let x = if vars.len() == 1 {
                        self.lo + (self.hi - self.lo) * s as f64 / (self.samples - 1).max(1) as f64
                    } else {
                        self.rng.gen_range(self.lo..=self.hi)
                    };
                    (v, x)
                })
                .collect();
            if system.satisfied_by(&a).unwrap_or(false) {
                result.status = Status::Sat;
                result.model = Some(a);
                break;
            }
        }
        result
    }
}
