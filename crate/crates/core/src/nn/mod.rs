//! Instrumented neural-network layers, model files and forward passes.

mod activation;
mod forward;
mod layers;
mod model;
mod tensor;

pub use activation::{exp_c, relu, sigmoid_act, softmax, tanh_act};
pub use forward::{
    argmax, forward_concolic, forward_concrete, probabilities, ConcolicRun, Prediction,
};
pub use layers::{activate, conv2d, dense, lstm, lstm_states, maxpool2d, simple_rnn, LstmState};
pub use model::{
    Activation, ActivationLayer, ActivationThresholds, Conv2D, Dense, InputFile, LayerSpec, Lstm,
    MaxPool2D, ModelSpec, RecurrentActivation, SimpleRnn,
};
pub use tensor::Tensor;

pub(crate) use model::read;
