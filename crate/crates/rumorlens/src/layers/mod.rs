//! Differentiable layers with explicit forward and backward passes.
//!
//! Every layer returns a cache from its forward pass; feeding that cache and
//! an upstream gradient to the matching backward function yields exact
//! reverse-mode gradients for the layer parameters and its input. No
//! autodiff tape is involved: each backward pass is written out by hand and
//! checked against central finite differences in the test suite.

mod conv;
mod dense;
mod dropout;
mod embedding;
mod lstm;

pub use conv::{maxpool1d, maxpool1d_backward, Conv1dLayer, ConvCache, ConvGrads, PoolCache};
pub use dense::{DenseCache, DenseSigmoid};
pub use dropout::{dropout, dropout_backward, DropoutCache, DropoutSpec};
pub use embedding::{EmbeddingCache, EmbeddingLayer};
pub use lstm::{LstmCache, LstmGrads, LstmLayer, LSTM_BLOCK_NAMES};

use serde::{Deserialize, Serialize};

/// Activation applied by the convolution layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Tanh,
}

impl Activation {
    pub fn parse(s: &str) -> Option<Activation> {
        match s {
            "relu" => Some(Activation::Relu),
            "tanh" => Some(Activation::Tanh),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
        }
    }
}

/// Train/eval switch; only dropout behaves differently between the two.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}
