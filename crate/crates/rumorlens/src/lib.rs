//! Rumor detection on short social-media texts with three hand-rolled
//! recurrent classifiers: a plain LSTM, an LSTM with dropout on the
//! embedding output, and an LSTM fed by a 1D convolution with max pooling.
//!
//! Every forward and backward pass is written out explicitly over a small
//! dense-matrix kernel; there is no autodiff framework underneath. Around
//! the models sits the full experimental protocol: tokenization and
//! fixed-length padding, stratified k-fold cross validation, hyperparameter
//! grid search, and a four-column metrics report (accuracy, precision,
//! recall, F-measure).
//!
//! The `rumorlens` binary exposes everything as subcommands: `train`,
//! `predict`, `cross-validate`, `grid-search`, `synthesize` and `report`.
//! The narrative guide under `book/` walks through each building block; its
//! code snippets double as doc-tests (see [`guide`]).

pub mod error;
pub mod rng;
pub mod tensor;
pub mod text;

pub mod cli;
pub mod data;
pub mod evaluation;
pub mod experiments;
pub mod guide;
pub mod layers;
pub mod model;

pub use error::{Error, Result};
pub use rng::SeededRng;
pub use tensor::Matrix2D;
