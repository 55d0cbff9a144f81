//! The narrative guide, compiled straight from `book/src/`.
//!
//! Each chapter is included as a module's documentation, so every code
//! block in the book runs under `cargo test --doc` and the rendered book
//! (`mdbook build book/`) can never drift from the library.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/matrices-and-randomness.md")]
pub mod matrices_and_randomness {}

#[doc = include_str!("../../../book/src/text-pipeline.md")]
pub mod text_pipeline {}

#[doc = include_str!("../../../book/src/layers.md")]
pub mod layers {}

#[doc = include_str!("../../../book/src/models-and-training.md")]
pub mod models_and_training {}

#[doc = include_str!("../../../book/src/evaluation.md")]
pub mod evaluation {}

#[doc = include_str!("../../../book/src/experiments.md")]
pub mod experiments {}

#[doc = include_str!("../../../book/src/data-formats.md")]
pub mod data_formats {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
