//! Tabular binary-classification toolkit for survey non-response modelling.
//!
//! The crate covers the whole workflow: CSV ingestion and imputation
//! ([`tabular`]), leak-free encoding/scaling pipelines ([`preprocess`]),
//! eight classifiers ([`classify`], [`trees`], [`linear_margin`], [`mlp`])
//! driven by first-order optimizers ([`optim`]), imbalanced-classification
//! metrics and model selection ([`eval`]), and permutation importance plus
//! feature clustering ([`interpret`]).
//!
//! Labels are `u8` in `{0, 1}` everywhere except at the SVC boundary, where
//! they are mapped to `{-1, +1}`. Feature matrices are row-major
//! `ndarray::Array2<f64>`.

pub mod classify;
pub mod error;
pub mod eval;
pub mod interpret;
pub mod linear_margin;
pub mod mlp;
pub mod model;
pub mod optim;
pub mod preprocess;
pub mod rng;
pub mod tabular;
pub mod trees;

pub use error::{Error, Result};
