//! Extreme sparse multinomial logistic regression (ESMLR) for hyperspectral
//! image classification.
//!
//! The crate covers the whole pipeline: raster I/O and per-class splits
//! ([`hsi_data`]), random and kernel feature maps ([`feature_maps`]),
//! extended multi-attribute profiles ([`emaps`]), the sparse MLR solver and
//! training front end ([`esmlr`]) and accuracy metrics ([`evaluation`]).
//! With the default `cli` feature, [`experiment`] drives multi-trial runs.

pub mod emaps;
pub mod error;
pub mod esmlr;
pub mod evaluation;
#[cfg(feature = "cli")]
pub mod experiment;
pub mod feature_maps;
pub mod hsi_data;
pub mod synthetic;

pub use error::{EsmlrError, Result};
pub use esmlr::{predict, train, FeatureMode, PipelineSpec, TrainedModel, Variant};
