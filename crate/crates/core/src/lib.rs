#![allow(clippy::neg_cmp_op_on_partial_ord)]
//! Synthetic pseudo-patient cohorts with planted biotypes, four semi-supervised
//! stratification algorithms, and the scoring harness that compares them.
//!
//! Module map:
//!
//! * [`datagen`] reference cohorts, planted clusters, presets, dataset IO
//! * [`hydra`] polytope of max-margin classifiers with DPP initialization
//! * [`sustain`] linear z-score event sequences fitted by EM, MCMC uncertainty
//! * [`patterngan`] shallow adversarial pattern models (categorical and R-index)
//! * [`eval`] matched accuracy, k-means, pattern score, benchmark grid, reports

pub mod datagen;
pub mod error;
pub mod eval;
pub mod hydra;
pub mod matrix;
pub mod patterngan;
pub mod rng;
pub mod sustain;
pub mod time;

pub use datagen::{CohortMatrix, Family, GroundTruth, LabeledDataset, Preset, Role, SynthConfig};
pub use error::{Error, Result};
pub use eval::{Algorithm, BenchmarkRecord, MatchResult, RecordStatus};

pub use matrix::Matrix;
pub use time::Deadline;
