//! Multiparameter quantum phase estimation.
//!
//! Sparse Fock-space probes, quantum and classical Fisher information,
//! optimal measurements, passive linear-optical circuits and Bayesian or
//! maximum-likelihood estimators. Mode 0 is always the phase reference.

// `!(x > 0.0)` is used on purpose so that NaN takes the rejecting branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod circuits;
pub mod error;
pub mod estimate;
pub mod fisher;
pub mod hilbert;
pub mod measure;
pub mod probes;
pub mod rng;

pub use error::{Error, Result};
pub use fisher::{InfoMatrix, ProbabilityModel};
pub use hilbert::{FockState, OccupationVector, PhaseVector};
