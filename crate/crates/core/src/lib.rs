//! Random one-dimensional Schrodinger operators: transfer matrices, finite-box
//! spectral data, large-deviation estimators and localization experiments.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod estimators;
pub mod experiments;
pub mod measures;
pub mod numeric;
pub mod parallel;
pub mod rng;
pub mod spectral;
pub mod stats;
pub mod transfer;

pub use error::{LabError, Result};
pub use measures::{BaseMeasure, DensitySequence, LawTag, PotentialWindow, ProductLaw};
pub use numeric::{ExactSum, LogDet, Scalar, SignedLog};
pub use rng::RngStream;
pub use transfer::{Energy, ScaledMatrix};
