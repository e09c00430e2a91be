//! Information-spectrum tools for quantum sources, channels and dense coding.
//!
//! Operators are dense complex matrices. Rates are in nats throughout.

// `!(x < y)` is used on purpose so NaN inputs are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod capacity;
pub mod channel;
pub mod compression;
pub mod dense_coding;
pub mod error;
pub mod operator;
pub mod random;
pub mod spectrum;

pub use channel::{KrausChannel, Povm};
pub use error::{Error, Result};
pub use operator::{DensityMatrix, HermitianOperator, Matrix, Projector, Relation, SubsystemShape, C64};
pub use spectrum::{EstimatorConfig, RateBounds, RateEstimate, SourceSequence};
