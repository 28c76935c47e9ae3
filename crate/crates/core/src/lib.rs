//! Synthetic online-handwriting augmentation for Alzheimer's-vs-healthy
//! classification.
//!
//! Pen recordings are segmented by movement mode and turned into acceleration
//! series ([`ink`]). Per-class MDN-LSTM generators ([`generator`]) sample new
//! series, which are encoded as 64x64 grayscale images ([`imaging`]) and kept
//! only when a five-CNN majority-vote ensemble ([`judge`]) agrees with the
//! generator's class. [`clf`] trains the final classifier and runs the
//! scenario evaluation matrix.

// `!(x > 0.0)` guards reject NaN as well as non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod clf;
pub mod corpus;
pub mod generator;
pub mod imaging;
pub mod ink;
pub mod judge;
pub mod neural;
pub mod par;

pub use ink::{AccelSeries, Class, MovementMode, PointSample, Provenance, Recording};
