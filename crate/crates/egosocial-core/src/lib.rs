//! Sequence-level social interaction detection for egocentric photo-streams.
//!
//! A wearable camera takes a photo every ~30 seconds. Face tracks extracted
//! from such a stream tell us, frame by frame, how far away a person stands
//! and which way they are looking. Whether that person is actually engaged
//! with the camera wearer is a property of the whole sequence, not of any
//! single frame.
//!
//! This crate turns raw face observations into the two F-formation features
//! (distance in cm, head orientation in degrees), builds labeled time series
//! from them, and classifies those series with a small custom LSTM — memory
//! cell blocks with input and output gates, peephole connections and no
//! forget gates — trained by full backpropagation through time. A frame
//! voting baseline, precision/recall/F-measure evaluation and a random
//! hyperparameter search round out the pipeline.
//!
//! The crate is `no_std`-compatible (with `alloc`); file formats, the CLI
//! and thread pools live in the companion `egosocial-cli` crate.

#![cfg_attr(not(any(feature = "std", test)), no_std)]
// Validation guards are written `!(x > 0.0)` rather than `x <= 0.0` so that
// NaN fails the check instead of slipping through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod baseline;
pub mod dataset;
pub mod error;
pub mod evaluation;
pub mod geometry;
pub mod lstm;
pub mod search;
pub mod training;

mod fmath;
mod rng;

pub use error::{Error, Result};
pub use rng::{derived_rng, seeded_rng};
