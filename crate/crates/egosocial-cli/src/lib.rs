//! Std companion to `egosocial-core`: file formats, run configuration, and
//! a multi-threaded hyperparameter-search driver.
//!
//! The core crate holds the numerics and stays `no_std`-friendly; everything
//! that touches files, threads, or wall clocks lives here.

pub mod config;
pub mod formats;
pub mod parallel;
