//! Faster-than-Nyquist BPSK signaling laboratory.
//!
//! The crate builds the intersymbol-interference model of root-raised-cosine
//! FTN signaling, whitens it by spectral factorization, measures linear and
//! Gaussian separability margins, and detects symbol blocks with
//! probabilistic data association (PDA). Exhaustive MLSE and a Monte Carlo
//! BER harness provide the references the detectors are checked against.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod detect;
pub mod error;
pub mod isi;
pub mod poly;
pub mod pulse;
pub mod run;
pub mod separability;
pub mod sim;
pub mod validate;

pub use error::{Error, Result};
