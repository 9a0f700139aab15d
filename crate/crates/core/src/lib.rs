//! Spoiler detection for time-sync comments.
//!
//! A comment is encoded by a bidirectional LSTM with word attention, then
//! compared with the comments just before it and with the keyframes (densest
//! comment bursts) near the end of its video. A comment far more similar to
//! the ending than to its own conversation is flagged as a spoiler.
//!
//! The crate is `no_std` (with `alloc`); file formats, tokenization and the
//! command-line tool live in the `tsc-spoiler` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod autodiff;
pub mod corpus;
pub mod embedding;
pub mod encoder;
pub mod error;
pub mod evaluator;
pub mod keyframes;
pub mod math;
pub mod matrix;
pub mod model;
pub mod optim;
pub mod sbn;
pub mod synth;
pub mod trainer;

pub use error::{Error, Result};
