//! File formats, text normalization, pipeline configuration and the
//! command-line front end around [`tsc_spoiler_core`].

pub use tsc_spoiler_core as core;

pub mod artifact;
pub mod cli;
pub mod config;
pub mod corpus;
pub mod embeddings;
pub mod error;
pub mod keywords;
pub mod pipeline;
pub mod text;

pub use error::{Error, Result};
