//! Command-line harness, file formats, model clients and the review service
//! around `maintbench-core`.

pub mod archive;
pub mod cli;
pub mod config;
pub mod curate;
pub mod dataset;
pub mod embed;
pub mod error;
pub mod provider;
pub mod render;
pub mod runner;
pub mod serve;
pub mod translate;

pub use error::{Error, Result};
