//! Core algorithms for benchmarking LLM classifiers on wind turbine
//! maintenance logs.
//!
//! The crate is `no_std` with `alloc`: everything here is a pure function of
//! its inputs. Reading and writing files, talking to model endpoints and the
//! command line live in the `maintbench` crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod cluster;
pub mod curation;
pub mod labels;
pub mod metrics;
pub mod model;
pub mod prompt;
pub mod ratelimit;
pub mod report;
pub mod text;
pub mod validate;

pub use labels::{resolve_labels, ResolvedLabelSet};
pub use model::*;
pub use prompt::{estimate_tokens, render_prompt, PromptTemplate};
pub use text::levenshtein;
pub use validate::validate_output;
