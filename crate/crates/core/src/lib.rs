//! Argument component classification (claim / evidence / warrant) for
//! multi-party discussions, with local and speaker context.

pub mod cli;
pub mod context;
pub mod corpus;
pub mod embeddings;
pub mod error;
pub mod experiment;
pub mod features;
pub mod neural;
pub mod synth;

pub use error::{Error, Result};
