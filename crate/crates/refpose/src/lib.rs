//! File formats, synthetic fixtures and the command-line front end for
//! `refpose-core`.

pub mod commands;
pub mod config;
pub mod dataio;
pub mod error;
pub mod json;
pub mod overlay;

pub use error::{Error, Result};
pub use refpose_core as core;
