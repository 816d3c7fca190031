#![cfg_attr(not(any(feature = "std", test)), no_std)]

extern crate alloc;

pub mod correlation;
pub mod database;
pub mod detection;
pub mod error;
pub mod evaluation;
pub mod geometry;
pub mod image;
pub mod multiview;
pub mod objectframe;
pub mod objectives;
pub mod pipeline;
pub mod refinement;
pub mod sampling;
pub mod selection;
pub mod synth;

pub use error::{Error, Result};
