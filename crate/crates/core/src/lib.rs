//! Two-stream facial expression recognition: a temporal appearance network
//! over short stacks of face frames, a temporal geometry network over
//! normalized landmark trajectories, and weighted late fusion of their scores.

pub mod appearance;
mod binio;
pub mod cache;
pub mod config;
pub mod crossval;
pub mod error;
pub mod eval;
pub mod fsutil;
pub mod geometry;
pub mod introspect;
pub mod netspec;
pub mod nn;
pub mod pgm;
pub mod report;
pub mod subject;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::{Real, Tensor};
