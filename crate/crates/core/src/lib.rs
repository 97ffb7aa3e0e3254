//! Material-aware neural signed distance fields.
//!
//! A dual-branch network maps a 3-D point to a signed distance and to
//! material-class logits. It is trained online from a stream of sparse,
//! noisy tactile contacts and scored against analytic ground-truth scenes.

pub mod encoding;
pub mod error;
pub mod eval;
pub mod field;
pub mod geom;
pub mod mapper;
pub mod material;
pub mod nn;
pub mod scene;
pub mod touchsim;

pub use error::{Error, Result};
