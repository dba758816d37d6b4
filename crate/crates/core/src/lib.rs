//! Band edges, curvature identities and two-scale envelope fields for
//! one-dimensional layered periodic electromagnetic media.

pub mod curvature;
pub mod envelope;
pub mod error;
pub mod field;
pub mod floquet;
pub mod grid;
pub mod lattice;
pub mod linalg;
pub mod medium;
pub mod spectral;
pub mod synth;

pub use error::{Error, Result};
