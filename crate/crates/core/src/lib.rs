//! Numerical laboratory for Sobolev spaces on Riemannian manifolds: model
//! charts and convex bigraphs in hyperbolic space, concave spike profiles,
//! iterated-logarithm cut-off families, discrete covariant calculus on chart
//! meshes, and a harness that turns integral inequalities into measured ratios.

pub mod cutoff;
pub mod discrete;
pub mod error;
pub mod geometry;
pub mod lab;
pub mod report;
pub mod spike;
pub mod util;

pub use error::{LabError, Result};
