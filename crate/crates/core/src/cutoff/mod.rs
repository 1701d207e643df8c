//! Iterated-logarithm weight, rotationally symmetric models and the cut-off
//! family built from them.

pub mod family;
pub mod jet;
pub mod lambda;
pub mod model;

pub use family::{
    discrete_probe, eta, verify_cutoff, Cutoff, CutoffFamily, RadialCutoff, ETA_D1_MAX, ETA_D2_MAX,
};
pub use jet::Jet3;
pub use lambda::{iterated_exp, iterated_ln, LambdaSpec};
pub use model::{ModelManifold, RicciHypothesis};
