//! Concave profiles over the punctured disk D and the spike construction.

mod bilipschitz;
mod bump;
mod certify;
mod export;
mod profile;

use std::fmt::Debug;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::Result;

pub use bilipschitz::{bilipschitz_estimate, BiLipschitzBounds, BiLipschitzOptions};
pub use bump::{bump_radial, spike_bump, BumpJet, SpikeBump, EXTENSION_KNOT};
pub use certify::{certify_concavity, certify_profile, ConcavityCertificate};
pub use export::{bigraph_obj, check_obj, height_field_csv, ObjStats};
pub use profile::{
    base_profile, halton, AddSpikeLog, AffineProfile, AmplitudeSchedule, Annulus, BaseProfile,
    SpikeOptions, SpikeProfile, DISK_RADIUS,
};

/// A height function over a domain of R^n with first and second derivatives.
pub trait Profile: Send + Sync + Debug {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> Result<f64>;
    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>>;
    fn hessian(&self, x: &[f64]) -> Result<DMatrix<f64>>;
}

/// Serializable profile description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ProfileSpec {
    Base { dim: usize },
    Affine { slope: Vec<f64>, offset: f64 },
    Spiked(SpikeProfile),
}

impl ProfileSpec {
    pub fn build(&self) -> Result<Arc<dyn Profile>> {
        Ok(match self {
            ProfileSpec::Base { dim } => Arc::new(BaseProfile::new(*dim)),
            ProfileSpec::Affine { slope, offset } => {
                Arc::new(AffineProfile::new(slope.clone(), *offset))
            }
            ProfileSpec::Spiked(p) => {
                p.validate()?;
                Arc::new(p.clone())
            }
        })
    }
}

/// Hessian of a radial function `x -> F(|x - c|)` given `F'' ` and `F'/r`.
pub(crate) fn radial_hessian(u: &[f64], r: f64, d2: f64, d1_over_r: f64) -> DMatrix<f64> {
    let n = u.len();
    DMatrix::from_fn(n, n, |i, j| {
        let (ui, uj) = if r > 0.0 { (u[i] / r, u[j] / r) } else { (0.0, 0.0) };
        let id = if i == j { 1.0 } else { 0.0 };
        d2 * ui * uj + d1_over_r * (id - ui * uj)
    })
}

/// Largest eigenvalue of a symmetric matrix.
pub(crate) fn max_eigenvalue(h: &DMatrix<f64>) -> f64 {
    match h.nrows() {
        1 => h[(0, 0)],
        2 => {
            let (a, b, d) = (h[(0, 0)], h[(0, 1)], h[(1, 1)]);
            let m = 0.5 * (a + d);
            let r = (0.25 * (a - d) * (a - d) + b * b).sqrt();
            m + r
        }
        _ => h.clone().symmetric_eigenvalues().max(),
    }
}
