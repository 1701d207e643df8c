use serde::{Deserialize, Serialize};

use super::lambda::LambdaSpec;
use crate::error::{LabError, Result};
use crate::geometry::Warping;

/// Rotationally symmetric model `dr^2 + phi(r)^2 g_{S^{n-1}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelManifold {
    pub dim: usize,
    pub warping: Warping,
}

/// Result of checking `Ric >= -C lambda(r)^2` on a radial sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RicciHypothesis {
    /// `sup_r max(0, -Ric_min(r)) / lambda(r)^2` over the sample.
    pub constant: f64,
    /// The ratio does not grow over the last decade of the sample.
    pub holds: bool,
    pub r_max: f64,
}

impl ModelManifold {
    pub fn new(dim: usize, warping: Warping) -> Result<Self> {
        if dim < 2 {
            return Err(LabError::parameter("model manifolds need n >= 2"));
        }
        Ok(ModelManifold { dim, warping })
    }

    pub fn hyperbolic(dim: usize) -> Self {
        ModelManifold {
            dim,
            warping: Warping::Sinh,
        }
    }

    pub fn euclidean(dim: usize) -> Self {
        ModelManifold {
            dim,
            warping: Warping::Linear { c: 1.0 },
        }
    }

    /// `Ric(d_r, d_r) = -(n-1) phi''/phi`.
    pub fn ricci_radial_at(&self, r: f64) -> Result<f64> {
        let j = self.warping.log_jet(r)?;
        Ok(-((self.dim - 1) as f64) * j.ddphi_over_phi())
    }

    /// Ricci curvature on unit tangential vectors,
    /// `-phi''/phi + (n-2)(1 - phi'^2)/phi^2`.
    pub fn ricci_tangential_at(&self, r: f64) -> Result<f64> {
        let j = self.warping.log_jet(r)?;
        let k = j.kappa();
        // (1 - phi'^2)/phi^2 = exp(-2 ln phi) - kappa^2
        let tang = (-2.0 * j.l0).exp() - k * k;
        Ok(-j.ddphi_over_phi() + (self.dim as f64 - 2.0) * tang)
    }

    pub fn ricci_min_at(&self, r: f64) -> Result<f64> {
        Ok(self.ricci_radial_at(r)?.min(self.ricci_tangential_at(r)?))
    }

    /// `Delta r = (n-1) phi'/phi`.
    pub fn laplacian_of_distance(&self, r: f64) -> Result<f64> {
        Ok((self.dim - 1) as f64 * self.warping.log_jet(r)?.kappa())
    }

    /// Record the constant in `Ric >= -C lambda^2` on a geometric radial grid
    /// up to `r_max`, and whether the ratio is still growing at the end.
    pub fn ricci_hypothesis(&self, lambda: &LambdaSpec, r_max: f64) -> Result<RicciHypothesis> {
        let r_min: f64 = 1e-2;
        if !(r_max > 10.0 * r_min) {
            return Err(LabError::parameter("r_max too small for the hypothesis scan"));
        }
        let m = 4000;
        let ratio = |r: f64| -> Result<f64> {
            let l = lambda.eval(r);
            Ok((-self.ricci_min_at(r)?).max(0.0) / (l * l))
        };
        let mut sup: f64 = 0.0;
        let mut head: f64 = 0.0;
        let mut tail: f64 = 0.0;
        for i in 0..=m {
            let r = r_min * (r_max / r_min).powf(i as f64 / m as f64);
            let q = ratio(r)?;
            sup = sup.max(q);
            if r <= r_max / 10.0 {
                head = head.max(q);
            } else {
                tail = tail.max(q);
            }
        }
        Ok(RicciHypothesis {
            constant: sup,
            holds: sup.is_finite() && tail <= head * (1.0 + 1e-9),
            r_max,
        })
    }
}
