//! Graph hypersurfaces in an ambient model and their induced metrics.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{LabError, Result};
use crate::geometry::chart::MetricModel;
use crate::geometry::curvature::christoffel_from_jet;
use crate::geometry::models::{AmbientKind, AmbientModel};
use crate::spike::Profile;

/// The graph `x -> (x, side * F(x))` of a profile over a domain of R^n,
/// carrying the metric induced by an (n+1)-dimensional ambient model.
#[derive(Debug, Clone)]
pub struct GraphHypersurface {
    ambient: AmbientModel,
    profile: Arc<dyn Profile>,
    side: f64,
}

impl GraphHypersurface {
    pub fn new(ambient: AmbientKind, profile: Arc<dyn Profile>, side: i8) -> Result<Self> {
        if side != 1 && side != -1 {
            return Err(LabError::parameter(format!("side must be +1 or -1, got {side}")));
        }
        let n = profile.dim();
        Ok(GraphHypersurface {
            ambient: AmbientModel::new(ambient, n + 1),
            profile,
            side: side as f64,
        })
    }

    pub fn ambient(&self) -> AmbientModel {
        self.ambient
    }

    pub fn profile(&self) -> &Arc<dyn Profile> {
        &self.profile
    }

    pub fn side(&self) -> f64 {
        self.side
    }

    /// Ambient point `(x, side F(x))`.
    pub fn embed(&self, x: &[f64]) -> Result<Vec<f64>> {
        let z = self.profile.value(x)?;
        let mut y = x.to_vec();
        y.push(self.side * z);
        if !self.ambient.contains(&y) {
            return Err(LabError::domain(format!(
                "graph point {y:?} outside the ambient domain"
            )));
        }
        Ok(y)
    }

    /// Coordinate tangent vectors `e_i + side dF/dx_i e_{n+1}` as columns.
    fn tangents(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let n = x.len();
        let grad = self.profile.gradient(x)?;
        Ok(DMatrix::from_fn(n + 1, n, |a, i| {
            if a < n {
                if a == i {
                    1.0
                } else {
                    0.0
                }
            } else {
                self.side * grad[i]
            }
        }))
    }

    /// Second fundamental form with respect to the unit normal pointing
    /// away from the convex side (sign conventions drop out of the Gauss
    /// equation, which is quadratic in it).
    pub fn second_fundamental_form(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let n = x.len();
        let y = self.embed(x)?;
        let jet = self.ambient.jet(&y)?;
        let h = &jet.g;
        let gamma = christoffel_from_jet(&jet)?;
        let t = self.tangents(x)?;
        let hess = self.profile.hessian(x)?;
        let grad = self.profile.gradient(x)?;
        // The covector (-side dF, 1) annihilates every tangent vector.
        let mut c = DVector::zeros(n + 1);
        for i in 0..n {
            c[i] = -self.side * grad[i];
        }
        c[n] = 1.0;
        let hinv = h
            .clone()
            .try_inverse()
            .ok_or_else(|| LabError::numerical("singular ambient metric", f64::INFINITY))?;
        let nu = &hinv * &c;
        let len = (nu.dot(&(h * &nu))).sqrt();
        let nu = nu / len;
        let m = n + 1;
        let hnu = h * &nu;
        let mut ii = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let mut v = 0.0;
                // d_i X_j = side F_ij e_{n+1}
                v += hnu[n] * self.side * hess[(i, j)];
                for k in 0..m {
                    let mut gk = 0.0;
                    for a in 0..m {
                        for b in 0..m {
                            gk += gamma[(k * m + a) * m + b] * t[(a, i)] * t[(b, j)];
                        }
                    }
                    v += hnu[k] * gk;
                }
                ii[(i, j)] = v;
                ii[(j, i)] = v;
            }
        }
        Ok(ii)
    }
}

impl MetricModel for GraphHypersurface {
    fn dim(&self) -> usize {
        self.profile.dim()
    }

    fn metric(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let y = self.embed(x)?;
        let h = self.ambient.metric(&y)?;
        let t = self.tangents(x)?;
        Ok(t.transpose() * h * t)
    }

    fn gauss_sectional(&self, x: &[f64], u: &[f64], v: &[f64]) -> Option<Result<f64>> {
        Some((|| {
            let g = self.metric(x)?;
            let ii = self.second_fundamental_form(x)?;
            let u = DVector::from_column_slice(u);
            let v = DVector::from_column_slice(v);
            let q = |a: &DMatrix<f64>, p: &DVector<f64>, r: &DVector<f64>| p.dot(&(a * r));
            let area = q(&g, &u, &u) * q(&g, &v, &v) - q(&g, &u, &v).powi(2);
            if area <= 0.0 {
                return Err(LabError::parameter("degenerate plane"));
            }
            let num = q(&ii, &u, &u) * q(&ii, &v, &v) - q(&ii, &u, &v).powi(2);
            Ok(self.ambient.curvature() + num / area)
        })())
    }
}

/// Induced metric of a graph hypersurface at a base point.
pub fn induced_metric(surface: &GraphHypersurface, x: &[f64]) -> Result<DMatrix<f64>> {
    surface.metric(x)
}

/// A two-dimensional model re-expressed in polar coordinates `(rho, alpha)`.
#[derive(Debug, Clone)]
pub struct PolarPullback {
    inner: Arc<dyn MetricModel>,
}

impl PolarPullback {
    pub fn new(inner: Arc<dyn MetricModel>) -> Result<Self> {
        if inner.dim() != 2 {
            return Err(LabError::parameter("polar pullback needs a 2-dimensional model"));
        }
        Ok(PolarPullback { inner })
    }

    pub fn inner(&self) -> &Arc<dyn MetricModel> {
        &self.inner
    }

    pub fn to_cartesian(p: &[f64]) -> [f64; 2] {
        [p[0] * p[1].cos(), p[0] * p[1].sin()]
    }
}

impl MetricModel for PolarPullback {
    fn dim(&self) -> usize {
        2
    }

    fn metric(&self, p: &[f64]) -> Result<DMatrix<f64>> {
        let (rho, al) = (p[0], p[1]);
        if rho <= 0.0 {
            return Err(LabError::domain("polar chart needs rho > 0"));
        }
        let x = Self::to_cartesian(p);
        let g = self.inner.metric(&x)?;
        let j = DMatrix::from_row_slice(2, 2, &[al.cos(), -rho * al.sin(), al.sin(), rho * al.cos()]);
        Ok(j.transpose() * g * j)
    }

    fn distance_from_origin(&self, p: &[f64]) -> Option<f64> {
        self.inner.distance_from_origin(&Self::to_cartesian(p))
    }
}
