//! Coordinate charts carrying a Riemannian metric.

use std::fmt::Debug;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::geometry::hypersurface::{GraphHypersurface, PolarPullback};
use crate::geometry::models::{
    AmbientKind, ConeSurface, Conformal, ConformalKind, Euclidean, KleinBall, PoincareHalfSpace,
    Warped, Warping,
};
use crate::spike::ProfileSpec;

/// Metric coefficients and their first and second coordinate partials at a
/// point. `dg[k]` is the matrix of partials along axis k; `ddg[k * n + l]`
/// holds the mixed second partials along axes k and l.
#[derive(Debug, Clone)]
pub struct MetricJet {
    pub g: DMatrix<f64>,
    pub dg: Vec<DMatrix<f64>>,
    pub ddg: Vec<DMatrix<f64>>,
}

impl MetricJet {
    pub fn dim(&self) -> usize {
        self.g.nrows()
    }
}

/// A metric expressed in coordinates on (a subset of) R^n.
pub trait MetricModel: Send + Sync + Debug {
    fn dim(&self) -> usize;

    /// Metric coefficients at `x`. Fails outside the model's natural domain.
    fn metric(&self, x: &[f64]) -> Result<DMatrix<f64>>;

    /// Closed-form jet when the model provides one.
    fn closed_form_jet(&self, _x: &[f64]) -> Option<Result<MetricJet>> {
        None
    }

    /// Riemannian distance to the chart origin, for rotationally symmetric models.
    fn distance_from_origin(&self, _x: &[f64]) -> Option<f64> {
        None
    }

    /// Sectional curvature of the plane spanned by `u`, `v` computed through
    /// the Gauss equation, when the model is an embedded hypersurface.
    fn gauss_sectional(&self, _x: &[f64], _u: &[f64], _v: &[f64]) -> Option<Result<f64>> {
        None
    }
}

/// Coordinate domain of a chart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Domain {
    /// Axis-aligned box `lo <= x <= hi`.
    Box { lo: Vec<f64>, hi: Vec<f64> },
    /// Euclidean annulus `r_in <= |x - center| <= r_out`.
    Annulus {
        center: Vec<f64>,
        r_in: f64,
        r_out: f64,
    },
    /// No restriction beyond the model's own domain.
    Whole,
}

impl Domain {
    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Domain::Box { lo, hi } => x
                .iter()
                .zip(lo.iter().zip(hi))
                .all(|(v, (l, h))| *v >= *l - 1e-12 && *v <= *h + 1e-12),
            Domain::Annulus {
                center,
                r_in,
                r_out,
            } => {
                let r = crate::util::dist(x, center);
                r >= *r_in - 1e-12 && r <= *r_out + 1e-12
            }
            Domain::Whole => true,
        }
    }

    pub fn diameter(&self) -> Option<f64> {
        match self {
            Domain::Box { lo, hi } => Some(crate::util::dist(lo, hi)),
            Domain::Annulus { r_out, .. } => Some(2.0 * r_out),
            Domain::Whole => None,
        }
    }
}

/// An excluded coordinate ball (puncture, spike apex, cone vertex).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exclusion {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl Exclusion {
    pub fn contains(&self, x: &[f64]) -> bool {
        crate::util::dist(x, &self.center) < self.radius
    }
}

/// Serializable description of the metric model of a chart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    Euclidean {
        dim: usize,
    },
    KleinBall {
        dim: usize,
    },
    PoincareHalfspace {
        dim: usize,
    },
    PoincareBall {
        dim: usize,
    },
    SphereStereographic {
        dim: usize,
    },
    /// Two-dimensional warped product `dr^2 + (phi(r)/phi(r0))^2 dpsi^2`;
    /// with `r0` absent the angular factor is `phi(r)^2`.
    Warped {
        warping: Warping,
        #[serde(default)]
        r0: Option<f64>,
    },
    /// Graph of a profile over R^n inside an ambient model.
    Graph {
        ambient: AmbientKind,
        profile: ProfileSpec,
        #[serde(default = "default_side")]
        side: i8,
        /// Base coordinates are polar `(rho, alpha)` instead of Cartesian.
        #[serde(default)]
        polar: bool,
    },
    /// One nappe of the double cone K in the Klein model, in coordinates
    /// `(t, theta)` with height `z = 1 - exp(-t)`.
    ConeK,
}

fn default_side() -> i8 {
    1
}

/// Serializable chart description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartSpec {
    pub model: ModelSpec,
    pub domain: Domain,
    #[serde(default)]
    pub exclusions: Vec<Exclusion>,
    /// Finite-difference step for charts without closed-form derivatives.
    #[serde(default)]
    pub fd_step: Option<f64>,
}

/// A coordinate chart: a metric model restricted to a domain with punctures.
#[derive(Debug, Clone)]
pub struct MetricChart {
    spec: ChartSpec,
    model: Arc<dyn MetricModel>,
    fd_step: f64,
}

impl MetricChart {
    pub fn from_spec(spec: ChartSpec) -> Result<Self> {
        let model: Arc<dyn MetricModel> = match &spec.model {
            ModelSpec::Euclidean { dim } => Arc::new(Euclidean::new(*dim)),
            ModelSpec::KleinBall { dim } => Arc::new(KleinBall::new(*dim)),
            ModelSpec::PoincareHalfspace { dim } => Arc::new(PoincareHalfSpace::new(*dim)),
            ModelSpec::PoincareBall { dim } => {
                Arc::new(Conformal::new(ConformalKind::PoincareBall, *dim))
            }
            ModelSpec::SphereStereographic { dim } => {
                Arc::new(Conformal::new(ConformalKind::SphereStereographic, *dim))
            }
            ModelSpec::Warped { warping, r0 } => Arc::new(Warped::new(warping.clone(), *r0)),
            ModelSpec::Graph {
                ambient,
                profile,
                side,
                polar,
            } => {
                let prof = profile.build()?;
                let graph = GraphHypersurface::new(*ambient, prof, *side)?;
                if *polar {
                    Arc::new(PolarPullback::new(Arc::new(graph))?)
                } else {
                    Arc::new(graph)
                }
            }
            ModelSpec::ConeK => Arc::new(ConeSurface),
        };
        Self::with_model(spec, model)
    }

    /// Build a chart around an already-constructed model. The spec's model
    /// field is kept for serialization.
    pub fn with_model(spec: ChartSpec, model: Arc<dyn MetricModel>) -> Result<Self> {
        let fd_step = match spec.fd_step {
            Some(h) if h > 0.0 => h,
            Some(h) => return Err(LabError::parameter(format!("fd_step {h} must be > 0"))),
            None => spec.domain.diameter().unwrap_or(1.0) * 1e-4,
        };
        Ok(MetricChart {
            spec,
            model,
            fd_step,
        })
    }

    pub fn euclidean_box(lo: Vec<f64>, hi: Vec<f64>) -> Self {
        let dim = lo.len();
        Self::from_spec(ChartSpec {
            model: ModelSpec::Euclidean { dim },
            domain: Domain::Box { lo, hi },
            exclusions: vec![],
            fd_step: None,
        })
        .expect("euclidean chart")
    }

    pub fn spec(&self) -> &ChartSpec {
        &self.spec
    }

    pub fn model(&self) -> &Arc<dyn MetricModel> {
        &self.model
    }

    pub fn dim(&self) -> usize {
        self.model.dim()
    }

    pub fn fd_step(&self) -> f64 {
        self.fd_step
    }

    pub fn domain(&self) -> &Domain {
        &self.spec.domain
    }

    pub fn exclusions(&self) -> &[Exclusion] {
        &self.spec.exclusions
    }

    /// True if `x` lies in the domain and outside every exclusion ball.
    pub fn admits(&self, x: &[f64]) -> bool {
        self.spec.domain.contains(x) && !self.spec.exclusions.iter().any(|e| e.contains(x))
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(LabError::parameter(format!(
                "point has {} coordinates, chart has dimension {}",
                x.len(),
                self.dim()
            )));
        }
        if !self.spec.domain.contains(x) {
            return Err(LabError::domain(format!("{x:?} outside chart domain")));
        }
        if let Some(e) = self.spec.exclusions.iter().find(|e| e.contains(x)) {
            return Err(LabError::domain(format!(
                "{x:?} inside exclusion ball at {:?} (radius {})",
                e.center, e.radius
            )));
        }
        Ok(())
    }

    pub fn metric_at(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        self.check_point(x)?;
        self.model.metric(x)
    }

    /// Metric with first and second partials: closed form when available,
    /// centered differences with the chart's recorded step otherwise.
    pub fn jet_at(&self, x: &[f64]) -> Result<MetricJet> {
        self.check_point(x)?;
        if let Some(jet) = self.model.closed_form_jet(x) {
            return jet;
        }
        richardson_jet(self.model.as_ref(), x, self.fd_step)
    }

    /// First partials of the metric (closed-form or finite-difference).
    pub fn metric_grad_at(&self, x: &[f64]) -> Result<Vec<DMatrix<f64>>> {
        Ok(self.jet_at(x)?.dg)
    }

    pub fn distance_from_origin(&self, x: &[f64]) -> Option<f64> {
        self.model.distance_from_origin(x)
    }

    pub fn has_closed_form_jet(&self, x: &[f64]) -> bool {
        self.model.closed_form_jet(x).is_some()
    }
}

/// One Richardson step on `finite_difference_jet` with steps h and h/2,
/// raising the order of both partials from 2 to 4.
pub fn richardson_jet(model: &dyn MetricModel, x: &[f64], h: f64) -> Result<MetricJet> {
    let coarse = finite_difference_jet(model, x, h)?;
    let fine = finite_difference_jet(model, x, 0.5 * h)?;
    let mix = |f: &DMatrix<f64>, c: &DMatrix<f64>| (f * 4.0 - c) / 3.0;
    Ok(MetricJet {
        dg: fine.dg.iter().zip(&coarse.dg).map(|(f, c)| mix(f, c)).collect(),
        ddg: fine.ddg.iter().zip(&coarse.ddg).map(|(f, c)| mix(f, c)).collect(),
        g: fine.g,
    })
}

/// Centered-difference jet with step `h`: first partials are O(h^2), second
/// partials use the standard 3-point and 4-point mixed stencils.
pub fn finite_difference_jet(model: &dyn MetricModel, x: &[f64], h: f64) -> Result<MetricJet> {
    let n = model.dim();
    let g = model.metric(x)?;
    let shifted = |offsets: &[(usize, f64)]| -> Result<DMatrix<f64>> {
        let mut y = x.to_vec();
        for &(k, s) in offsets {
            y[k] += s;
        }
        model.metric(&y)
    };
    let mut plus = Vec::with_capacity(n);
    let mut minus = Vec::with_capacity(n);
    for k in 0..n {
        plus.push(shifted(&[(k, h)])?);
        minus.push(shifted(&[(k, -h)])?);
    }
    let dg: Vec<DMatrix<f64>> = (0..n)
        .map(|k| (&plus[k] - &minus[k]) / (2.0 * h))
        .collect();
    let mut ddg = vec![DMatrix::zeros(n, n); n * n];
    for k in 0..n {
        ddg[k * n + k] = (&plus[k] - &g * 2.0 + &minus[k]) / (h * h);
        for l in (k + 1)..n {
            let pp = shifted(&[(k, h), (l, h)])?;
            let pm = shifted(&[(k, h), (l, -h)])?;
            let mp = shifted(&[(k, -h), (l, h)])?;
            let mm = shifted(&[(k, -h), (l, -h)])?;
            let mixed = (pp - pm - mp + mm) / (4.0 * h * h);
            ddg[k * n + l] = mixed.clone();
            ddg[l * n + k] = mixed;
        }
    }
    Ok(MetricJet { g, dg, ddg })
}
