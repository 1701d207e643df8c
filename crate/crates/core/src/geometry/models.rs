//! Concrete metric models: flat space, hyperbolic models, round sphere,
//! two-dimensional warped products and the cone surface K.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::geometry::chart::{MetricJet, MetricModel};

/// Ambient space hosting a graph hypersurface.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AmbientKind {
    Euclidean,
    KleinBall,
    PoincareHalfspace,
}

/// An ambient model of the given kind and dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AmbientModel {
    pub kind: AmbientKind,
    pub dim: usize,
}

impl AmbientModel {
    pub fn new(kind: AmbientKind, dim: usize) -> Self {
        AmbientModel { kind, dim }
    }

    /// Sectional curvature of the (constant curvature) ambient space.
    pub fn curvature(&self) -> f64 {
        match self.kind {
            AmbientKind::Euclidean => 0.0,
            AmbientKind::KleinBall | AmbientKind::PoincareHalfspace => -1.0,
        }
    }

    pub fn contains(&self, y: &[f64]) -> bool {
        match self.kind {
            AmbientKind::Euclidean => true,
            AmbientKind::KleinBall => y.iter().map(|v| v * v).sum::<f64>() < 1.0,
            AmbientKind::PoincareHalfspace => y.last().is_some_and(|z| *z > 0.0),
        }
    }

    pub fn model(&self) -> Box<dyn MetricModel> {
        match self.kind {
            AmbientKind::Euclidean => Box::new(Euclidean::new(self.dim)),
            AmbientKind::KleinBall => Box::new(KleinBall::new(self.dim)),
            AmbientKind::PoincareHalfspace => Box::new(PoincareHalfSpace::new(self.dim)),
        }
    }

    pub fn jet(&self, y: &[f64]) -> Result<MetricJet> {
        match self.kind {
            AmbientKind::Euclidean => Ok(flat_jet(self.dim)),
            AmbientKind::KleinBall => klein_jet(y),
            AmbientKind::PoincareHalfspace => halfspace_jet(y),
        }
    }

    pub fn metric(&self, y: &[f64]) -> Result<DMatrix<f64>> {
        match self.kind {
            AmbientKind::Euclidean => Ok(DMatrix::identity(self.dim, self.dim)),
            AmbientKind::KleinBall => klein_metric(y),
            AmbientKind::PoincareHalfspace => halfspace_metric(y),
        }
    }
}

fn flat_jet(n: usize) -> MetricJet {
    MetricJet {
        g: DMatrix::identity(n, n),
        dg: vec![DMatrix::zeros(n, n); n],
        ddg: vec![DMatrix::zeros(n, n); n * n],
    }
}

#[derive(Debug, Clone)]
pub struct Euclidean {
    dim: usize,
}

impl Euclidean {
    pub fn new(dim: usize) -> Self {
        Euclidean { dim }
    }
}

impl MetricModel for Euclidean {
    fn dim(&self) -> usize {
        self.dim
    }

    fn metric(&self, _x: &[f64]) -> Result<DMatrix<f64>> {
        Ok(DMatrix::identity(self.dim, self.dim))
    }

    fn closed_form_jet(&self, _x: &[f64]) -> Option<Result<MetricJet>> {
        Some(Ok(flat_jet(self.dim)))
    }

    fn distance_from_origin(&self, x: &[f64]) -> Option<f64> {
        Some(crate::util::norm(x))
    }
}

/// The Beltrami-Klein metric `|dy|^2/(1-|y|^2) + (y.dy)^2/(1-|y|^2)^2` on the
/// open unit ball.
pub fn klein_metric(y: &[f64]) -> Result<DMatrix<f64>> {
    let n = y.len();
    let s: f64 = y.iter().map(|v| v * v).sum();
    if s >= 1.0 {
        return Err(LabError::domain(format!(
            "Klein metric needs |y| < 1, got |y| = {}",
            s.sqrt()
        )));
    }
    let a = 1.0 / (1.0 - s);
    Ok(DMatrix::from_fn(n, n, |i, j| {
        let d = if i == j { a } else { 0.0 };
        d + y[i] * y[j] * a * a
    }))
}

fn klein_jet(y: &[f64]) -> Result<MetricJet> {
    let g = klein_metric(y)?;
    let n = y.len();
    let s: f64 = y.iter().map(|v| v * v).sum();
    let a = 1.0 / (1.0 - s);
    let (a2, a3, a4) = (a * a, a * a * a, a * a * a * a);
    let dl = |i: usize, j: usize| if i == j { 1.0 } else { 0.0 };
    let mut dg = Vec::with_capacity(n);
    for k in 0..n {
        dg.push(DMatrix::from_fn(n, n, |i, j| {
            2.0 * dl(i, j) * y[k] * a2
                + (dl(i, k) * y[j] + y[i] * dl(j, k)) * a2
                + 4.0 * y[i] * y[j] * y[k] * a3
        }));
    }
    let mut ddg = Vec::with_capacity(n * n);
    for k in 0..n {
        for l in 0..n {
            ddg.push(DMatrix::from_fn(n, n, |i, j| {
                dl(i, j) * (2.0 * dl(k, l) * a2 + 8.0 * y[k] * y[l] * a3)
                    + (dl(i, k) * dl(j, l) + dl(i, l) * dl(j, k)) * a2
                    + 4.0 * (dl(i, k) * y[j] + y[i] * dl(j, k)) * y[l] * a3
                    + 4.0 * (dl(i, l) * y[j] * y[k] + y[i] * dl(j, l) * y[k] + y[i] * y[j] * dl(k, l))
                        * a3
                    + 24.0 * y[i] * y[j] * y[k] * y[l] * a4
            }));
        }
    }
    Ok(MetricJet { g, dg, ddg })
}

#[derive(Debug, Clone)]
pub struct KleinBall {
    dim: usize,
}

impl KleinBall {
    pub fn new(dim: usize) -> Self {
        KleinBall { dim }
    }
}

impl MetricModel for KleinBall {
    fn dim(&self) -> usize {
        self.dim
    }

    fn metric(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        klein_metric(x)
    }

    fn closed_form_jet(&self, x: &[f64]) -> Option<Result<MetricJet>> {
        Some(klein_jet(x))
    }

    fn distance_from_origin(&self, x: &[f64]) -> Option<f64> {
        let r = crate::util::norm(x);
        (r < 1.0).then(|| r.atanh())
    }
}

fn halfspace_metric(y: &[f64]) -> Result<DMatrix<f64>> {
    let n = y.len();
    let z = y[n - 1];
    if z <= 0.0 {
        return Err(LabError::domain(format!("half-space metric needs z > 0, got {z}")));
    }
    Ok(DMatrix::identity(n, n) / (z * z))
}

fn halfspace_jet(y: &[f64]) -> Result<MetricJet> {
    let g = halfspace_metric(y)?;
    let n = y.len();
    let z = y[n - 1];
    let mut dg = vec![DMatrix::zeros(n, n); n];
    dg[n - 1] = DMatrix::identity(n, n) * (-2.0 / (z * z * z));
    let mut ddg = vec![DMatrix::zeros(n, n); n * n];
    ddg[(n - 1) * n + n - 1] = DMatrix::identity(n, n) * (6.0 / z.powi(4));
    Ok(MetricJet { g, dg, ddg })
}

/// Upper half-space `|dy|^2 / z^2`, z the last coordinate.
#[derive(Debug, Clone)]
pub struct PoincareHalfSpace {
    dim: usize,
}

impl PoincareHalfSpace {
    pub fn new(dim: usize) -> Self {
        PoincareHalfSpace { dim }
    }
}

impl MetricModel for PoincareHalfSpace {
    fn dim(&self) -> usize {
        self.dim
    }

    fn metric(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        halfspace_metric(x)
    }

    fn closed_form_jet(&self, x: &[f64]) -> Option<Result<MetricJet>> {
        Some(halfspace_jet(x))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConformalKind {
    /// `4|dx|^2 / (1 - |x|^2)^2`
    PoincareBall,
    /// `4|dx|^2 / (1 + |x|^2)^2`, the unit sphere minus a point.
    SphereStereographic,
}

/// Conformally flat metric `exp(2 psi) |dx|^2`.
#[derive(Debug, Clone)]
pub struct Conformal {
    kind: ConformalKind,
    dim: usize,
}

impl Conformal {
    pub fn new(kind: ConformalKind, dim: usize) -> Self {
        Conformal { kind, dim }
    }

    // psi, its gradient and Hessian.
    fn psi(&self, x: &[f64]) -> Result<(f64, Vec<f64>, DMatrix<f64>)> {
        let n = x.len();
        let s: f64 = x.iter().map(|v| v * v).sum();
        let sign = match self.kind {
            ConformalKind::PoincareBall => {
                if s >= 1.0 {
                    return Err(LabError::domain("Poincare ball needs |x| < 1"));
                }
                -1.0
            }
            ConformalKind::SphereStereographic => 1.0,
        };
        // psi = ln 2 - ln(1 + sign s)
        let q = 1.0 + sign * s;
        let psi = std::f64::consts::LN_2 - q.ln();
        let grad: Vec<f64> = x.iter().map(|v| -2.0 * sign * v / q).collect();
        let hess = DMatrix::from_fn(n, n, |i, j| {
            let d = if i == j { -2.0 * sign / q } else { 0.0 };
            d + 4.0 * x[i] * x[j] / (q * q)
        });
        Ok((psi, grad, hess))
    }
}

impl MetricModel for Conformal {
    fn dim(&self) -> usize {
        self.dim
    }

    fn metric(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let (psi, _, _) = self.psi(x)?;
        Ok(DMatrix::identity(self.dim, self.dim) * (2.0 * psi).exp())
    }

    fn closed_form_jet(&self, x: &[f64]) -> Option<Result<MetricJet>> {
        Some(self.psi(x).map(|(psi, grad, hess)| {
            let n = self.dim;
            let e = (2.0 * psi).exp();
            let id = DMatrix::<f64>::identity(n, n);
            let dg = (0..n).map(|k| &id * (2.0 * grad[k] * e)).collect();
            let mut ddg = Vec::with_capacity(n * n);
            for k in 0..n {
                for l in 0..n {
                    ddg.push(&id * ((2.0 * hess[(k, l)] + 4.0 * grad[k] * grad[l]) * e));
                }
            }
            MetricJet {
                g: id * e,
                dg,
                ddg,
            }
        }))
    }

    fn distance_from_origin(&self, x: &[f64]) -> Option<f64> {
        let r = crate::util::norm(x);
        match self.kind {
            ConformalKind::PoincareBall => (r < 1.0).then(|| 2.0 * r.atanh()),
            ConformalKind::SphereStereographic => Some(2.0 * r.atan()),
        }
    }
}

/// Warping function of a rotationally symmetric model `dr^2 + phi(r)^2 g_S`.
/// All quantities are exposed through `ln phi` and the ratios `phi^(k)/phi`
/// so that large radii never overflow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Warping {
    /// `phi = c r`: flat space for c = 1, a cone otherwise.
    Linear { c: f64 },
    /// Hyperbolic space of curvature -1.
    Sinh,
    /// Round sphere; defined for r in (0, pi).
    Sin,
    /// `phi = r exp(r^a)`.
    SuperExponential { a: f64 },
}

/// Logarithmic derivatives of a warping: `l = ln phi` and `l', l'', l'''`.
#[derive(Debug, Clone, Copy)]
pub struct LogJet {
    pub l0: f64,
    pub l1: f64,
    pub l2: f64,
    pub l3: f64,
}

impl LogJet {
    /// `phi'/phi`
    pub fn kappa(&self) -> f64 {
        self.l1
    }

    /// `phi''/phi`
    pub fn ddphi_over_phi(&self) -> f64 {
        self.l2 + self.l1 * self.l1
    }

    /// `phi'''/phi`
    pub fn dddphi_over_phi(&self) -> f64 {
        self.l3 + 3.0 * self.l1 * self.l2 + self.l1.powi(3)
    }
}

impl Warping {
    pub fn log_jet(&self, r: f64) -> Result<LogJet> {
        if r <= 0.0 {
            return Err(LabError::domain(format!("warping evaluated at r = {r} <= 0")));
        }
        Ok(match self {
            Warping::Linear { c } => LogJet {
                l0: c.ln() + r.ln(),
                l1: 1.0 / r,
                l2: -1.0 / (r * r),
                l3: 2.0 / (r * r * r),
            },
            Warping::Sinh => {
                // ln sinh r = r - ln 2 + ln(1 - e^{-2r})
                let l0 = r - std::f64::consts::LN_2 + (-(-2.0 * r).exp()).ln_1p();
                let coth = 1.0 / r.tanh();
                let csch2 = coth * coth - 1.0;
                LogJet {
                    l0,
                    l1: coth,
                    l2: -csch2,
                    l3: 2.0 * coth * csch2,
                }
            }
            Warping::Sin => {
                if r >= std::f64::consts::PI {
                    return Err(LabError::domain(format!("sin warping needs r < pi, got {r}")));
                }
                let cot = 1.0 / r.tan();
                let csc2 = 1.0 + cot * cot;
                LogJet {
                    l0: r.sin().ln(),
                    l1: cot,
                    l2: -csc2,
                    l3: 2.0 * cot * csc2,
                }
            }
            Warping::SuperExponential { a } => {
                let a = *a;
                LogJet {
                    l0: r.ln() + r.powf(a),
                    l1: 1.0 / r + a * r.powf(a - 1.0),
                    l2: -1.0 / (r * r) + a * (a - 1.0) * r.powf(a - 2.0),
                    l3: 2.0 / (r * r * r) + a * (a - 1.0) * (a - 2.0) * r.powf(a - 3.0),
                }
            }
        })
    }

    /// `phi(r)`; overflows to infinity for huge radii, use `log_jet` there.
    pub fn phi(&self, r: f64) -> Result<f64> {
        if r == 0.0 {
            return Ok(0.0);
        }
        Ok(self.log_jet(r)?.l0.exp())
    }

    /// Curvature of the plane containing the radial direction, `-phi''/phi`.
    pub fn radial_curvature(&self, r: f64) -> Result<f64> {
        Ok(-self.log_jet(r)?.ddphi_over_phi())
    }
}

/// Two-dimensional warped chart `dr^2 + w(r)^2 dpsi^2` with `w = phi(r)/phi(r0)`,
/// or `w = phi(r)` when no reference radius is given.
#[derive(Debug, Clone)]
pub struct Warped {
    warping: Warping,
    r0: Option<f64>,
    l_ref: f64,
}

impl Warped {
    pub fn new(warping: Warping, r0: Option<f64>) -> Self {
        let l_ref = match r0 {
            Some(r) => warping.log_jet(r).map(|j| j.l0).unwrap_or(0.0),
            None => 0.0,
        };
        Warped { warping, r0, l_ref }
    }

    pub fn warping(&self) -> &Warping {
        &self.warping
    }

    pub fn reference_radius(&self) -> Option<f64> {
        self.r0
    }
}

impl MetricModel for Warped {
    fn dim(&self) -> usize {
        2
    }

    fn metric(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let j = self.warping.log_jet(x[0])?;
        let w2 = (2.0 * (j.l0 - self.l_ref)).exp();
        Ok(DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, w2]))
    }

    fn closed_form_jet(&self, x: &[f64]) -> Option<Result<MetricJet>> {
        Some(self.warping.log_jet(x[0]).map(|j| {
            let w2 = (2.0 * (j.l0 - self.l_ref)).exp();
            let g = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, w2]);
            let d = |v: f64| DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, v]);
            let z = DMatrix::zeros(2, 2);
            MetricJet {
                g,
                dg: vec![d(2.0 * j.l1 * w2), z.clone()],
                ddg: vec![
                    d((2.0 * j.l2 + 4.0 * j.l1 * j.l1) * w2),
                    z.clone(),
                    z.clone(),
                    z,
                ],
            }
        }))
    }

    fn distance_from_origin(&self, x: &[f64]) -> Option<f64> {
        Some(x[0])
    }
}

/// One nappe of the double cone K: the set `z = 1 - sqrt(3)|x|` inside the
/// Klein model of H^3, parametrized by `(t, theta)` with `z = 1 - exp(-t)`.
/// The metric is written in closed form so that it stays accurate as the
/// nappe approaches the ideal apex.
#[derive(Debug, Clone, Copy)]
pub struct ConeSurface;

impl ConeSurface {
    /// Components `(g_tt, g_thetatheta)` at height parameter t.
    pub fn components(t: f64) -> Result<(f64, f64)> {
        if t < 0.0 {
            return Err(LabError::domain(format!("cone chart needs t >= 0, got {t}")));
        }
        let w = (-t).exp();
        let d = 2.0 * w - 4.0 * w * w / 3.0;
        let b = 1.0 - 4.0 * w / 3.0;
        let gtt = (4.0 * w * w / 3.0) / d + w * w * b * b / (d * d);
        let gthth = (w * w / 3.0) / d;
        Ok((gtt, gthth))
    }
}

impl MetricModel for ConeSurface {
    fn dim(&self) -> usize {
        2
    }

    fn metric(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let (a, b) = Self::components(x[0])?;
        Ok(DMatrix::from_row_slice(2, 2, &[a, 0.0, 0.0, b]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::chart::finite_difference_jet;

    fn max_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
        (a - b).abs().max()
    }

    #[test]
    fn klein_at_origin_is_identity() {
        let g = klein_metric(&[0.0, 0.0, 0.0]).unwrap();
        assert!(max_diff(&g, &DMatrix::identity(3, 3)) < 1e-15);
    }

    #[test]
    fn klein_radial_coefficient() {
        let r: f64 = 0.6;
        let g = klein_metric(&[r, 0.0]).unwrap();
        assert!((g[(0, 0)] - 1.0 / (1.0 - r * r).powi(2)).abs() < 1e-12);
        assert!((g[(1, 1)] - 1.0 / (1.0 - r * r)).abs() < 1e-12);
    }

    #[test]
    fn klein_rejects_boundary() {
        assert!(matches!(klein_metric(&[0.6, 0.8]), Err(LabError::Domain(_))));
    }

    #[test]
    fn closed_form_jets_match_differences() {
        let models: Vec<(Box<dyn MetricModel>, Vec<f64>)> = vec![
            (Box::new(KleinBall::new(3)), vec![0.2, -0.3, 0.4]),
            (Box::new(PoincareHalfSpace::new(2)), vec![0.3, 0.7]),
            (
                Box::new(Conformal::new(ConformalKind::SphereStereographic, 2)),
                vec![0.4, -0.2],
            ),
            (
                Box::new(Conformal::new(ConformalKind::PoincareBall, 2)),
                vec![0.1, 0.5],
            ),
            (Box::new(Warped::new(Warping::Sinh, Some(2.0))), vec![2.3, 0.1]),
            (
                Box::new(Warped::new(Warping::SuperExponential { a: 1.5 }, None)),
                vec![0.8, 0.0],
            ),
        ];
        for (m, x) in models {
            let exact = m.closed_form_jet(&x).unwrap().unwrap();
            let fd = finite_difference_jet(m.as_ref(), &x, 1e-4).unwrap();
            for k in 0..exact.dg.len() {
                let scale = 1.0 + exact.dg[k].amax();
                assert!(max_diff(&exact.dg[k], &fd.dg[k]) < 1e-7 * scale, "{m:?} dg[{k}]");
            }
            for k in 0..exact.ddg.len() {
                let scale = 1.0 + exact.ddg[k].amax();
                assert!(max_diff(&exact.ddg[k], &fd.ddg[k]) < 1e-5 * scale, "{m:?} ddg[{k}]");
            }
        }
    }

    #[test]
    fn warping_ratios() {
        let j = Warping::Sinh.log_jet(1.3).unwrap();
        assert!((j.ddphi_over_phi() - 1.0).abs() < 1e-12);
        assert!((j.dddphi_over_phi() - 1.0 / 1.3f64.tanh()).abs() < 1e-12);
        let j = Warping::Sin.log_jet(0.7).unwrap();
        assert!((j.ddphi_over_phi() + 1.0).abs() < 1e-12);
        let j = Warping::Linear { c: 1.0 }.log_jet(2.0).unwrap();
        assert!(j.ddphi_over_phi().abs() < 1e-12);
        // r e^{r^a}: phi''/phi = a r^{a-2} (1 + a + a r^a)
        let (a, r) = (3.0f64, 1.7f64);
        let j = Warping::SuperExponential { a }.log_jet(r).unwrap();
        let expect = a * r.powf(a - 2.0) * (1.0 + a + a * r.powf(a));
        assert!((j.ddphi_over_phi() - expect).abs() < 1e-10 * expect);
    }

    #[test]
    fn ln_sinh_is_stable() {
        let j = Warping::Sinh.log_jet(800.0).unwrap();
        assert!((j.l0 - (800.0 - std::f64::consts::LN_2)).abs() < 1e-12);
        assert!(j.l0.is_finite());
    }

    #[test]
    fn cone_chart_matches_klein_pullback() {
        // Pull back the Klein metric of H^3 along (t, theta) -> (rho cos, rho sin, z).
        let (t, th) = (0.9f64, 0.4f64);
        let emb = |t: f64, th: f64| {
            let w = (-t).exp();
            let rho = w / 3f64.sqrt();
            [rho * th.cos(), rho * th.sin(), 1.0 - w]
        };
        let h = 1e-6;
        let y = emb(t, th);
        let dt: Vec<f64> = (0..3)
            .map(|i| (emb(t + h, th)[i] - emb(t - h, th)[i]) / (2.0 * h))
            .collect();
        let dth: Vec<f64> = (0..3)
            .map(|i| (emb(t, th + h)[i] - emb(t, th - h)[i]) / (2.0 * h))
            .collect();
        let g = klein_metric(&y).unwrap();
        let q = |u: &[f64], v: &[f64]| {
            let mut s = 0.0;
            for i in 0..3 {
                for j in 0..3 {
                    s += u[i] * g[(i, j)] * v[j];
                }
            }
            s
        };
        let (a, b) = ConeSurface::components(t).unwrap();
        assert!((q(&dt, &dt) - a).abs() < 1e-7);
        assert!((q(&dth, &dth) - b).abs() < 1e-7);
        assert!(q(&dt, &dth).abs() < 1e-7);
    }
}
