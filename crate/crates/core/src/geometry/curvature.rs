//! Christoffel symbols, Riemann and Ricci tensors, sectional curvature.
//!
//! Conventions: `R(X, Y)Z = nabla_X nabla_Y Z - nabla_Y nabla_X Z - nabla_[X,Y] Z`,
//! `R(d_a, d_b) d_c = R^d_{cab} d_d`, `Rm_{abcd} = <R(d_a, d_b) d_c, d_d>`, so the
//! sectional curvature of the plane `X ^ Y` is `Rm(X, Y, Y, X) / |X ^ Y|^2`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::geometry::chart::{MetricChart, MetricJet};

/// Condition number above which a metric matrix is treated as singular.
pub const MAX_CONDITION: f64 = 1e13;

/// Inverse of a symmetric positive-definite matrix, refusing ill-conditioned input.
pub fn checked_inverse(g: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = g.clone().symmetric_eigenvalues();
    let (lo, hi) = (eig.min(), eig.max());
    if !(lo > 0.0) || !hi.is_finite() {
        return Err(LabError::numerical(
            "metric matrix is not positive definite",
            if lo > 0.0 { hi / lo } else { f64::INFINITY },
        ));
    }
    let cond = hi / lo;
    if cond > MAX_CONDITION {
        return Err(LabError::numerical("metric matrix is ill-conditioned", cond));
    }
    g.clone()
        .cholesky()
        .map(|c| c.inverse())
        .ok_or_else(|| LabError::numerical("Cholesky factorization failed", cond))
}

/// `Gamma^k_{ij}` stored at `(k * n + i) * n + j`.
pub fn christoffel_from_jet(jet: &MetricJet) -> Result<Vec<f64>> {
    let ginv = checked_inverse(&jet.g)?;
    Ok(christoffel_with_inverse(jet, &ginv))
}

fn christoffel_with_inverse(jet: &MetricJet, ginv: &DMatrix<f64>) -> Vec<f64> {
    let n = jet.dim();
    // first kind: [ij, l] = (d_i g_jl + d_j g_il - d_l g_ij) / 2
    let mut first = vec![0.0; n * n * n];
    for i in 0..n {
        for j in 0..n {
            for l in 0..n {
                first[(l * n + i) * n + j] =
                    0.5 * (jet.dg[i][(j, l)] + jet.dg[j][(i, l)] - jet.dg[l][(i, j)]);
            }
        }
    }
    let mut gamma = vec![0.0; n * n * n];
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let mut s = 0.0;
                for l in 0..n {
                    s += ginv[(k, l)] * first[(l * n + i) * n + j];
                }
                gamma[(k * n + i) * n + j] = s;
            }
        }
    }
    gamma
}

/// Christoffel symbols of a chart at `x`.
pub fn christoffel(chart: &MetricChart, x: &[f64]) -> Result<Vec<f64>> {
    christoffel_from_jet(&chart.jet_at(x)?)
}

/// Curvature data at one point.
#[derive(Debug, Clone)]
pub struct Riemann {
    pub n: usize,
    pub g: DMatrix<f64>,
    pub ginv: DMatrix<f64>,
    pub gamma: Vec<f64>,
    /// `R^d_{cab}` at `((d * n + c) * n + a) * n + b`.
    pub up: Vec<f64>,
    /// `Rm_{abcd}` at `((a * n + b) * n + c) * n + d`.
    pub down: Vec<f64>,
    /// `Ric_{bc} = R^a_{cab}`.
    pub ricci: DMatrix<f64>,
}

impl Riemann {
    pub fn rm(&self, a: usize, b: usize, c: usize, d: usize) -> f64 {
        let n = self.n;
        self.down[((a * n + b) * n + c) * n + d]
    }

    pub fn r_up(&self, d: usize, c: usize, a: usize, b: usize) -> f64 {
        let n = self.n;
        self.up[((d * n + c) * n + a) * n + b]
    }

    /// `Rm(X, Y, Y, X)`-based sectional curvature of the plane spanned by `u`, `v`.
    pub fn sectional(&self, u: &[f64], v: &[f64]) -> Result<f64> {
        let n = self.n;
        let q = |p: &[f64], r: &[f64]| {
            let mut s = 0.0;
            for i in 0..n {
                for j in 0..n {
                    s += p[i] * self.g[(i, j)] * r[j];
                }
            }
            s
        };
        let area = q(u, u) * q(v, v) - q(u, v).powi(2);
        if area <= 1e-300 {
            return Err(LabError::parameter("degenerate plane"));
        }
        let mut num = 0.0;
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    for d in 0..n {
                        num += self.rm(a, b, c, d) * u[a] * v[b] * v[c] * u[d];
                    }
                }
            }
        }
        Ok(num / area)
    }

    /// Eigenvalues of the Ricci tensor relative to the metric.
    pub fn ricci_eigenvalues(&self) -> Result<Vec<f64>> {
        let l = self
            .g
            .clone()
            .cholesky()
            .ok_or_else(|| LabError::numerical("metric not positive definite", f64::INFINITY))?
            .l();
        let linv = l
            .try_inverse()
            .ok_or_else(|| LabError::numerical("singular Cholesky factor", f64::INFINITY))?;
        let m = &linv * &self.ricci * linv.transpose();
        let m = (&m + m.transpose()) * 0.5;
        let mut e: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
        e.sort_by(|a, b| a.partial_cmp(b).unwrap());
        Ok(e)
    }

    /// Smallest eigenvalue of the curvature operator on 2-vectors, with the
    /// normalization that a space form of curvature k has operator k Id.
    pub fn curvature_operator_min(&self) -> f64 {
        let n = self.n;
        let e = orthonormal_frame(&self.g);
        let pairs: Vec<(usize, usize)> = (0..n)
            .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
            .collect();
        let rf = |i: usize, j: usize, k: usize, l: usize| {
            let mut s = 0.0;
            for a in 0..n {
                for b in 0..n {
                    for c in 0..n {
                        for d in 0..n {
                            s += self.rm(a, b, c, d)
                                * e[(a, i)]
                                * e[(b, j)]
                                * e[(c, k)]
                                * e[(d, l)];
                        }
                    }
                }
            }
            s
        };
        let m = pairs.len();
        if m == 0 {
            return 0.0;
        }
        let op = DMatrix::from_fn(m, m, |p, q| {
            let (i, j) = pairs[p];
            let (k, l) = pairs[q];
            rf(i, j, l, k)
        });
        let op = (&op + op.transpose()) * 0.5;
        op.symmetric_eigenvalues().min()
    }

    /// Largest violation of the algebraic symmetries and the first Bianchi identity.
    pub fn symmetry_residual(&self) -> f64 {
        let n = self.n;
        let mut worst: f64 = 0.0;
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    for d in 0..n {
                        let r = self.rm(a, b, c, d);
                        worst = worst
                            .max((r + self.rm(b, a, c, d)).abs())
                            .max((r + self.rm(a, b, d, c)).abs())
                            .max((r - self.rm(c, d, a, b)).abs())
                            .max((r + self.rm(b, c, a, d) + self.rm(c, a, b, d)).abs());
                    }
                }
            }
        }
        worst
    }
}

/// Riemann tensor from a metric jet.
pub fn riemann_from_jet(jet: &MetricJet) -> Result<Riemann> {
    let n = jet.dim();
    let ginv = checked_inverse(&jet.g)?;
    let gamma = christoffel_with_inverse(jet, &ginv);
    // d_a g^{-1} = -g^{-1} (d_a g) g^{-1}
    let dginv: Vec<DMatrix<f64>> = jet.dg.iter().map(|d| -(&ginv * d * &ginv)).collect();
    // d_a Gamma^k_{ij}
    let mut dgamma = vec![0.0; n * n * n * n];
    for a in 0..n {
        for i in 0..n {
            for j in 0..n {
                let mut first = vec![0.0; n];
                let mut dfirst = vec![0.0; n];
                for l in 0..n {
                    first[l] = 0.5 * (jet.dg[i][(j, l)] + jet.dg[j][(i, l)] - jet.dg[l][(i, j)]);
                    dfirst[l] = 0.5
                        * (jet.ddg[a * n + i][(j, l)] + jet.ddg[a * n + j][(i, l)]
                            - jet.ddg[a * n + l][(i, j)]);
                }
                for k in 0..n {
                    let mut s = 0.0;
                    for l in 0..n {
                        s += dginv[a][(k, l)] * first[l] + ginv[(k, l)] * dfirst[l];
                    }
                    dgamma[((a * n + k) * n + i) * n + j] = s;
                }
            }
        }
    }
    let gm = |k: usize, i: usize, j: usize| gamma[(k * n + i) * n + j];
    let dgm = |a: usize, k: usize, i: usize, j: usize| dgamma[((a * n + k) * n + i) * n + j];
    let mut up = vec![0.0; n * n * n * n];
    for d in 0..n {
        for c in 0..n {
            for a in 0..n {
                for b in 0..n {
                    let mut v = dgm(a, d, b, c) - dgm(b, d, a, c);
                    for e in 0..n {
                        v += gm(d, a, e) * gm(e, b, c) - gm(d, b, e) * gm(e, a, c);
                    }
                    up[((d * n + c) * n + a) * n + b] = v;
                }
            }
        }
    }
    let mut down = vec![0.0; n * n * n * n];
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                for d in 0..n {
                    let mut s = 0.0;
                    for e in 0..n {
                        s += jet.g[(d, e)] * up[((e * n + c) * n + a) * n + b];
                    }
                    down[((a * n + b) * n + c) * n + d] = s;
                }
            }
        }
    }
    let ricci = DMatrix::from_fn(n, n, |b, c| {
        let mut s = 0.0;
        for a in 0..n {
            s += up[((a * n + c) * n + a) * n + b];
        }
        s
    });
    let ricci = (&ricci + ricci.transpose()) * 0.5;
    Ok(Riemann {
        n,
        g: jet.g.clone(),
        ginv,
        gamma,
        up,
        down,
        ricci,
    })
}

pub fn riemann(chart: &MetricChart, x: &[f64]) -> Result<Riemann> {
    riemann_from_jet(&chart.jet_at(x)?)
}

/// Gram-Schmidt orthonormalization of the coordinate frame; column j holds
/// the coordinates of `E_j`.
pub fn orthonormal_frame(g: &DMatrix<f64>) -> DMatrix<f64> {
    let n = g.nrows();
    let mut e = DMatrix::<f64>::identity(n, n);
    let ip = |u: &DVector<f64>, v: &DVector<f64>| u.dot(&(g * v));
    for j in 0..n {
        let mut v: DVector<f64> = e.column(j).into();
        for i in 0..j {
            let ei: DVector<f64> = e.column(i).into();
            let c = ip(&v, &ei);
            v -= ei * c;
        }
        let len = ip(&v, &v).sqrt();
        e.set_column(j, &(v / len));
    }
    e
}

/// Options for pointwise curvature reports.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CurvatureOptions {
    /// Random planes sampled in addition to all coordinate planes.
    pub random_planes: usize,
    pub seed: u64,
    /// Declared tolerance for the Gauss-equation residual.
    pub tolerance: f64,
}

impl Default for CurvatureOptions {
    fn default() -> Self {
        CurvatureOptions {
            random_planes: 20,
            seed: 0,
            tolerance: 1e-3,
        }
    }
}

/// Pointwise curvature summary.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CurvatureReport {
    pub point: Vec<f64>,
    pub sectional_min: f64,
    pub sectional_max: f64,
    pub ricci_eigen_min: f64,
    /// Largest |intrinsic - Gauss-equation| over the sampled planes, for
    /// graph hypersurfaces; zero otherwise.
    pub gauss_equation_residual: f64,
    pub gauss_sectional_min: Option<f64>,
    pub tolerance: f64,
    pub planes: usize,
    pub symmetry_residual: f64,
}

impl CurvatureReport {
    pub fn gauss_consistent(&self) -> bool {
        self.gauss_equation_residual <= self.tolerance
    }
}

fn sample_planes(n: usize, count: usize, seed: u64) -> Vec<(Vec<f64>, Vec<f64>)> {
    let mut planes = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let mut u = vec![0.0; n];
            let mut v = vec![0.0; n];
            u[i] = 1.0;
            v[j] = 1.0;
            planes.push((u, v));
        }
    }
    let mut rng = crate::util::seeded_rng(seed);
    while planes.len() < n * (n - 1) / 2 + count && n >= 2 {
        let u: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let nu = crate::util::norm(&u);
        let nv = crate::util::norm(&v);
        let dot: f64 = u.iter().zip(&v).map(|(a, b)| a * b).sum();
        if nu < 1e-3 || nv < 1e-3 || (dot / (nu * nv)).abs() > 0.99 {
            continue;
        }
        planes.push((u, v));
    }
    planes
}

/// Curvature report at `x`: sampled sectional curvatures, Ricci eigenvalues
/// and, for graph hypersurfaces, the Gauss-equation cross-check.
pub fn curvature(chart: &MetricChart, x: &[f64], opts: &CurvatureOptions) -> Result<CurvatureReport> {
    let riem = riemann(chart, x)?;
    if riem.up.iter().any(|v| !v.is_finite()) {
        return Err(LabError::numerical(
            "non-finite curvature from second differences",
            f64::NAN,
        ));
    }
    let n = riem.n;
    let planes = sample_planes(n, opts.random_planes, opts.seed);
    let mut smin = f64::INFINITY;
    let mut smax = f64::NEG_INFINITY;
    let mut gmin: Option<f64> = None;
    let mut resid: f64 = 0.0;
    for (u, v) in &planes {
        let k = riem.sectional(u, v)?;
        smin = smin.min(k);
        smax = smax.max(k);
        if let Some(gk) = chart.model().gauss_sectional(x, u, v) {
            let gk = gk?;
            gmin = Some(gmin.map_or(gk, |m| m.min(gk)));
            resid = resid.max((gk - k).abs());
        }
    }
    let ric = riem.ricci_eigenvalues()?;
    Ok(CurvatureReport {
        point: x.to_vec(),
        sectional_min: smin,
        sectional_max: smax,
        ricci_eigen_min: ric[0],
        gauss_equation_residual: resid,
        gauss_sectional_min: gmin,
        tolerance: opts.tolerance,
        planes: planes.len(),
        symmetry_residual: riem.symmetry_residual(),
    })
}

/// CSV rows `point..., sec_min, ric_min, gauss_residual`.
pub fn curvature_csv(reports: &[CurvatureReport]) -> String {
    let dim = reports.first().map_or(0, |r| r.point.len());
    let mut out = String::new();
    for i in 0..dim {
        out.push_str(&format!("x{i},"));
    }
    out.push_str("sec_min,ric_min,gauss_residual\n");
    for r in reports {
        for v in &r.point {
            out.push_str(&format!("{v},"));
        }
        out.push_str(&format!(
            "{},{},{}\n",
            r.sectional_min, r.ricci_eigen_min, r.gauss_equation_residual
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::chart::{ChartSpec, Domain, ModelSpec};
    use crate::geometry::models::Warping;

    fn chart(model: ModelSpec, lo: Vec<f64>, hi: Vec<f64>) -> MetricChart {
        MetricChart::from_spec(ChartSpec {
            model,
            domain: Domain::Box { lo, hi },
            exclusions: vec![],
            fd_step: None,
        })
        .unwrap()
    }

    #[test]
    fn flat_christoffels_vanish() {
        let c = chart(ModelSpec::Euclidean { dim: 3 }, vec![-1.0; 3], vec![1.0; 3]);
        assert!(christoffel(&c, &[0.1, 0.2, 0.3]).unwrap().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn klein_christoffels_vanish_at_origin() {
        let c = chart(ModelSpec::KleinBall { dim: 2 }, vec![-0.9; 2], vec![0.9; 2]);
        assert!(christoffel(&c, &[0.0, 0.0]).unwrap().iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn polar_plane_christoffel() {
        let c = chart(
            ModelSpec::Warped {
                warping: Warping::Linear { c: 1.0 },
                r0: None,
            },
            vec![0.5, -3.0],
            vec![3.0, 3.0],
        );
        let g = christoffel(&c, &[1.7, 0.3]).unwrap();
        // Gamma^r_{theta theta} = -r, Gamma^theta_{r theta} = 1/r
        assert!((g[(0 * 2 + 1) * 2 + 1] + 1.7).abs() < 1e-12);
        assert!((g[(1 * 2) * 2 + 1] - 1.0 / 1.7).abs() < 1e-12);
        let r = riemann(&c, &[1.7, 0.3]).unwrap();
        assert!(r.up.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn klein_curvature_is_minus_one() {
        let c = chart(ModelSpec::KleinBall { dim: 3 }, vec![-0.9; 3], vec![0.9; 3]);
        let rep = curvature(&c, &[0.3, -0.2, 0.4], &CurvatureOptions::default()).unwrap();
        assert!((rep.sectional_min + 1.0).abs() < 1e-9);
        assert!((rep.sectional_max + 1.0).abs() < 1e-9);
        assert!((rep.ricci_eigen_min + 2.0).abs() < 1e-9);
        assert!(rep.symmetry_residual < 1e-9);
        let r = riemann(&c, &[0.3, -0.2, 0.4]).unwrap();
        assert!((r.curvature_operator_min() + 1.0).abs() < 1e-9);
    }

    #[test]
    fn sphere_curvature_is_plus_one() {
        let c = chart(
            ModelSpec::SphereStereographic { dim: 2 },
            vec![-2.0; 2],
            vec![2.0; 2],
        );
        let rep = curvature(&c, &[0.5, 0.9], &CurvatureOptions::default()).unwrap();
        assert!((rep.sectional_min - 1.0).abs() < 1e-9);
        assert!((rep.ricci_eigen_min - 1.0).abs() < 1e-9);
    }

    #[test]
    fn fd_route_matches_closed_form() {
        // Same Klein metric, once through the closed-form jet and once through differences.
        let exact = chart(ModelSpec::KleinBall { dim: 2 }, vec![-0.9; 2], vec![0.9; 2]);
        let x = [0.25, 0.4];
        let jet = crate::geometry::chart::finite_difference_jet(
            exact.model().as_ref(),
            &x,
            1e-3,
        )
        .unwrap();
        let r = riemann_from_jet(&jet).unwrap();
        assert!((r.sectional(&[1.0, 0.0], &[0.0, 1.0]).unwrap() + 1.0).abs() < 1e-4);
    }

    #[test]
    fn singular_metric_reports_condition() {
        let jet = MetricJet {
            g: DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]),
            dg: vec![DMatrix::zeros(2, 2); 2],
            ddg: vec![DMatrix::zeros(2, 2); 4],
        };
        assert!(matches!(
            christoffel_from_jet(&jet),
            Err(LabError::Numerical { .. })
        ));
    }

    #[test]
    fn frame_is_orthonormal() {
        let g = DMatrix::from_row_slice(3, 3, &[2.0, 0.3, 0.1, 0.3, 1.5, -0.2, 0.1, -0.2, 1.0]);
        let e = orthonormal_frame(&g);
        let m = e.transpose() * &g * &e;
        assert!((m - DMatrix::<f64>::identity(3, 3)).abs().max() < 1e-12);
    }
}
