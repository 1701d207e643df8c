//! Riemannian volume by tensor-product midpoint quadrature with Richardson
//! refinement, plus closed-form volume oracles.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::geometry::chart::MetricChart;
use crate::geometry::models::ConeSurface;
use crate::util::{pairwise_sum, simpson, unit_sphere_area};

/// Integration region in chart coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Region {
    Box { lo: Vec<f64>, hi: Vec<f64> },
    /// Coordinate ball, integrated in polar (n = 2) or spherical (n = 3) coordinates.
    Ball { center: Vec<f64>, radius: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VolumeOptions {
    pub rel_tol: f64,
    pub base_cells: usize,
    pub max_levels: usize,
}

impl Default for VolumeOptions {
    fn default() -> Self {
        VolumeOptions {
            rel_tol: 1e-4,
            base_cells: 16,
            max_levels: 9,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VolumeResult {
    /// Richardson-extrapolated value of the two finest levels.
    pub value: f64,
    /// Raw midpoint values per refinement level.
    pub levels: Vec<f64>,
    pub rel_change: f64,
    pub converged: bool,
}

fn density(chart: &MetricChart, x: &[f64]) -> Result<f64> {
    let g = chart.metric_at(x)?;
    let d = g.determinant();
    if !(d > 0.0) || !d.is_finite() {
        return Err(LabError::domain(format!(
            "volume density not finite at {x:?} (det g = {d})"
        )));
    }
    Ok(d.sqrt())
}

// Midpoint rule with `cells` subdivisions per parameter axis. The map
// `param -> (point, jacobian)` takes unit-cube parameters.
fn midpoint_level<F>(chart: &MetricChart, dim: usize, cells: usize, map: &F) -> Result<f64>
where
    F: Fn(&[f64]) -> (Vec<f64>, f64) + Sync,
{
    let total = cells.pow(dim as u32);
    let h = 1.0 / cells as f64;
    let vals: Result<Vec<f64>> = (0..total)
        .into_par_iter()
        .map(|idx| {
            let mut rem = idx;
            let mut u = vec![0.0; dim];
            for a in (0..dim).rev() {
                u[a] = ((rem % cells) as f64 + 0.5) * h;
                rem /= cells;
            }
            let (x, jac) = map(&u);
            if jac == 0.0 {
                return Ok(0.0);
            }
            Ok(density(chart, &x)? * jac)
        })
        .collect();
    Ok(pairwise_sum(&vals?) * h.powi(dim as i32))
}

fn refine<F>(chart: &MetricChart, dim: usize, opts: &VolumeOptions, map: F) -> Result<VolumeResult>
where
    F: Fn(&[f64]) -> (Vec<f64>, f64) + Sync,
{
    let mut levels = Vec::new();
    let mut cells = opts.base_cells.max(1);
    let mut rel = f64::INFINITY;
    for _ in 0..opts.max_levels {
        let v = midpoint_level(chart, dim, cells, &map)?;
        if let Some(prev) = levels.last().copied() {
            let prev: f64 = prev;
            rel = ((v - prev) / v).abs();
            levels.push(v);
            if rel <= opts.rel_tol {
                break;
            }
        } else {
            levels.push(v);
        }
        cells *= 2;
    }
    let k = levels.len();
    let value = if k >= 2 {
        (4.0 * levels[k - 1] - levels[k - 2]) / 3.0
    } else {
        levels[0]
    };
    Ok(VolumeResult {
        value,
        levels,
        rel_change: rel,
        converged: rel <= opts.rel_tol,
    })
}

/// Volume of `region` under the chart metric.
pub fn volume(chart: &MetricChart, region: &Region, opts: &VolumeOptions) -> Result<VolumeResult> {
    let n = chart.dim();
    match region {
        Region::Box { lo, hi } => {
            if lo.len() != n || hi.len() != n {
                return Err(LabError::parameter("region dimension mismatch"));
            }
            if lo.iter().zip(hi).any(|(l, h)| h < l) {
                return Err(LabError::parameter("region box has hi < lo"));
            }
            let span: Vec<f64> = lo.iter().zip(hi).map(|(l, h)| h - l).collect();
            let jac: f64 = span.iter().product();
            if jac == 0.0 {
                return Ok(VolumeResult {
                    value: 0.0,
                    levels: vec![0.0],
                    rel_change: 0.0,
                    converged: true,
                });
            }
            refine(chart, n, opts, |u| {
                let x = (0..n).map(|a| lo[a] + u[a] * span[a]).collect();
                (x, jac)
            })
        }
        Region::Ball { center, radius } => {
            let r = *radius;
            match n {
                2 => refine(chart, 2, opts, |u| {
                    let (rr, th) = (u[0] * r, u[1] * 2.0 * PI);
                    (
                        vec![center[0] + rr * th.cos(), center[1] + rr * th.sin()],
                        rr * r * 2.0 * PI,
                    )
                }),
                3 => refine(chart, 3, opts, |u| {
                    let (rr, th, ph) = (u[0] * r, u[1] * PI, u[2] * 2.0 * PI);
                    (
                        vec![
                            center[0] + rr * th.sin() * ph.cos(),
                            center[1] + rr * th.sin() * ph.sin(),
                            center[2] + rr * th.cos(),
                        ],
                        rr * rr * th.sin() * r * PI * 2.0 * PI,
                    )
                }),
                _ => Err(LabError::parameter("ball regions supported for n = 2, 3")),
            }
        }
    }
}

/// Volume of a geodesic ball of radius rho in hyperbolic n-space.
pub fn hyperbolic_ball_volume(n: usize, rho: f64) -> f64 {
    match n {
        1 => 2.0 * rho,
        2 => 2.0 * PI * (rho.cosh() - 1.0),
        3 => PI * ((2.0 * rho).sinh() - 2.0 * rho),
        _ => unit_sphere_area(n) * simpson(|t| t.sinh().powi(n as i32 - 1), 0.0, rho, 2000),
    }
}

/// Coordinate radius of the hyperbolic ball of radius rho about the Klein origin.
pub fn klein_radius(rho: f64) -> f64 {
    rho.tanh()
}

/// Closed-form value `2 vol(S^{n-1}) / (n - 1)` attributed to the double cone K
/// through the half-cylinder picture.
pub fn cone_volume_oracle(n: usize) -> Result<f64> {
    if n < 2 {
        return Err(LabError::domain(format!(
            "cone volume integral diverges for n = {n}"
        )));
    }
    Ok(2.0 * unit_sphere_area(n) / (n as f64 - 1.0))
}

/// Volume of K computed from its conformal picture: each nappe is the part of
/// a cylinder of Euclidean radius `1/sqrt(3)` above height `sqrt(2/3)` in the
/// half-space model, giving `2 vol(S^{n-1}) 2^{-(n-1)/2} / (n - 1)`.
pub fn cone_volume_half_space(n: usize) -> Result<f64> {
    if n < 2 {
        return Err(LabError::domain(format!(
            "cone volume integral diverges for n = {n}"
        )));
    }
    let ratio = (1.0f64 / 3.0).sqrt() / (2.0f64 / 3.0).sqrt();
    Ok(2.0 * unit_sphere_area(n) * ratio.powi(n as i32 - 1) / (n as f64 - 1.0))
}

/// Volume of K in dimension n by one-dimensional quadrature along the nappe
/// parameter t in `[0, t_max]` (the tail decays like `exp(-(n-1) t / 2)`).
pub fn cone_volume_quadrature(n: usize, t_max: f64, panels: usize) -> Result<f64> {
    if n < 2 {
        return Err(LabError::domain(format!(
            "cone volume integral diverges for n = {n}"
        )));
    }
    let f = |t: f64| {
        let (gtt, gthth) = ConeSurface::components(t).expect("t >= 0");
        gtt.sqrt() * gthth.powf((n as f64 - 1.0) / 2.0)
    };
    Ok(2.0 * unit_sphere_area(n) * simpson(f, 0.0, t_max, panels))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::chart::{ChartSpec, Domain, ModelSpec};

    fn klein(dim: usize) -> MetricChart {
        MetricChart::from_spec(ChartSpec {
            model: ModelSpec::KleinBall { dim },
            domain: Domain::Whole,
            exclusions: vec![],
            fd_step: None,
        })
        .unwrap()
    }

    #[test]
    fn unit_square() {
        let c = MetricChart::euclidean_box(vec![0.0, 0.0], vec![1.0, 1.0]);
        let v = volume(
            &c,
            &Region::Box {
                lo: vec![0.0, 0.0],
                hi: vec![1.0, 1.0],
            },
            &VolumeOptions::default(),
        )
        .unwrap();
        assert!((v.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn hyperbolic_disk_in_klein_chart() {
        let c = klein(2);
        for rho in [0.5, 1.0] {
            let v = volume(
                &c,
                &Region::Ball {
                    center: vec![0.0, 0.0],
                    radius: klein_radius(rho),
                },
                &VolumeOptions::default(),
            )
            .unwrap();
            let exact = hyperbolic_ball_volume(2, rho);
            assert!(((v.value - exact) / exact).abs() < 1e-3, "{rho}: {} vs {exact}", v.value);
        }
    }

    #[test]
    fn hyperbolic_formula_consistency() {
        for rho in [0.3, 1.2] {
            let generic = unit_sphere_area(3) * simpson(|t| t.sinh().powi(2), 0.0, rho, 2000);
            assert!((generic - hyperbolic_ball_volume(3, rho)).abs() < 1e-10);
        }
    }

    #[test]
    fn boundary_touching_region_is_rejected() {
        let c = klein(2);
        let r = volume(
            &c,
            &Region::Box {
                lo: vec![-1.0, -1.0],
                hi: vec![1.0, 1.0],
            },
            &VolumeOptions::default(),
        );
        assert!(matches!(r, Err(LabError::Domain(_))));
    }

    #[test]
    fn cone_oracles() {
        assert!((cone_volume_oracle(2).unwrap() - 4.0 * PI).abs() < 1e-12);
        assert!((cone_volume_oracle(3).unwrap() - 4.0 * PI).abs() < 1e-12);
        assert!(cone_volume_oracle(1).is_err());
        assert!(cone_volume_oracle(40).unwrap() < 1e-6);
        let q = cone_volume_quadrature(2, 80.0, 40000).unwrap();
        let hs = cone_volume_half_space(2).unwrap();
        assert!(((q - hs) / hs).abs() < 1e-6, "{q} vs {hs}");
        let q3 = cone_volume_quadrature(3, 80.0, 40000).unwrap();
        assert!(((q3 - cone_volume_half_space(3).unwrap()) / q3).abs() < 1e-6);
    }
}
