use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::field::TensorField;
use super::ops::covariant_derivative;
use crate::error::{LabError, Result};
use crate::util::pairwise_sum;

/// `sum_nodes w(node) * integrand(node)` over nodes where `keep` holds, with the
/// Riemannian volume weight. The reduction is a fixed tree so results do not
/// depend on thread scheduling.
pub fn integrate_nodes<F>(field: &TensorField, integrand: F) -> f64
where
    F: Fn(usize) -> f64 + Sync,
{
    let mesh = field.mesh();
    let terms: Vec<f64> = (0..mesh.len())
        .into_par_iter()
        .map(|i| {
            if field.is_valid(i) {
                integrand(i) * mesh.volume_weight(i)
            } else {
                0.0
            }
        })
        .collect();
    pairwise_sum(&terms)
}

/// `( integral |T|^p dvol )^{1/p}` over the field's valid nodes.
pub fn lp_norm(field: &TensorField, p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(LabError::parameter(format!("L^p norm needs p >= 1, got {p}")));
    }
    let s = integrate_nodes(field, |i| field.norm_at(i).powf(p));
    Ok(s.powf(1.0 / p))
}

/// `integral <A, B>_g dvol` over nodes valid for both fields.
pub fn l2_inner(a: &TensorField, b: &TensorField) -> Result<f64> {
    let both = a.zip_map(b, |x, _| x)?;
    Ok(integrate_nodes(&both, |i| a.inner_at(b, i)))
}

/// Seminorms `||nabla^j u||_{L^p}` for j = 0..k and their sum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormReport {
    pub p: f64,
    pub k: usize,
    pub seminorms: Vec<f64>,
    pub total: f64,
    /// Largest lattice step.
    pub step: f64,
    /// Active nodes flagged by the highest-order stencil.
    pub flagged_nodes: usize,
    /// Richardson-style error estimate `|total - coarse total| / 3`, when a
    /// coarser report has been attached.
    pub refinement_estimate: Option<f64>,
}

impl NormReport {
    pub fn with_coarse(mut self, coarse: &NormReport) -> Self {
        self.refinement_estimate = Some((self.total - coarse.total).abs() / 3.0);
        self
    }

    pub fn csv_header() -> &'static str {
        "p,k,order,seminorm,total,step,flagged"
    }

    pub fn csv_rows(&self) -> String {
        let mut out = String::new();
        for (j, s) in self.seminorms.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                self.p, self.k, j, s, self.total, self.step, self.flagged_nodes
            ));
        }
        out
    }
}

/// `||u||_{W^{k,p}} = sum_j ||nabla^j u||_{L^p}`. Every seminorm is taken over
/// the nodes where the order-k derivative is valid, so the orders share one
/// integration region.
pub fn sobolev_norm(u: &TensorField, k: usize, p: f64) -> Result<NormReport> {
    if !(p >= 1.0) {
        return Err(LabError::parameter(format!("Sobolev norm needs p >= 1, got {p}")));
    }
    let mut derivs = vec![u.clone()];
    for _ in 0..k {
        let next = covariant_derivative(derivs.last().expect("nonempty"));
        derivs.push(next);
    }
    let region = derivs.last().expect("nonempty").valid().to_vec();
    let mut seminorms = Vec::with_capacity(k + 1);
    for d in &derivs {
        let mut masked = d.clone();
        for (i, &ok) in region.iter().enumerate() {
            if !ok {
                masked.invalidate(i);
            }
        }
        seminorms.push(lp_norm(&masked, p)?);
    }
    let step = u.mesh().lattice().step.iter().cloned().fold(0.0, f64::max);
    Ok(NormReport {
        p,
        k,
        total: seminorms.iter().sum(),
        seminorms,
        step,
        flagged_nodes: derivs.last().expect("nonempty").flagged_count(),
        refinement_estimate: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discrete::Mesh;
    use crate::geometry::MetricChart;
    use std::sync::Arc;

    fn flat(lo: f64, hi: f64, step: f64) -> Arc<Mesh> {
        let chart = MetricChart::euclidean_box(vec![lo, lo], vec![hi, hi]);
        Arc::new(Mesh::on_box(chart, &[lo, lo], &[hi, hi], step).unwrap())
    }

    #[test]
    fn constant_norm() {
        let u = TensorField::scalar(flat(0.0, 2.0, 0.1), |_| -3.0);
        for p in [1.0, 2.0, 3.5] {
            let v = lp_norm(&u, p).unwrap();
            assert!((v - 3.0 * 4f64.powf(1.0 / p)).abs() < 1e-10, "p = {p}");
        }
    }

    #[test]
    fn gaussian_l2() {
        // integral of exp(-|x|^2) over R^2 is pi, so the L^2 norm is sqrt(pi).
        let u = TensorField::scalar(flat(-7.0, 7.0, 0.05), |x| (-(x[0] * x[0] + x[1] * x[1]) / 2.0).exp());
        let v = lp_norm(&u, 2.0).unwrap();
        assert!((v - std::f64::consts::PI.sqrt()).abs() < 1e-8);
    }

    #[test]
    fn affine_second_seminorm_vanishes() {
        let u = TensorField::scalar(flat(0.0, 1.0, 0.1), |x| 2.0 * x[0] - x[1] + 0.5);
        let r = sobolev_norm(&u, 2, 2.0).unwrap();
        assert!(r.seminorms[2] < 1e-10);
        assert!((r.seminorms[1] - 5f64.sqrt()).abs() < 1e-10);
        assert!((r.total - r.seminorms.iter().sum::<f64>()).abs() < 1e-15);
    }

    #[test]
    fn p_below_one_rejected() {
        let u = TensorField::scalar(flat(0.0, 1.0, 0.5), |_| 1.0);
        assert!(matches!(lp_norm(&u, 0.5), Err(LabError::Parameter(_))));
        assert!(matches!(sobolev_norm(&u, 1, 0.9), Err(LabError::Parameter(_))));
    }
}
