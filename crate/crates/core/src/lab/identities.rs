use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::box_mesh;
use super::regularity::{integral, BumpField};
use crate::discrete::{
    bochner_laplacian, d_s, d_s_star, gradient, hessian, laplacian, lp_norm, sampson_laplacian,
    weitzenbock_action, SymTensorField, TensorField,
};
use crate::error::{LabError, Result};
use crate::geometry::ModelSpec;

/// Errors at a sequence of mesh steps and the fitted order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceStudy {
    pub name: String,
    pub steps: Vec<f64>,
    pub errors: Vec<f64>,
    pub order: f64,
}

impl ConvergenceStudy {
    fn run<F>(name: &str, steps: &[f64], f: F) -> Result<Self>
    where
        F: Fn(f64) -> Result<f64> + Sync,
    {
        if steps.len() < 2 {
            return Err(LabError::parameter("a refinement study needs at least two steps"));
        }
        let errors: Vec<f64> = steps.par_iter().map(|&h| f(h)).collect::<Result<_>>()?;
        Ok(ConvergenceStudy {
            name: name.to_string(),
            steps: steps.to_vec(),
            order: crate::util::convergence_order(steps, &errors),
            errors,
        })
    }
}

/// `|| 1/2 Delta|grad u|^2 - |nabla^2 u|^2 - Ric(grad u, grad u) - <grad Delta u, grad u> ||_{L^1}`
/// over the nodes where every term is computable.
pub fn bochner_residual(u: &TensorField) -> Result<f64> {
    if u.degree() != 0 {
        return Err(LabError::parameter("Bochner residual takes a scalar field"));
    }
    let mesh = u.mesh().clone();
    let n = mesh.dim();
    let du = gradient(u);
    let g2: Vec<f64> = (0..mesh.len()).map(|i| du.norm_at(i).powi(2)).collect();
    let g2 = TensorField::from_parts(mesh.clone(), 0, g2, du.valid().to_vec())?;
    let lap_g2 = laplacian(&g2);
    let hess = hessian(u);
    let lap = laplacian(u);
    let dlap = gradient(&lap);
    let keep = |i: usize| lap_g2.is_valid(i) && hess.is_valid(i) && dlap.is_valid(i);
    let residual = |i: usize| {
        let gi = mesh.inverse_metric(i);
        let ric = mesh.ricci(i);
        let w = du.at(i);
        let up: Vec<f64> = (0..n).map(|a| (0..n).map(|b| gi[a * n + b] * w[b]).sum()).collect();
        let mut r = 0.0;
        for a in 0..n {
            for b in 0..n {
                r += ric[a * n + b] * up[a] * up[b];
            }
        }
        (0.5 * lap_g2.value(i) - hess.norm_at(i).powi(2) - r - dlap.inner_at(&du, i)).abs()
    };
    Ok(integral(&mesh, keep, residual))
}

/// `|| Delta_Sym T - (nabla^* nabla T - ric(T)) ||_{L^2}`.
pub fn sampson_residual(t: &SymTensorField) -> Result<f64> {
    let s = sampson_laplacian(t)?.to_full();
    let b = bochner_laplacian(t).to_full();
    let w = weitzenbock_action(t)?.to_full();
    lp_norm(&s.sub(&b)?.add(&w)?, 2.0)
}

fn poincare_mesh(step: f64) -> Result<std::sync::Arc<crate::discrete::Mesh>> {
    box_mesh(ModelSpec::PoincareBall { dim: 2 }, &[-0.6, -0.6], &[0.6, 0.6], step)
}

fn sphere_mesh(step: f64) -> Result<std::sync::Arc<crate::discrete::Mesh>> {
    box_mesh(ModelSpec::SphereStereographic { dim: 2 }, &[-1.0, -1.0], &[1.0, 1.0], step)
}

/// Bochner residual of an off-centre bump on the hyperbolic plane under refinement.
pub fn bochner_study(steps: &[f64]) -> Result<ConvergenceStudy> {
    let field = BumpField {
        centers: vec![vec![0.1, -0.05]],
        radii: vec![0.45],
        amplitudes: vec![1.0],
    };
    ConvergenceStudy::run("bochner_hyperbolic_bump", steps, |h| {
        bochner_residual(&field.sample(poincare_mesh(h)?))
    })
}

fn sphere_tensor(x: &[f64]) -> Vec<f64> {
    let b = BumpField::single(vec![0.05, 0.0], 0.8).eval(x);
    vec![
        b * (1.0 + x[0] * x[0]),
        b * x[0] * x[1],
        b * x[0] * x[1],
        b * (0.5 + x[1] * x[1]),
    ]
}

/// Sampson identity residual for a compactly supported symmetric 2-tensor on
/// the round sphere under refinement.
pub fn sampson_study(steps: &[f64]) -> Result<ConvergenceStudy> {
    ConvergenceStudy::run("sampson_sphere_2_tensor", steps, |h| {
        let t = SymTensorField::from_full(&TensorField::sample(sphere_mesh(h)?, 2, sphere_tensor));
        sampson_residual(&t)
    })
}

/// `|<D_S h, T> - <h, D_S^* T>|` for compactly supported h (degree 1) and T
/// (degree 2) on the round sphere under refinement. Inner products on
/// symmetric k-tensors carry the factor `1/k!`; with the plain contraction
/// the two sides differ by the factor k.
pub fn adjointness_study(steps: &[f64]) -> Result<ConvergenceStudy> {
    ConvergenceStudy::run("ds_adjoint_sphere", steps, |h| {
        let mesh = sphere_mesh(h)?;
        let t = SymTensorField::from_full(&TensorField::sample(mesh.clone(), 2, sphere_tensor));
        let w = SymTensorField::from_full(&TensorField::sample(mesh, 1, |x| {
            let b = BumpField::single(vec![-0.1, 0.1], 0.7).eval(x);
            vec![b * (1.0 + x[1]), b * x[0]]
        }));
        let dh = d_s(&w).to_full();
        let dt = d_s_star(&t)?.to_full();
        let tf = t.to_full();
        let wf = w.to_full();
        // degrees 2 and 1: 1/2! and 1/1!
        let lhs = crate::discrete::l2_inner(&dh, &tf)? / 2.0;
        let rhs = crate::discrete::l2_inner(&wf, &dt)?;
        Ok((lhs - rhs).abs())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_has_zero_residual() {
        let u = TensorField::scalar(poincare_mesh(0.05).unwrap(), |_| 2.5);
        assert_eq!(bochner_residual(&u).unwrap(), 0.0);
    }

    #[test]
    fn sphere_linear_coordinate() {
        // x_1 restricted to the unit sphere: Delta u = -2u, Ric = g.
        let f = |x: &[f64]| 2.0 * x[0] / (1.0 + x[0] * x[0] + x[1] * x[1]);
        let res = |h: f64| {
            let mesh = box_mesh(ModelSpec::SphereStereographic { dim: 2 }, &[-0.5, -0.5], &[0.5, 0.5], h)
                .unwrap();
            let u = TensorField::scalar(mesh.clone(), f);
            let lap = laplacian(&u);
            let c = mesh.lattice().node(&[(0.5 / h) as usize + 5, (0.5 / h) as usize + 3]);
            let lap_err = (lap.value(c) + 2.0 * u.value(c)).abs();
            (bochner_residual(&u).unwrap(), lap_err)
        };
        let (r1, e1) = res(1.0 / 32.0);
        let (r2, e2) = res(1.0 / 64.0);
        assert!(r2 < r1 / 2.0, "{r1} {r2}");
        assert!(e1 < 1e-2 && e2 < e1 / 3.0, "{e1} {e2}");
    }

    #[test]
    fn bochner_converges_on_hyperbolic_bump() {
        let s = bochner_study(&[1.0 / 32.0, 1.0 / 64.0]).unwrap();
        assert!(s.order >= 1.0, "{s:?}");
    }

    #[test]
    fn sampson_and_adjointness_converge() {
        let s = sampson_study(&[1.0 / 16.0, 1.0 / 32.0]).unwrap();
        assert!(s.order > 1.5, "{s:?}");
        let a = adjointness_study(&[1.0 / 16.0, 1.0 / 32.0]).unwrap();
        assert!(a.order > 1.5, "{a:?}");
    }
}
