//! Covariant operators on mesh fields. Derivative indices are prepended:
//! `(nabla T)_{c a_1 ... a_k} = (nabla_c T)_{a_1 ... a_k}`.

use std::sync::Arc;

use rayon::prelude::*;

use super::field::{index_of, indices_of, SymTensorField, TensorField};
use super::mesh::Mesh;
use crate::error::{LabError, Result};

/// Highest symmetric-tensor degree the Sampson and Weitzenboeck operators accept.
pub const MAX_SYM_DEGREE: usize = 3;

fn assemble(mesh: &Arc<Mesh>, degree: usize, rows: Vec<Option<Vec<f64>>>) -> TensorField {
    let m = mesh.dim().pow(degree as u32);
    let mut data = vec![0.0; mesh.len() * m];
    let mut valid = vec![false; mesh.len()];
    for (i, r) in rows.into_iter().enumerate() {
        if let Some(v) = r {
            data[i * m..(i + 1) * m].copy_from_slice(&v);
            valid[i] = true;
        }
    }
    TensorField::from_parts(mesh.clone(), degree, data, valid).expect("consistent storage")
}

/// Covariant derivative of a covariant k-tensor field: centered partials
/// corrected by Christoffel terms. Nodes whose stencil touches a masked or
/// flagged node are flagged in the result.
pub fn covariant_derivative(t: &TensorField) -> TensorField {
    let mesh = t.mesh().clone();
    let n = mesh.dim();
    let k = t.degree();
    let m = t.components();
    let rows: Vec<Option<Vec<f64>>> = (0..mesh.len())
        .into_par_iter()
        .map(|node| {
            if !t.is_valid(node) || !mesh.is_active(node) {
                return None;
            }
            let mut out = vec![0.0; n * m];
            for c in 0..n {
                if !mesh.partial(t.data(), t.valid(), m, node, c, &mut out[c * m..(c + 1) * m]) {
                    return None;
                }
            }
            if k > 0 {
                let gam = mesh.christoffel(node);
                let here = t.at(node);
                for c in 0..n {
                    for flat in 0..m {
                        let idx = indices_of(flat, n, k);
                        let mut corr = 0.0;
                        for l in 0..k {
                            let mut j = idx.clone();
                            for mm in 0..n {
                                j[l] = mm;
                                corr += gam[(mm * n + c) * n + idx[l]] * here[index_of(&j, n)];
                            }
                        }
                        out[c * m + flat] -= corr;
                    }
                }
            }
            Some(out)
        })
        .collect();
    assemble(&mesh, k + 1, rows)
}

/// Contraction of the first two indices with the inverse metric.
pub fn trace_first_pair(t: &TensorField) -> Result<TensorField> {
    let k = t.degree();
    if k < 2 {
        return Err(LabError::parameter("trace needs a tensor of degree >= 2"));
    }
    let mesh = t.mesh().clone();
    let n = mesh.dim();
    let rest = n.pow((k - 2) as u32);
    let rows: Vec<Option<Vec<f64>>> = (0..mesh.len())
        .into_par_iter()
        .map(|node| {
            if !t.is_valid(node) {
                return None;
            }
            let gi = mesh.inverse_metric(node);
            let v = t.at(node);
            let mut out = vec![0.0; rest];
            for a in 0..n {
                for b in 0..n {
                    let w = gi[a * n + b];
                    let base = (a * n + b) * rest;
                    for (r, o) in out.iter_mut().enumerate() {
                        *o += w * v[base + r];
                    }
                }
            }
            Some(out)
        })
        .collect();
    Ok(assemble(&mesh, k - 2, rows))
}

pub fn gradient(u: &TensorField) -> TensorField {
    covariant_derivative(u)
}

/// Raw covariant Hessian `nabla nabla u` (not symmetrized).
pub fn hessian(u: &TensorField) -> TensorField {
    covariant_derivative(&covariant_derivative(u))
}

/// Laplace-Beltrami operator as the trace of the Hessian.
pub fn laplacian(u: &TensorField) -> TensorField {
    trace_first_pair(&hessian(u)).expect("degree >= 2")
}

/// Largest antisymmetric part `|H_ab - H_ba|` of a degree-2 field over valid nodes.
pub fn antisymmetry(h: &TensorField) -> f64 {
    let n = h.mesh().dim();
    (0..h.mesh().len())
        .filter(|&i| h.is_valid(i))
        .map(|i| {
            let v = h.at(i);
            let mut w: f64 = 0.0;
            for a in 0..n {
                for b in 0..n {
                    w = w.max((v[a * n + b] - v[b * n + a]).abs());
                }
            }
            w
        })
        .fold(0.0, f64::max)
}

/// Symmetrization `s_k`.
pub fn symmetrize(t: &TensorField) -> SymTensorField {
    SymTensorField::from_full(t)
}

/// `D_S h = k s_k(nabla h)` for h of degree k - 1.
pub fn d_s(h: &SymTensorField) -> SymTensorField {
    let k = h.degree() + 1;
    let nh = covariant_derivative(&h.to_full());
    SymTensorField::from_full(&nh.scale(k as f64))
}

/// Formal adjoint `D_S^* T = -sum_i (nabla_{E_i} T)(E_i, ...)`; summing over an
/// orthonormal frame equals contracting with the inverse metric.
pub fn d_s_star(t: &SymTensorField) -> Result<SymTensorField> {
    if t.degree() == 0 {
        return Err(LabError::parameter("D_S^* needs degree >= 1"));
    }
    let nt = covariant_derivative(&t.to_full());
    Ok(SymTensorField::from_full(&trace_first_pair(&nt)?.scale(-1.0)))
}

/// Rough (Bochner) Laplacian `nabla^* nabla T = -tr_12 nabla^2 T`.
pub fn bochner_laplacian(t: &SymTensorField) -> SymTensorField {
    let full = t.to_full();
    let nn = covariant_derivative(&covariant_derivative(&full));
    SymTensorField::from_full(&trace_first_pair(&nn).expect("degree >= 2").scale(-1.0))
}

/// Sampson Laplacian `D_S^* D_S - D_S D_S^*` (only the first term in degree 0).
pub fn sampson_laplacian(t: &SymTensorField) -> Result<SymTensorField> {
    check_degree(t)?;
    let first = d_s_star(&d_s(t))?;
    if t.degree() == 0 {
        return Ok(first);
    }
    let second = d_s(&d_s_star(t)?);
    let a = first.to_full();
    let b = second.to_full();
    Ok(SymTensorField::from_full(&a.sub(&b)?))
}

fn check_degree(t: &SymTensorField) -> Result<()> {
    if t.degree() > MAX_SYM_DEGREE {
        return Err(LabError::parameter(format!(
            "symmetric-tensor operators are limited to degree <= {MAX_SYM_DEGREE}, got {}",
            t.degree()
        )));
    }
    Ok(())
}

/// Weitzenboeck curvature action on a covariant k-tensor at one node:
/// `ric(T)_{a_1..a_k} = sum_i g^{bc} (R(d_c, d_{a_i}) T)_{a_1..b..a_k}` with
/// `(R(X, Y) T)(Z_1, ...) = -sum_l T(.., R(X, Y) Z_l, ..)`.
pub fn weitzenbock_at(mesh: &Mesh, node: usize, k: usize, t: &[f64]) -> Vec<f64> {
    let n = mesh.dim();
    let m = n.pow(k as u32);
    let up = mesh.riemann(node);
    let gi = mesh.inverse_metric(node);
    let r = |d: usize, c: usize, a: usize, b: usize| up[((d * n + c) * n + a) * n + b];
    let mut out = vec![0.0; m];
    for (flat, o) in out.iter_mut().enumerate() {
        let a = indices_of(flat, n, k);
        let mut acc = 0.0;
        for i in 0..k {
            for b in 0..n {
                for c in 0..n {
                    let w = gi[b * n + c];
                    if w == 0.0 {
                        continue;
                    }
                    let mut d = a.clone();
                    d[i] = b;
                    let mut s = 0.0;
                    for l in 0..k {
                        let mut e = d.clone();
                        for mm in 0..n {
                            e[l] = mm;
                            s += r(mm, d[l], c, a[i]) * t[index_of(&e, n)];
                        }
                    }
                    acc -= w * s;
                }
            }
        }
        *o = acc;
    }
    out
}

/// Weitzenboeck curvature action from the cached Riemann tensor.
pub fn weitzenbock_action(t: &SymTensorField) -> Result<SymTensorField> {
    check_degree(t)?;
    let full = t.to_full();
    let mesh = full.mesh().clone();
    let k = full.degree();
    let rows: Vec<Option<Vec<f64>>> = (0..mesh.len())
        .into_par_iter()
        .map(|node| {
            if !full.is_valid(node) {
                return None;
            }
            Some(weitzenbock_at(&mesh, node, k, full.at(node)))
        })
        .collect();
    Ok(SymTensorField::from_full(&assemble(&mesh, k, rows)))
}

/// Combinatorial constant in `<ric(T), T> >= alpha C_k |T|^2` for symmetric
/// k-tensors when the curvature operator is bounded below by `alpha <= 0`.
pub fn weitzenbock_constant(n: usize, k: usize) -> f64 {
    if k == 0 {
        return 0.0;
    }
    (k * (n + k - 2)) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discrete::norms::{l2_inner, lp_norm};
    use crate::geometry::{ChartSpec, Domain, MetricChart, ModelSpec, Warping};

    fn flat(step: f64) -> Arc<Mesh> {
        let chart = MetricChart::euclidean_box(vec![-1.0, -1.0], vec![1.0, 1.0]);
        Arc::new(Mesh::on_box(chart, &[-1.0, -1.0], &[1.0, 1.0], step).unwrap())
    }

    fn sphere(step: f64) -> Arc<Mesh> {
        let chart = MetricChart::from_spec(ChartSpec {
            model: ModelSpec::SphereStereographic { dim: 2 },
            domain: Domain::Box {
                lo: vec![-1.0, -1.0],
                hi: vec![1.0, 1.0],
            },
            exclusions: vec![],
            fd_step: None,
        })
        .unwrap();
        Arc::new(Mesh::on_box(chart, &[-1.0, -1.0], &[1.0, 1.0], step).unwrap())
    }

    fn bump(x: &[f64]) -> f64 {
        let r2 = x[0] * x[0] + x[1] * x[1];
        if r2 >= 0.64 {
            0.0
        } else {
            (-1.0 / (0.64 - r2) + 1.0 / 0.64).exp()
        }
    }

    #[test]
    fn constant_has_zero_derivative() {
        let u = TensorField::scalar(flat(0.1), |_| 3.0);
        let g = gradient(&u);
        assert!(g.data().iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn flat_hessian_of_product() {
        let u = TensorField::scalar(flat(0.1), |x| x[0] * x[1]);
        let h = hessian(&u);
        let node = h.mesh().lattice().node(&[10, 10]);
        let v = h.at(node);
        assert!(v[0].abs() < 1e-12 && v[3].abs() < 1e-12);
        assert!((v[1] - 1.0).abs() < 1e-12 && (v[2] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn polar_hyperbolic_laplacian_of_r_squared() {
        // u = r^2 on dr^2 + sinh^2 r dpsi^2: Delta u = 2 + 2 r coth r.
        let err_at = |step: f64| {
            let chart = MetricChart::from_spec(ChartSpec {
                model: ModelSpec::Warped {
                    warping: Warping::Sinh,
                    r0: None,
                },
                domain: Domain::Box {
                    lo: vec![0.5, 0.0],
                    hi: vec![1.5, 2.0 * std::f64::consts::PI],
                },
                exclusions: vec![],
                fd_step: None,
            })
            .unwrap();
            let lat = crate::discrete::Lattice::new(
                &[0.5, 0.0],
                &[1.5, 2.0 * std::f64::consts::PI],
                step,
                &[false, true],
            )
            .unwrap();
            let mesh = Arc::new(Mesh::new(chart, lat).unwrap());
            let u = TensorField::scalar(mesh.clone(), |x| x[0] * x[0]);
            let lap = laplacian(&u);
            let node = mesh.lattice().node(&[mesh.lattice().counts[0] / 2, 3]);
            let r = mesh.coords(node)[0];
            (lap.value(node) - (2.0 + 2.0 * r / r.tanh())).abs()
        };
        let (e1, e2) = (err_at(0.05), err_at(0.025));
        assert!(e1 < 1e-2);
        let order = (e1 / e2).log2();
        assert!(order > 1.8, "order {order}");
    }

    #[test]
    fn d_s_examples() {
        let mesh = flat(0.1);
        // h = x^1 e^1  ->  D_S h = 2 e^1 e^1
        let h = SymTensorField::from_full(&TensorField::sample(mesh.clone(), 1, |x| vec![x[0], 0.0]));
        let d = d_s(&h).to_full();
        let node = mesh.lattice().node(&[7, 12]);
        assert!((d.at(node)[0] - 2.0).abs() < 1e-12);
        assert!(d.at(node)[1].abs() < 1e-12 && d.at(node)[3].abs() < 1e-12);
        // T = x^1 e^1 e^1  ->  D_S^* T = -e^1
        let t = SymTensorField::from_full(&TensorField::sample(mesh.clone(), 2, |x| {
            vec![x[0], 0.0, 0.0, 0.0]
        }));
        let s = d_s_star(&t).unwrap().to_full();
        assert!((s.at(node)[0] + 1.0).abs() < 1e-12 && s.at(node)[1].abs() < 1e-12);
        // scalar: D_S h = dh
        let u = SymTensorField::from_full(&TensorField::scalar(mesh.clone(), |x| x[1] * x[1]));
        let du = d_s(&u).to_full();
        let y = mesh.coords(node)[1];
        assert!((du.at(node)[1] - 2.0 * y).abs() < 1e-12);
    }

    #[test]
    fn sphere_ricci_on_one_forms() {
        // On the unit sphere ric(w) = Ric(w) = w in dimension 2.
        let mesh = sphere(0.25);
        let node = mesh.lattice().node(&[3, 5]);
        let w = [0.3, -0.7];
        let r = weitzenbock_at(&mesh, node, 1, &w);
        assert!((r[0] - w[0]).abs() < 1e-10 && (r[1] - w[1]).abs() < 1e-10, "{r:?}");
    }

    #[test]
    fn flat_sampson_equals_bochner_for_constants() {
        let mesh = flat(0.1);
        let t = SymTensorField::from_full(&TensorField::sample(mesh, 2, |_| vec![1.0, 2.0, 2.0, -1.0]));
        let s = sampson_laplacian(&t).unwrap();
        let b = bochner_laplacian(&t);
        let w = weitzenbock_action(&t).unwrap();
        for out in [s, b, w] {
            assert!(out.data().iter().all(|v| v.abs() < 1e-10));
        }
    }

    #[test]
    fn integration_by_parts_on_sphere() {
        let mesh = sphere(1.0 / 32.0);
        let u = TensorField::scalar(mesh.clone(), |x| bump(x) * (1.0 + x[0]));
        let v = TensorField::scalar(mesh.clone(), |x| bump(x) * x[1].cos());
        let lhs = l2_inner(&laplacian(&u), &v).unwrap();
        let rhs = -l2_inner(&gradient(&u), &gradient(&v)).unwrap();
        assert!((lhs - rhs).abs() < 1e-3 * rhs.abs().max(1e-3), "{lhs} vs {rhs}");
    }

    #[test]
    fn degree_cap() {
        let mesh = flat(0.5);
        let t = SymTensorField::from_full(&TensorField::zeros(mesh, 4));
        assert!(matches!(sampson_laplacian(&t), Err(LabError::Parameter(_))));
    }

    #[test]
    fn symmetrization_is_norm_nonincreasing() {
        let mesh = flat(0.5);
        let t = TensorField::sample(mesh.clone(), 3, |x| {
            (0..8).map(|i| ((i + 1) as f64 * (x[0] + 2.0 * x[1])).sin()).collect()
        });
        let s = symmetrize(&t);
        let s2 = SymTensorField::from_full(&s.to_full());
        for node in 0..mesh.len() {
            assert!(s.norm_at(node) <= t.norm_at(node) + 1e-12);
        }
        for (a, b) in s.data().iter().zip(s2.data()) {
            assert!((a - b).abs() <= 1e-15 * a.abs().max(1.0));
        }
        assert!(lp_norm(&s.to_full(), 2.0).unwrap() <= lp_norm(&t, 2.0).unwrap() + 1e-12);
    }
}
