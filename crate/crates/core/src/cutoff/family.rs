use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::jet::Jet3;
use super::lambda::LambdaSpec;
use super::model::ModelManifold;
use crate::discrete::{bochner_laplacian, gradient, hessian, symmetrize, Mesh, TensorField};
use crate::error::{LabError, Result};
use crate::geometry::{ChartSpec, Domain, MetricChart, ModelSpec};
use crate::report::{ExperimentReport, Table};

/// Reversed quintic smoothstep `eta(s) = 1 - (10 s^3 - 15 s^4 + 6 s^5)` on
/// [0, 1], equal to 1 before and 0 after. Returns `eta` and three derivatives.
pub fn eta(s: f64) -> [f64; 4] {
    if s <= 0.0 {
        return [1.0, 0.0, 0.0, 0.0];
    }
    if s >= 1.0 {
        return [0.0; 4];
    }
    let s2 = s * s;
    [
        1.0 - s2 * s * (10.0 - 15.0 * s + 6.0 * s2),
        -30.0 * s2 * (1.0 - s) * (1.0 - s),
        -60.0 * s * (1.0 - s) * (1.0 - 2.0 * s),
        -60.0 * (1.0 - 6.0 * s + 6.0 * s2),
    ]
}

/// `max |eta'|`, attained at s = 1/2.
pub const ETA_D1_MAX: f64 = 1.875;
/// `max |eta''| = 10/sqrt(3)`, attained at s = 1/2 -+ sqrt(3)/6.
pub const ETA_D2_MAX: f64 = 5.773_502_691_896_258;

/// Cut-off family `chi_R(r) = eta(A(r) - A(R))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutoffFamily {
    pub lambda: LambdaSpec,
    /// Order of the smoothstep; only 5 is implemented.
    pub eta_order: u32,
}

/// One member of the family.
#[derive(Debug, Clone, PartialEq)]
pub struct Cutoff {
    pub lambda: LambdaSpec,
    pub radius: f64,
    a_radius: f64,
    /// Radius where `A(r) = A(R) + 1`; the cut-off vanishes beyond it.
    pub outer: f64,
}

impl CutoffFamily {
    pub fn new(k: usize) -> Result<Self> {
        Ok(CutoffFamily {
            lambda: LambdaSpec::new(k)?,
            eta_order: 5,
        })
    }

    pub fn build_cutoff(&self, radius: f64) -> Result<Cutoff> {
        if self.eta_order != 5 {
            return Err(LabError::parameter("only the quintic smoothstep is implemented"));
        }
        if !(radius >= self.lambda.t0) {
            return Err(LabError::parameter(format!(
                "cut-off radius {radius} below threshold t0 = {}",
                self.lambda.t0
            )));
        }
        let a_radius = self.lambda.a(radius);
        let outer = self.lambda.a_inverse(a_radius + 1.0)?;
        Ok(Cutoff {
            lambda: self.lambda.clone(),
            radius,
            a_radius,
            outer,
        })
    }
}

impl Cutoff {
    /// `chi_R` and its first three r-derivatives.
    pub fn jet(&self, r: f64) -> Jet3 {
        if r <= self.radius {
            return Jet3::constant(1.0);
        }
        if r >= self.outer {
            return Jet3::constant(0.0);
        }
        let s = self.lambda.a(r) - self.a_radius;
        // s' = 1/lambda
        let inv = self.lambda.jet(r).recip();
        let sj = Jet3::new(s, inv.v, inv.d1, inv.d2);
        let [e0, e1, e2, e3] = eta(s);
        sj.compose(e0, e1, e2, e3)
    }

    pub fn value(&self, r: f64) -> f64 {
        self.jet(r).v
    }

    /// Radius at transition parameter `s = A(r) - A(R)` in [0, 1].
    pub fn radius_at(&self, s: f64) -> Result<f64> {
        self.lambda.a_inverse(self.a_radius + s)
    }

    /// Radial quantities of `chi_R` on a model.
    pub fn on_model(&self, model: &ModelManifold, r: f64) -> Result<RadialCutoff> {
        let j = self.jet(r);
        let lj = model.warping.log_jet(r)?;
        let k = lj.kappa();
        let m = (model.dim - 1) as f64;
        Ok(RadialCutoff {
            r,
            chi: j.v,
            grad: j.d1.abs(),
            laplacian: j.d2 + m * k * j.d1,
            hessian_norm: (j.d2 * j.d2 + m * (k * j.d1).powi(2)).sqrt(),
            laplacian_of_gradient: j.d3 + m * (k * j.d2 - k * k * j.d1),
            lambda: self.lambda.eval(r),
        })
    }
}

/// `chi`, `|grad chi|`, `Delta chi`, `|nabla^2 chi|` and the radial component of
/// the rough Laplacian of `d chi` at one radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialCutoff {
    pub r: f64,
    pub chi: f64,
    pub grad: f64,
    pub laplacian: f64,
    pub hessian_norm: f64,
    pub laplacian_of_gradient: f64,
    pub lambda: f64,
}

/// Number of sample points across the transition.
pub const SWEEP_SAMPLES: usize = 2001;

#[derive(Debug, Clone, Copy, Default)]
struct Sups {
    grad_lambda: f64,
    lap: f64,
    hess_lambda: f64,
    lap_grad: f64,
    bound: f64,
    inv_lambda2: f64,
    dlambda_over_lambda2: f64,
    delta_r_over_lambda: f64,
}

fn sweep_one(c: &Cutoff, model: &ModelManifold) -> Result<Sups> {
    let mut s = Sups::default();
    for i in 0..SWEEP_SAMPLES {
        let t = i as f64 / (SWEEP_SAMPLES - 1) as f64;
        let r = c.radius_at(t)?;
        let q = c.on_model(model, r)?;
        let lj = c.lambda.jet(r);
        s.grad_lambda = s.grad_lambda.max(q.grad * q.lambda);
        s.lap = s.lap.max(q.laplacian.abs());
        s.hess_lambda = s.hess_lambda.max(q.hessian_norm * q.lambda);
        s.lap_grad = s.lap_grad.max(q.laplacian_of_gradient.abs());
        s.inv_lambda2 = s.inv_lambda2.max(1.0 / (lj.v * lj.v));
        s.dlambda_over_lambda2 = s.dlambda_over_lambda2.max(lj.d1.abs() / (lj.v * lj.v));
        s.delta_r_over_lambda = s
            .delta_r_over_lambda
            .max(model.laplacian_of_distance(r)?.abs() / lj.v);
    }
    s.bound = ETA_D2_MAX * s.inv_lambda2 + ETA_D1_MAX * (s.dlambda_over_lambda2 + s.delta_r_over_lambda);
    Ok(s)
}

/// Discrete `|nabla^2 chi|` and radial `(Delta nabla chi)_r` at `r_star`,
/// computed with the mesh operators on a small box of the chart
/// `dr^2 + (phi(r)/phi(r_star))^2 dpsi^2` centred at `(r_star, 0)`.
pub fn discrete_probe(c: &Cutoff, model: &ModelManifold, r_star: f64, h: f64) -> Result<(f64, f64)> {
    if model.dim != 2 {
        return Err(LabError::parameter("discrete cut-off probe is implemented for n = 2"));
    }
    let half = 6.0 * h;
    let lo = vec![r_star - half, -half];
    let hi = vec![r_star + half, half];
    let spec = ChartSpec {
        model: ModelSpec::Warped {
            warping: model.warping.clone(),
            r0: Some(r_star),
        },
        domain: Domain::Box {
            lo: lo.clone(),
            hi: hi.clone(),
        },
        exclusions: vec![],
        fd_step: None,
    };
    let mesh = Arc::new(Mesh::on_box(MetricChart::from_spec(spec)?, &lo, &hi, h)?);
    let u = TensorField::scalar(mesh.clone(), |x| c.value(x[0]));
    let center = mesh.lattice().node(&[6, 6]);
    let hess = hessian(&u);
    let lap_grad = bochner_laplacian(&symmetrize(&gradient(&u)));
    if !hess.is_valid(center) || !lap_grad.valid()[center] {
        return Err(LabError::Mesh("probe centre flagged".into()));
    }
    Ok((hess.norm_at(center), -lap_grad.component(center, &[0])))
}

fn uniform(v: &[f64]) -> (bool, f64) {
    let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let ratio = if min > 0.0 { max / min } else if max == 0.0 { 1.0 } else { f64::INFINITY };
    (ratio <= 2.0, ratio)
}

/// Measure the cut-off bounds over a sweep of radii. `order` 2 checks
/// `|grad chi| lambda` and `|Delta chi|`; order 3 adds `|nabla^2 chi| lambda`,
/// `|Delta nabla chi|` and a discrete cross-check of both.
pub fn verify_cutoff(
    family: &CutoffFamily,
    model: &ModelManifold,
    sweep: &[f64],
    order: usize,
) -> Result<ExperimentReport> {
    if !(order == 2 || order == 3) {
        return Err(LabError::parameter(format!("cut-off order {order} not in {{2, 3}}")));
    }
    if sweep.is_empty() {
        return Err(LabError::parameter("empty radius sweep"));
    }
    let cutoffs: Vec<Cutoff> = sweep
        .iter()
        .map(|&r| family.build_cutoff(r))
        .collect::<Result<_>>()?;
    let sups: Vec<Sups> = cutoffs
        .par_iter()
        .map(|c| sweep_one(c, model))
        .collect::<Result<_>>()?;

    let mut rep = ExperimentReport::new("cutoff");
    let r_max = cutoffs.iter().map(|c| c.outer).fold(0.0, f64::max);
    let hyp = model.ricci_hypothesis(&family.lambda, r_max.max(10.0))?;
    rep.metric("ricci_constant", hyp.constant);
    rep.flag("ricci_hypothesis", hyp.holds);
    rep.metric("order", order as f64);

    let mut cols = vec!["R", "sup_grad_lambda", "sup_lap", "bound"];
    if order == 3 {
        cols.extend([
            "sup_hess_lambda",
            "sup_lap_grad",
            "probe_r",
            "probe_hess_rel_err",
            "probe_lap_grad_rel_err",
        ]);
    }
    let mut table = Table::new("sweep", &cols);
    let mut probe_worst: f64 = 0.0;
    for (c, s) in cutoffs.iter().zip(&sups) {
        let mut row = vec![c.radius, s.grad_lambda, s.lap, s.bound];
        if order == 3 {
            row.extend([s.hess_lambda, s.lap_grad]);
            if model.dim == 2 {
                let r_star = c.radius_at(0.5)?;
                let exact = c.on_model(model, r_star)?;
                let (dh, dl) = discrete_probe(c, model, r_star, 0.02)?;
                let eh = (dh - exact.hessian_norm).abs() / exact.hessian_norm.abs().max(1e-300);
                let el = (dl - exact.laplacian_of_gradient).abs()
                    / exact.laplacian_of_gradient.abs().max(1e-300);
                probe_worst = probe_worst.max(eh).max(el);
                row.extend([r_star, eh, el]);
            } else {
                row.extend([f64::NAN; 3]);
            }
        }
        table.push(row);
    }

    let col = |f: fn(&Sups) -> f64| sups.iter().map(f).collect::<Vec<_>>();
    let (ug, rg) = uniform(&col(|s| s.grad_lambda));
    let (ul, rl) = uniform(&col(|s| s.lap));
    rep.flag("uniform_grad_lambda", ug);
    rep.flag("uniform_laplacian", ul);
    rep.metric("spread_grad_lambda", rg);
    rep.metric("spread_laplacian", rl);
    rep.flag(
        "laplacian_below_bound",
        sups.iter().all(|s| s.lap <= s.bound * (1.0 + 1e-9)),
    );
    rep.metric("max_sup_laplacian", col(|s| s.lap).iter().cloned().fold(0.0, f64::max));
    rep.metric("max_bound", col(|s| s.bound).iter().cloned().fold(0.0, f64::max));
    if order == 3 {
        let (uh, rh) = uniform(&col(|s| s.hess_lambda));
        let (ulg, rlg) = uniform(&col(|s| s.lap_grad));
        rep.flag("uniform_hess_lambda", uh);
        rep.flag("uniform_laplacian_of_gradient", ulg);
        rep.metric("spread_hess_lambda", rh);
        rep.metric("spread_laplacian_of_gradient", rlg);
        if model.dim == 2 {
            rep.metric("probe_worst_rel_err", probe_worst);
            rep.flag("probe_agrees", probe_worst <= 1e-3);
        } else {
            rep.note("discrete probe skipped: only two-dimensional local charts are built");
        }
    }
    rep.tables.push(table);
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn family() -> CutoffFamily {
        CutoffFamily::new(1).unwrap()
    }

    #[test]
    fn eta_constants() {
        let mut m1: f64 = 0.0;
        let mut m2: f64 = 0.0;
        for i in 0..=100_000 {
            let e = eta(i as f64 / 100_000.0);
            m1 = m1.max(e[1].abs());
            m2 = m2.max(e[2].abs());
        }
        assert!((m1 - ETA_D1_MAX).abs() < 1e-9);
        assert!((m2 - ETA_D2_MAX).abs() < 1e-6);
        assert_eq!(eta(0.0)[0], 1.0);
        assert!(eta(1.0 - 1e-12)[0] < 1e-30);
    }

    #[test]
    fn equals_one_inside_and_zero_outside() {
        let c = family().build_cutoff(10.0).unwrap();
        for r in [0.0, 1.0, 5.0, 10.0] {
            assert_eq!(c.value(r), 1.0);
        }
        let a = c.lambda.a(c.outer);
        assert!((a - c.lambda.a(10.0) - 1.0).abs() < 1e-9);
        assert_eq!(c.value(c.outer * 1.0001), 0.0);
        for i in 0..200 {
            let r = 10.0 + (c.outer - 10.0) * i as f64 / 199.0;
            let v = c.value(r);
            assert!((0.0..=1.0).contains(&v));
        }
    }

    #[test]
    fn gradient_times_lambda_is_bounded() {
        let f = family();
        for radius in [4.0, 10.0, 100.0] {
            let c = f.build_cutoff(radius).unwrap();
            for i in 0..500 {
                let r = radius + (c.outer - radius) * i as f64 / 499.0;
                assert!(c.jet(r).d1.abs() * c.lambda.eval(r) <= ETA_D1_MAX * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn below_threshold_is_rejected() {
        let f = family();
        assert!(f.build_cutoff(f.lambda.t0 * 0.9).is_err());
        assert!(verify_cutoff(&f, &ModelManifold::hyperbolic(2), &[1.0], 2).is_err());
    }

    #[test]
    fn derivatives_match_differences() {
        let c = family().build_cutoff(10.0).unwrap();
        let r = c.radius_at(0.4).unwrap();
        let j = c.jet(r);
        let mut errs1 = vec![];
        let mut errs2 = vec![];
        let steps = [0.4, 0.2, 0.1];
        for &h in &steps {
            let (p, m) = (c.value(r + h), c.value(r - h));
            errs1.push(((p - m) / (2.0 * h) - j.d1).abs());
            errs2.push(((p - 2.0 * j.v + m) / (h * h) - j.d2).abs());
        }
        assert!(crate::util::convergence_order(&steps, &errs1) > 1.8);
        assert!(crate::util::convergence_order(&steps, &errs2) > 1.8);
    }

    #[test]
    fn third_derivative_matches_differences() {
        let c = family().build_cutoff(10.0).unwrap();
        let r = c.radius_at(0.3).unwrap();
        let h = 0.05;
        let d3 = (c.jet(r + h).d2 - c.jet(r - h).d2) / (2.0 * h);
        assert!((d3 - c.jet(r).d3).abs() < 1e-4 * c.jet(r).d3.abs());
    }

    #[test]
    fn monotone_in_radius() {
        let f = family();
        let (c1, c2) = (f.build_cutoff(8.0).unwrap(), f.build_cutoff(12.0).unwrap());
        for i in 0..400 {
            let r = 0.5 * i as f64;
            assert!(c1.value(r) <= c2.value(r) + 1e-15);
        }
    }

    #[test]
    fn single_radius_sweep_is_uniform() {
        let rep = verify_cutoff(&family(), &ModelManifold::hyperbolic(2), &[15.0], 2).unwrap();
        assert!(rep.flags["uniform_grad_lambda"] && rep.flags["uniform_laplacian"]);
        assert!(rep.flags["laplacian_below_bound"]);
    }

    #[test]
    fn gradient_bound_is_uniform_on_hyperbolic_plane() {
        let rep =
            verify_cutoff(&family(), &ModelManifold::hyperbolic(2), &[10.0, 20.0, 30.0, 40.0], 2)
                .unwrap();
        assert!(rep.flags["uniform_grad_lambda"]);
        assert!(rep.flags["laplacian_below_bound"]);
        assert!(rep.flags["ricci_hypothesis"]);
        // sup |grad chi| lambda is max|eta'| regardless of R.
        let t = rep.table("sweep").unwrap();
        for v in t.column("sup_grad_lambda").unwrap() {
            assert!((v - ETA_D1_MAX).abs() < 1e-6);
        }
    }

    #[test]
    fn flat_model_constants_are_smaller() {
        let f = family();
        let sweep = [10.0, 20.0];
        let h = verify_cutoff(&f, &ModelManifold::hyperbolic(2), &sweep, 2).unwrap();
        let e = verify_cutoff(&f, &ModelManifold::euclidean(2), &sweep, 2).unwrap();
        assert!(e.metrics["max_sup_laplacian"] < h.metrics["max_sup_laplacian"]);
        assert!(e.flags["laplacian_below_bound"]);
    }

    #[test]
    fn discrete_probe_agrees_with_closed_form() {
        let f = family();
        let m = ModelManifold::hyperbolic(2);
        let c = f.build_cutoff(10.0).unwrap();
        let r = c.radius_at(0.5).unwrap();
        let exact = c.on_model(&m, r).unwrap();
        let (dh, dl) = discrete_probe(&c, &m, r, 0.02).unwrap();
        assert!((dh - exact.hessian_norm).abs() < 1e-3 * exact.hessian_norm);
        assert!((dl - exact.laplacian_of_gradient).abs() < 1e-3 * exact.laplacian_of_gradient.abs());
    }
}
