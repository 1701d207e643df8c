use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{InequalityCheck, Provenance};
use crate::discrete::{gradient, laplacian, Mesh, TensorField};
use crate::error::{LabError, Result};
use crate::util::pairwise_sum;

/// Below this exponent the chained gradient estimate is not checked: its
/// `1/(p-1)` constant amplifies quadrature noise.
pub const CD_MIN_P: f64 = 1.05;

/// Power of the polynomial bump profile. The profile is C^5, enough for every
/// operator here including third derivatives, without the steep edge of the
/// `exp(-1/(1 - t^2))` bump that keeps affordable meshes out of the
/// asymptotic regime.
pub const BUMP_POWER: i32 = 6;

/// Nonnegative sum of bumps `a (1 - t^2)^6`, `t = |x - c|/rho`, in chart
/// coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BumpField {
    pub centers: Vec<Vec<f64>>,
    pub radii: Vec<f64>,
    pub amplitudes: Vec<f64>,
}

impl BumpField {
    pub fn single(center: Vec<f64>, radius: f64) -> Self {
        BumpField {
            centers: vec![center],
            radii: vec![radius],
            amplitudes: vec![1.0],
        }
    }

    /// One to three bumps with supports inside the coordinate disk of radius
    /// `support`, radii in `[0.35, 0.7] support`.
    pub fn random(seed: u64, dim: usize, support: f64) -> Self {
        let mut rng = crate::util::seeded_rng(seed);
        let count = rng.gen_range(1..=3);
        let mut f = BumpField {
            centers: vec![],
            radii: vec![],
            amplitudes: vec![],
        };
        for _ in 0..count {
            let rho = support * rng.gen_range(0.35..0.7);
            let reach = support - rho;
            // uniform direction, radius uniform in [0, reach)
            let mut dir: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let nd = crate::util::norm(&dir).max(1e-12);
            let len = reach * rng.gen_range(0.0..1.0);
            dir.iter_mut().for_each(|d| *d *= len / nd);
            f.centers.push(dir);
            f.radii.push(rho);
            f.amplitudes.push(rng.gen_range(0.5..2.0));
        }
        f
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut v = 0.0;
        for ((c, &rho), &a) in self.centers.iter().zip(&self.radii).zip(&self.amplitudes) {
            let t2 = crate::util::dist(x, c).powi(2) / (rho * rho);
            if t2 < 1.0 {
                v += a * (1.0 - t2).powi(BUMP_POWER);
            }
        }
        v
    }

    pub fn sample(&self, mesh: Arc<Mesh>) -> TensorField {
        TensorField::scalar(mesh, |x| self.eval(x))
    }
}

/// Sum of `integrand(node) * volume weight` over nodes where `keep` holds.
pub(crate) fn integral<F, K>(mesh: &Mesh, keep: K, integrand: F) -> f64
where
    F: Fn(usize) -> f64,
    K: Fn(usize) -> bool,
{
    let terms: Vec<f64> = (0..mesh.len())
        .map(|i| if keep(i) { integrand(i) * mesh.volume_weight(i) } else { 0.0 })
        .collect();
    pairwise_sum(&terms)
}

fn lp(mesh: &Mesh, keep: impl Fn(usize) -> bool, p: f64, v: impl Fn(usize) -> f64) -> f64 {
    integral(mesh, keep, |i| v(i).abs().powf(p)).powf(1.0 / p)
}

/// Outcome of the three regularity checks on one field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularityChecks {
    /// Local estimate on `B_R` against `B_r`.
    pub local: InequalityCheck,
    /// Global estimate for compactly supported fields.
    pub global: InequalityCheck,
    /// The two links of the chained gradient bound, for `CD_MIN_P <= p <= 2`.
    pub chained: Option<[InequalityCheck; 2]>,
    pub notes: Vec<String>,
}

impl RegularityChecks {
    pub fn all(&self) -> Vec<&InequalityCheck> {
        let mut v = vec![&self.local, &self.global];
        if let Some(c) = &self.chained {
            v.extend(c.iter());
        }
        v
    }

    pub fn pass(&self) -> bool {
        self.all().iter().all(|c| c.pass)
    }
}

/// Geodesic distance from the chart origin at every node.
fn radial_distances(mesh: &Mesh) -> Result<Vec<f64>> {
    (0..mesh.len())
        .map(|i| {
            mesh.chart()
                .distance_from_origin(&mesh.coords(i))
                .ok_or_else(|| LabError::parameter("chart has no distance from its origin"))
        })
        .collect()
}

/// Measure the regularity estimates for `f` with balls about the chart origin.
/// The global and chained checks assume `f` vanishes near the edge of the
/// region where its Laplacian is computed.
pub fn check_regularity_lemma(
    f: &TensorField,
    p: f64,
    radius: f64,
    outer: f64,
    tolerance: f64,
    field_id: &str,
) -> Result<RegularityChecks> {
    if !(p > 1.0) {
        return Err(LabError::parameter(format!(
            "regularity estimate needs p > 1, got {p}; use the p = 1 identities"
        )));
    }
    if !(0.0 < radius && radius < outer) {
        return Err(LabError::parameter("need 0 < R < r"));
    }
    if f.degree() != 0 {
        return Err(LabError::parameter("regularity checks take scalar fields"));
    }
    let mesh = f.mesh().clone();
    let dist = radial_distances(&mesh)?;
    let grad = gradient(f);
    let lap = laplacian(f);
    let region: Vec<bool> = (0..mesh.len()).map(|i| lap.is_valid(i) && grad.is_valid(i)).collect();

    let gnorm = |i: usize| grad.norm_at(i);
    // Differentiate the sampled |f|^{p/2} rather than expanding the chain
    // rule, whose |f|^{p-2} factor amplifies stencil error where f is tiny.
    let half = gradient(&f.map_scalar(|v| v.abs().powf(0.5 * p)));
    let region: Vec<bool> = (0..mesh.len()).map(|i| region[i] && half.is_valid(i)).collect();
    let in_ball = |i: usize, rr: f64| region[i] && dist[i] < rr;
    let half_grad2 = |i: usize| half.norm_at(i).powi(2);
    let prov = Provenance {
        step: mesh.lattice().step.iter().cloned().fold(0.0, f64::max),
        chart: format!("{:?}", mesh.chart().spec().model),
        field: field_id.to_string(),
    };

    let lhs_local = 4.0 * (p - 1.0) / (p * p) * integral(&mesh, |i| in_ball(i, radius), half_grad2);
    let f_r = lp(&mesh, |i| in_ball(i, outer), p, |i| f.value(i));
    let g_r = lp(&mesh, |i| in_ball(i, outer), p, gnorm);
    let l_r = lp(&mesh, |i| in_ball(i, outer), p, |i| lap.value(i));
    let rhs_local = f_r.powf(p - 1.0) * (g_r / (outer - radius) + l_r);
    let local = InequalityCheck::new("local_reg", lhs_local, rhs_local, tolerance, prov.clone());

    let all = |i: usize| region[i];
    let grad_half = integral(&mesh, all, half_grad2);
    let f_p = lp(&mesh, all, p, |i| f.value(i));
    let g_p = lp(&mesh, all, p, gnorm);
    let l_p = lp(&mesh, all, p, |i| lap.value(i));
    let rhs_global = p * p / (4.0 * (p - 1.0)) * f_p.powf(p - 1.0) * l_p;
    let global = InequalityCheck::new("global_reg", grad_half, rhs_global, tolerance, prov.clone());

    let mut notes = vec![];
    let chained = if p > 2.0 {
        notes.push(format!("chained gradient bound not applicable for p = {p} > 2"));
        None
    } else if p < CD_MIN_P {
        notes.push(format!("chained gradient bound skipped: p = {p} below guard {CD_MIN_P}"));
        None
    } else {
        let mid = 4.0 / (p * p) * f_p.powf(2.0 - p) * grad_half;
        Some([
            InequalityCheck::new("cd_gradient", g_p * g_p, mid, tolerance, prov.clone()),
            InequalityCheck::new("cd_laplacian", mid, f_p * l_p / (p - 1.0), tolerance, prov),
        ])
    };
    Ok(RegularityChecks {
        local,
        global,
        chained,
        notes,
    })
}

/// `|int |grad f|^2 + int f Delta f| / int |grad f|^2`, the discrete
/// integration-by-parts defect for a compactly supported field.
pub fn ibp_residual(f: &TensorField) -> Result<f64> {
    let mesh = f.mesh().clone();
    let grad = gradient(f);
    let lap = laplacian(f);
    let keep = |i: usize| lap.is_valid(i) && grad.is_valid(i);
    let g2 = integral(&mesh, keep, |i| grad.norm_at(i).powi(2));
    let fl = integral(&mesh, keep, |i| f.value(i) * lap.value(i));
    if g2 == 0.0 {
        return Ok(fl.abs());
    }
    Ok((g2 + fl).abs() / g2)
}

/// p = 1 checks and the behaviour of the left side in eps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct P1Result {
    pub checks: Vec<InequalityCheck>,
    /// Left sides in the order of the eps list.
    pub lhs: Vec<f64>,
    /// The left side is monotone (in either direction) along the eps list.
    pub lhs_monotone: bool,
}

/// `int eps |grad f|^2 / (f^2 + eps)^{3/2} <= int |Delta f|` for each eps.
pub fn check_p1_identities(
    f: &TensorField,
    eps_list: &[f64],
    tolerance: f64,
    field_id: &str,
) -> Result<P1Result> {
    if eps_list.iter().any(|&e| !(e > 0.0)) {
        return Err(LabError::parameter("eps values must be positive"));
    }
    let mesh = f.mesh().clone();
    let grad = gradient(f);
    let lap = laplacian(f);
    let keep = |i: usize| lap.is_valid(i) && grad.is_valid(i);
    let rhs = integral(&mesh, keep, |i| lap.value(i).abs());
    let prov = Provenance {
        step: mesh.lattice().step.iter().cloned().fold(0.0, f64::max),
        chart: format!("{:?}", mesh.chart().spec().model),
        field: field_id.to_string(),
    };
    let mut checks = vec![];
    let mut lhs = vec![];
    for &eps in eps_list {
        let l = integral(&mesh, keep, |i| {
            let v = f.value(i);
            eps * grad.norm_at(i).powi(2) / (v * v + eps).powf(1.5)
        });
        lhs.push(l);
        checks.push(InequalityCheck::new(
            &format!("p1_eps_{eps:e}"),
            l,
            rhs,
            tolerance,
            prov.clone(),
        ));
    }
    let up = lhs.windows(2).all(|w| w[1] >= w[0]);
    let down = lhs.windows(2).all(|w| w[1] <= w[0]);
    Ok(P1Result {
        checks,
        lhs,
        lhs_monotone: up || down,
    })
}
