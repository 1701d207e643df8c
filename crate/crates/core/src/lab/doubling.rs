//! Volume doubling, reverse doubling and the Poincaré inequality on metric
//! balls of a chart, with balls taken in the shortest-path metric of the mesh
//! graph.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::discrete::{LatticeGraph, Mesh};
use crate::error::{LabError, Result};
use crate::geometry::{hyperbolic_ball_volume, Domain, MetricChart};
use crate::report::{ExperimentReport, Table};
use crate::util::{pairwise_sum, seeded_rng};

/// Bessel function `J_nu(x)` of integer order by its power series; accurate
/// for the moderate arguments used here.
fn bessel_j(nu: u32, x: f64) -> f64 {
    let half = 0.5 * x;
    let mut term = half.powi(nu as i32) / (1..=nu).map(f64::from).product::<f64>();
    let mut sum = term;
    for m in 1..80 {
        let m = m as f64;
        term *= -half * half / (m * (m + nu as f64));
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    sum
}

/// First positive zero of `J_1'`, the square root of the first nonzero
/// Neumann eigenvalue of the flat unit disk.
pub fn bessel_j1_prime_zero() -> f64 {
    // J_1' = (J_0 - J_2)/2 changes sign once on [1.5, 2.5]
    let d = |x: f64| 0.5 * (bessel_j(0, x) - bessel_j(2, x));
    let (mut a, mut b) = (1.5, 2.5);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if d(a) * d(m) <= 0.0 {
            b = m;
        } else {
            a = m;
        }
    }
    0.5 * (a + b)
}

/// Knobs of `doubling_and_poincare`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoublingOptions {
    pub step: f64,
    /// Neighbourhood reach of the mesh graph; larger is more isotropic.
    pub reach: i64,
    /// Random test fields per ball in the Poincaré search.
    pub random_fields: usize,
    /// Largest total degree of the polynomial Rayleigh-Ritz space.
    pub degree: usize,
    pub seed: u64,
    /// Relative slack for the reverse-doubling comparison.
    pub reverse_tolerance: f64,
}

impl Default for DoublingOptions {
    fn default() -> Self {
        DoublingOptions {
            step: 1.0 / 128.0,
            reach: 5,
            random_fields: 32,
            degree: 5,
            seed: 7,
            reverse_tolerance: 0.005,
        }
    }
}

struct Ball {
    /// (node, fractional membership)
    nodes: Vec<(usize, f64)>,
    volume: f64,
}

/// Nodes within graph distance r, with a linear ramp of one local node
/// spacing across the boundary so volumes converge smoothly.
fn ball(mesh: &Mesh, dist: &[f64], r: f64) -> Ball {
    let n = mesh.dim() as i32;
    let h = mesh.lattice().step.iter().copied().fold(0.0, f64::max);
    let mut nodes = Vec::new();
    for (i, &d) in dist.iter().enumerate() {
        if !d.is_finite() || !mesh.is_active(i) {
            continue;
        }
        let ell = h * mesh.sqrt_det(i).powf(1.0 / n as f64);
        let w = ((r - d) / ell + 0.5).clamp(0.0, 1.0);
        if w > 0.0 {
            nodes.push((i, w));
        }
    }
    let vols: Vec<f64> = nodes.iter().map(|&(i, w)| w * mesh.volume_weight(i)).collect();
    Ball {
        volume: pairwise_sum(&vols),
        nodes,
    }
}

/// A test field with its chart gradient, in coordinates relative to the
/// ball center and scaled by the radius.
trait TestField {
    fn eval(&self, y: &[f64]) -> (f64, Vec<f64>);
}

struct Monomial(Vec<usize>);

impl TestField for Monomial {
    fn eval(&self, y: &[f64]) -> (f64, Vec<f64>) {
        let v: f64 = y.iter().zip(&self.0).map(|(x, &e)| x.powi(e as i32)).product();
        let g = (0..y.len())
            .map(|a| {
                let e = self.0[a];
                if e == 0 {
                    return 0.0;
                }
                y.iter()
                    .zip(&self.0)
                    .enumerate()
                    .map(|(b, (x, &eb))| if b == a { eb as f64 * x.powi(eb as i32 - 1) } else { x.powi(eb as i32) })
                    .product()
            })
            .collect();
        (v, g)
    }
}

/// `sum_k a_k sin(w_k . y + phase_k)`
struct Waves {
    terms: Vec<(f64, Vec<f64>, f64)>,
}

impl TestField for Waves {
    fn eval(&self, y: &[f64]) -> (f64, Vec<f64>) {
        let mut v = 0.0;
        let mut g = vec![0.0; y.len()];
        for (a, w, ph) in &self.terms {
            let t: f64 = w.iter().zip(y).map(|(wi, yi)| wi * yi).sum::<f64>() + ph;
            v += a * t.sin();
            for (gi, wi) in g.iter_mut().zip(w) {
                *gi += a * wi * t.cos();
            }
        }
        (v, g)
    }
}

/// Coefficient field `sum c_j phi_j` over a basis.
struct Combination<'a> {
    basis: &'a [Monomial],
    coef: Vec<f64>,
}

impl TestField for Combination<'_> {
    fn eval(&self, y: &[f64]) -> (f64, Vec<f64>) {
        let mut v = 0.0;
        let mut g = vec![0.0; y.len()];
        for (b, c) in self.basis.iter().zip(&self.coef) {
            let (bv, bg) = b.eval(y);
            v += c * bv;
            for (gi, x) in g.iter_mut().zip(bg) {
                *gi += c * x;
            }
        }
        (v, g)
    }
}

fn monomials(n: usize, degree: usize) -> Vec<Monomial> {
    let mut out = Vec::new();
    let mut e = vec![0usize; n];
    loop {
        let d: usize = e.iter().sum();
        if d >= 1 && d <= degree {
            out.push(Monomial(e.clone()));
        }
        // odometer over [0, degree]^n
        let mut a = 0;
        loop {
            if a == n {
                return out;
            }
            e[a] += 1;
            if e[a] <= degree {
                break;
            }
            e[a] = 0;
            a += 1;
        }
    }
}

/// Per-node scaled coordinates, values and `|grad psi|` for a field on a ball.
fn sample(mesh: &Mesh, b: &Ball, center: &[f64], r: f64, f: &dyn TestField) -> (Vec<f64>, Vec<f64>) {
    let n = mesh.dim();
    let mut vals = Vec::with_capacity(b.nodes.len());
    let mut grads = Vec::with_capacity(b.nodes.len());
    for &(i, _) in &b.nodes {
        let x = mesh.coords(i);
        let y: Vec<f64> = x.iter().zip(center).map(|(a, c)| (a - c) / r).collect();
        let (v, gy) = f.eval(&y);
        // chain rule d/dx = (1/r) d/dy
        let gx: Vec<f64> = gy.iter().map(|g| g / r).collect();
        let gi = mesh.inverse_metric(i);
        let mut q = 0.0;
        for a in 0..n {
            for c in 0..n {
                q += gx[a] * gi[a * n + c] * gx[c];
            }
        }
        vals.push(v);
        grads.push(q.max(0.0).sqrt());
    }
    (vals, grads)
}

/// `||psi - mean||_{L^p(B)} / (r ||grad psi||_{L^p(B)})`.
fn poincare_ratio(mesh: &Mesh, b: &Ball, center: &[f64], r: f64, p: f64, f: &dyn TestField) -> f64 {
    let (vals, grads) = sample(mesh, b, center, r, f);
    let w: Vec<f64> = b.nodes.iter().map(|&(i, m)| m * mesh.volume_weight(i)).collect();
    let mean = pairwise_sum(&vals.iter().zip(&w).map(|(v, w)| v * w).collect::<Vec<_>>()) / b.volume;
    let num = pairwise_sum(&vals.iter().zip(&w).map(|(v, w)| w * (v - mean).abs().powf(p)).collect::<Vec<_>>());
    let den = pairwise_sum(&grads.iter().zip(&w).map(|(g, w)| w * g.powf(p)).collect::<Vec<_>>());
    if den <= 0.0 {
        return 0.0;
    }
    (num / den).powf(1.0 / p) / r
}

/// Best L^2 Poincaré ratio over polynomials of bounded degree, with the
/// maximizing coefficients: the top generalized eigenpair of
/// `(covariance, Dirichlet form)`.
fn rayleigh_ritz(mesh: &Mesh, b: &Ball, center: &[f64], r: f64, basis: &[Monomial]) -> Result<(f64, Vec<f64>)> {
    let n = mesh.dim();
    let m = basis.len();
    let w: Vec<f64> = b.nodes.iter().map(|&(i, mu)| mu * mesh.volume_weight(i)).collect();
    let mut vals: DMatrix<f64> = DMatrix::zeros(b.nodes.len(), m);
    let mut grads: Vec<DMatrix<f64>> = (0..n).map(|_| DMatrix::zeros(b.nodes.len(), m)).collect();
    for (k, &(i, _)) in b.nodes.iter().enumerate() {
        let x = mesh.coords(i);
        let y: Vec<f64> = x.iter().zip(center).map(|(a, c)| (a - c) / r).collect();
        for (j, mono) in basis.iter().enumerate() {
            let (v, g) = mono.eval(&y);
            vals[(k, j)] = v;
            for a in 0..n {
                grads[a][(k, j)] = g[a] / r;
            }
        }
    }
    // center the values
    for j in 0..m {
        let mean: f64 = (0..w.len()).map(|k| w[k] * vals[(k, j)]).sum::<f64>() / b.volume;
        for k in 0..w.len() {
            vals[(k, j)] -= mean;
        }
    }
    let mut cov: DMatrix<f64> = DMatrix::zeros(m, m);
    let mut dir: DMatrix<f64> = DMatrix::zeros(m, m);
    for (k, &(i, _)) in b.nodes.iter().enumerate() {
        let gi = mesh.inverse_metric(i);
        for s in 0..m {
            for t in s..m {
                cov[(s, t)] += w[k] * vals[(k, s)] * vals[(k, t)];
                let mut q = 0.0;
                for a in 0..n {
                    for c in 0..n {
                        q += grads[a][(k, s)] * gi[a * n + c] * grads[c][(k, t)];
                    }
                }
                dir[(s, t)] += w[k] * q;
            }
        }
    }
    for s in 0..m {
        for t in 0..s {
            cov[(s, t)] = cov[(t, s)];
            dir[(s, t)] = dir[(t, s)];
        }
    }
    let chol = nalgebra::Cholesky::new(dir)
        .ok_or_else(|| LabError::numerical("Dirichlet matrix of the polynomial space is singular", f64::INFINITY))?;
    let l = chol.l();
    let linv = l
        .clone()
        .try_inverse()
        .ok_or_else(|| LabError::numerical("singular Cholesky factor", f64::INFINITY))?;
    let c: DMatrix<f64> = &linv * cov * linv.transpose();
    let c = (&c + c.transpose()) * 0.5;
    let eig = c.symmetric_eigen();
    let (top, &mu) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("nonempty basis");
    let z = eig.eigenvectors.column(top).into_owned();
    let coef = linv.transpose() * z;
    Ok((mu.max(0.0).sqrt() / r, coef.iter().copied().collect()))
}

/// Doubling ratios `vol(B_2r)/vol(B_r)`, reverse doubling against the
/// hyperbolic comparison `V_{-1}(r)/V_{-1}(s)`, and empirical Poincaré
/// constants on balls about `center`.
///
/// Balls whose double leaves the chart are skipped for doubling with a note;
/// a ball of a listed radius leaving the chart is an error.
pub fn doubling_and_poincare(
    chart: &MetricChart,
    center: &[f64],
    radii: &[f64],
    p: f64,
    opts: &DoublingOptions,
) -> Result<ExperimentReport> {
    if !(p >= 1.0) {
        return Err(LabError::parameter(format!("p = {p} must be >= 1")));
    }
    if radii.is_empty() || radii.iter().any(|&r| !(r > 0.0)) {
        return Err(LabError::parameter("radii must be positive and nonempty"));
    }
    let (lo, hi) = match chart.domain() {
        Domain::Box { lo, hi } => (lo.clone(), hi.clone()),
        _ => return Err(LabError::parameter("doubling needs a box chart")),
    };
    let mesh = Mesh::on_box(chart.clone(), &lo, &hi, opts.step)?;
    let lat = mesh.lattice().clone();
    let idx: Vec<usize> = (0..lat.dim())
        .map(|a| (((center[a] - lat.lo[a]) / lat.step[a]).round().max(0.0) as usize).min(lat.counts[a] - 1))
        .collect();
    let source = lat.node(&idx);
    let graph = LatticeGraph::from_mesh(&mesh, opts.reach);
    let dist = graph.distances(source)?;
    let z = mesh.coords(source);
    // graph distance to the nearest boundary node bounds the admissible radii
    let edge = (0..lat.len())
        .filter(|&i| {
            let m = lat.multi_index(i);
            (0..lat.dim()).any(|a| !lat.periodic[a] && (m[a] == 0 || m[a] + 1 == lat.counts[a]))
                || !mesh.is_active(i)
        })
        .map(|i| dist[i])
        .fold(f64::INFINITY, f64::min);
    let fits = |r: f64| r + opts.step <= edge;

    let n = chart.dim();
    let mut report = ExperimentReport::new("doubling_poincare");
    report.metric("p", p);
    report.metric("graph_reach", opts.reach as f64);
    report.metric("max_radius_in_chart", edge);

    let mut sorted = radii.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut balls = Vec::new();
    for &r in &sorted {
        if !fits(r) {
            return Err(LabError::domain(format!("ball of radius {r} escapes the chart (edge at {edge:.4})")));
        }
        balls.push(ball(&mesh, &dist, r));
    }

    let mut dbl = Table::new("doubling", &["r", "vol_r", "vol_2r", "ratio"]);
    let mut max_ratio: f64 = 0.0;
    let mut min_ratio = f64::INFINITY;
    for (&r, b) in sorted.iter().zip(&balls) {
        if !fits(2.0 * r) {
            report.note(format!("doubling at r = {r} skipped: B_2r leaves the chart"));
            continue;
        }
        let b2 = ball(&mesh, &dist, 2.0 * r);
        let q = b2.volume / b.volume;
        max_ratio = max_ratio.max(q);
        min_ratio = min_ratio.min(q);
        dbl.push(vec![r, b.volume, b2.volume, q]);
    }
    if !dbl.rows.is_empty() {
        report.metric("doubling_max", max_ratio);
        report.metric("doubling_min", min_ratio);
    }

    let mut rev = Table::new("reverse_doubling", &["r", "s", "vol_ratio", "hyperbolic_ratio", "power_ratio"]);
    let mut reverse_ok = true;
    let mut c_prime = f64::INFINITY;
    let mut worst_margin = f64::INFINITY;
    for i in 0..sorted.len() {
        for j in i + 1..sorted.len() {
            let (r, s) = (sorted[i], sorted[j]);
            let q = balls[i].volume / balls[j].volume;
            let vh = hyperbolic_ball_volume(n, r) / hyperbolic_ball_volume(n, s);
            let pow = (r / s).powi(n as i32);
            c_prime = c_prime.min(vh / pow);
            worst_margin = worst_margin.min(q / vh - 1.0);
            reverse_ok &= q >= vh * (1.0 - opts.reverse_tolerance);
            rev.push(vec![r, s, q, vh, pow]);
        }
    }
    if !rev.rows.is_empty() {
        report.metric("reverse_doubling_constant", c_prime);
        report.metric("reverse_doubling_worst_margin", worst_margin);
    }
    report.flag("reverse_doubling", reverse_ok);

    let basis = monomials(n, opts.degree);
    let mut rng = seeded_rng(opts.seed);
    let mut pc = Table::new("poincare", &["r", "rayleigh_ritz", "random", "constant"]);
    let mut worst: f64 = 0.0;
    for (&r, b) in sorted.iter().zip(&balls) {
        let (rr, coef) = rayleigh_ritz(&mesh, b, &z, r, &basis)?;
        let best_poly = poincare_ratio(&mesh, b, &z, r, p, &Combination { basis: &basis, coef });
        let mut rnd: f64 = 0.0;
        for _ in 0..opts.random_fields {
            let terms = (0..3)
                .map(|_| {
                    let w: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
                    (rng.gen_range(-1.0..1.0), w, rng.gen_range(0.0..std::f64::consts::TAU))
                })
                .collect();
            rnd = rnd.max(poincare_ratio(&mesh, b, &z, r, p, &Waves { terms }));
        }
        let constant = if p == 2.0 { rr.max(rnd) } else { best_poly.max(rnd) };
        worst = worst.max(constant);
        pc.push(vec![r, rr, rnd, constant]);
    }
    report.metric("poincare_constant", worst);
    report.tables.extend([dbl, rev, pc]);
    Ok(report)
}
