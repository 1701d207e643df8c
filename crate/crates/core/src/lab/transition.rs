//! Cheapest `W^{2,p}` transition between two constants across an annulus.
//!
//! Fields equal `a` inside `|x| < t_in` and `b` outside `|x| > t_out`; the
//! values in between are free. The discrete norm
//! `||phi||_p + ||nabla phi||_p + ||nabla^2 phi||_p` is minimized with the
//! smooth surrogate `(|.|^2 + mu)^{p/2}` by L-BFGS with Armijo backtracking.

use std::collections::VecDeque;
use std::sync::Arc;

use nalgebra::DVector;
use nalgebra_sparse::{CooMatrix, CsrMatrix};
use serde::{Deserialize, Serialize};

use crate::discrete::{Lattice, Mesh};
use crate::error::{LabError, Result};
use crate::geometry::{AmbientKind, ChartSpec, Domain, MetricChart, ModelSpec};
use crate::report::{ExperimentReport, Table};
use crate::spike::{AmplitudeSchedule, Annulus, ProfileSpec, SpikeOptions, SpikeProfile};
use crate::util::pairwise_sum;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionOptions {
    pub p: f64,
    /// Value inside the inner band.
    pub a: f64,
    /// Value outside the outer band.
    pub b: f64,
    /// Mesh domain `rho_in <= |x| <= rho_out`.
    pub rho_in: f64,
    pub rho_out: f64,
    /// Free region `t_in <= |x| <= t_out`.
    pub t_in: f64,
    pub t_out: f64,
    pub step: f64,
    pub mu: f64,
    pub max_iter: usize,
    /// Converged once the gradient norm falls below `gtol` times its initial value.
    pub gtol: f64,
    pub memory: usize,
}

impl Default for TransitionOptions {
    fn default() -> Self {
        TransitionOptions {
            p: 4.0,
            a: -1.0,
            b: 1.0,
            rho_in: 0.06,
            rho_out: 0.25,
            t_in: 0.09,
            t_out: 0.23,
            step: 1.0 / 128.0,
            mu: 1e-8,
            max_iter: 2000,
            gtol: 1e-6,
            memory: 12,
        }
    }
}

impl TransitionOptions {
    fn validate(&self) -> Result<()> {
        if !(self.p > 1.0) {
            return Err(LabError::parameter(format!("p = {} must be > 1", self.p)));
        }
        if !(0.0 <= self.rho_in && self.rho_in < self.t_in && self.t_in < self.t_out && self.t_out < self.rho_out) {
            return Err(LabError::parameter(
                "need rho_in < t_in < t_out < rho_out for the bands and the free region",
            ));
        }
        if !(self.step > 0.0 && self.mu >= 0.0 && self.memory >= 1) {
            return Err(LabError::parameter("step > 0, mu >= 0 and memory >= 1 required"));
        }
        Ok(())
    }
}

/// Minimal norm and minimizer of one transition problem.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TransitionResult {
    /// Discrete `W^{2,p}` norm of the minimizer without the surrogate.
    pub norm: f64,
    /// Surrogate objective at the minimizer.
    pub surrogate: f64,
    /// `[||phi||_p, ||nabla phi||_p, ||nabla^2 phi||_p]`
    pub seminorms: [f64; 3],
    pub iterations: usize,
    pub gradient_ratio: f64,
    pub converged: bool,
    /// Set when the optimizer stopped early: the norm is then only an upper
    /// bound on the discrete minimum.
    pub upper_bound_only: bool,
    /// Volume of the quadrature region.
    pub volume: f64,
    /// Full nodal field; masked nodes carry NaN.
    pub field: Vec<f64>,
    pub lattice: Lattice,
}

/// Sparse covariant difference operators on the quadrature nodes.
struct Operators {
    n: usize,
    /// Centered first partials, one per axis.
    d: Vec<CsrMatrix<f64>>,
    /// Covariant Hessian components `D_i D_j - Gamma^k_ij D_k`, row-major (i, j).
    hess: Vec<CsrMatrix<f64>>,
    /// Quadrature weights (zero off the quadrature region).
    w: Vec<f64>,
    ginv: Vec<f64>,
}

fn centered_ok(mesh: &Mesh, ok: &[bool], node: usize) -> bool {
    ok[node]
        && (0..mesh.dim()).all(|a| {
            matches!(
                (mesh.lattice().shift(node, a, -1), mesh.lattice().shift(node, a, 1)),
                (Some(l), Some(r)) if ok[l] && ok[r]
            )
        })
}

impl Operators {
    fn build(mesh: &Mesh) -> Result<Self> {
        let n = mesh.dim();
        let len = mesh.len();
        let lat = mesh.lattice();
        let v1: Vec<bool> = (0..len).map(|i| centered_ok(mesh, mesh.active(), i)).collect();
        let v2: Vec<bool> = (0..len).map(|i| centered_ok(mesh, &v1, i)).collect();
        let mut d = Vec::with_capacity(n);
        for a in 0..n {
            let h = lat.step[a];
            let mut coo = CooMatrix::new(len, len);
            for i in 0..len {
                if v1[i] {
                    let l = lat.shift(i, a, -1).expect("checked");
                    let r = lat.shift(i, a, 1).expect("checked");
                    coo.push(i, r, 0.5 / h);
                    coo.push(i, l, -0.5 / h);
                }
            }
            d.push(CsrMatrix::from(&coo));
        }
        let mut hess = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let mut m = &d[i] * &d[j];
                // subtract Gamma^k_ij D_k row by row
                let mut corr = CooMatrix::new(len, len);
                for node in 0..len {
                    if !v2[node] {
                        continue;
                    }
                    let g = mesh.christoffel(node);
                    for k in 0..n {
                        let c = g[(k * n + i) * n + j];
                        if c == 0.0 {
                            continue;
                        }
                        let row = d[k].row(node);
                        for (&col, &v) in row.col_indices().iter().zip(row.values()) {
                            corr.push(node, col, -c * v);
                        }
                    }
                }
                m = &m + &CsrMatrix::from(&corr);
                hess.push(m);
            }
        }
        let w: Vec<f64> = (0..len).map(|i| if v2[i] { mesh.volume_weight(i) } else { 0.0 }).collect();
        if !w.iter().any(|&x| x > 0.0) {
            return Err(LabError::Mesh("no node carries a full second-order stencil".into()));
        }
        let mut ginv = vec![0.0; len * n * n];
        for i in 0..len {
            if v2[i] {
                ginv[i * n * n..(i + 1) * n * n].copy_from_slice(mesh.inverse_metric(i));
            }
        }
        Ok(Operators { n, d, hess, w, ginv })
    }

    /// `(I_0, I_1, I_2)` with `I_j = sum w (s_j + mu)^{p/2}` and, if asked, the
    /// gradient of `sum_j I_j^{1/p}` with respect to the nodal values.
    fn evaluate(&self, phi: &DVector<f64>, p: f64, mu: f64, grad: bool) -> ([f64; 3], Option<DVector<f64>>) {
        let n = self.n;
        let len = phi.len();
        let dphi: Vec<DVector<f64>> = self.d.iter().map(|m| m * phi).collect();
        let hphi: Vec<DVector<f64>> = self.hess.iter().map(|m| m * phi).collect();
        let mut terms = [vec![0.0; len], vec![0.0; len], vec![0.0; len]];
        // per-node factors w p (s + mu)^{p/2 - 1}
        let mut fac = [vec![0.0; len], vec![0.0; len], vec![0.0; len]];
        let mut up1 = vec![vec![0.0; len]; n];
        let mut up2 = vec![vec![0.0; len]; n * n];
        for i in 0..len {
            let w = self.w[i];
            if w == 0.0 {
                continue;
            }
            let gi = &self.ginv[i * n * n..(i + 1) * n * n];
            let s0 = phi[i] * phi[i];
            let mut s1 = 0.0;
            for a in 0..n {
                let mut u = 0.0;
                for b in 0..n {
                    u += gi[a * n + b] * dphi[b][i];
                }
                up1[a][i] = u;
                s1 += u * dphi[a][i];
            }
            let mut s2 = 0.0;
            for a in 0..n {
                for b in 0..n {
                    let mut g = 0.0;
                    for c in 0..n {
                        for e in 0..n {
                            g += gi[a * n + c] * gi[b * n + e] * hphi[c * n + e][i];
                        }
                    }
                    up2[a * n + b][i] = g;
                    s2 += g * hphi[a * n + b][i];
                }
            }
            for (j, s) in [s0, s1.max(0.0), s2.max(0.0)].into_iter().enumerate() {
                terms[j][i] = w * (s + mu).powf(0.5 * p);
                fac[j][i] = w * p * (s + mu).powf(0.5 * p - 1.0);
            }
        }
        let ints = [pairwise_sum(&terms[0]), pairwise_sum(&terms[1]), pairwise_sum(&terms[2])];
        if !grad {
            return (ints, None);
        }
        // d(I^{1/p}) = I^{1/p - 1} dI / p, and dI_j = sum fac_j s'_j / 2
        let scale: Vec<f64> = ints
            .iter()
            .map(|&v| if v > 0.0 { v.powf(1.0 / p - 1.0) / p } else { 0.0 })
            .collect();
        let mut g = DVector::zeros(len);
        for i in 0..len {
            g[i] += scale[0] * fac[0][i] * phi[i];
        }
        for a in 0..n {
            let v = DVector::from_iterator(len, (0..len).map(|i| scale[1] * fac[1][i] * up1[a][i]));
            g += self.d[a].transpose() * v;
        }
        for ab in 0..n * n {
            let v = DVector::from_iterator(len, (0..len).map(|i| scale[2] * fac[2][i] * up2[ab][i]));
            g += self.hess[ab].transpose() * v;
        }
        (ints, Some(g))
    }
}

/// Two-loop L-BFGS direction.
fn lbfgs_direction(g: &DVector<f64>, hist: &VecDeque<(DVector<f64>, DVector<f64>, f64)>) -> DVector<f64> {
    let mut q = g.clone();
    let mut alpha = Vec::with_capacity(hist.len());
    for (s, y, rho) in hist.iter().rev() {
        let a = rho * s.dot(&q);
        q -= y * a;
        alpha.push(a);
    }
    if let Some((s, y, _)) = hist.back() {
        q *= s.dot(y) / y.dot(y);
    }
    for ((s, y, rho), a) in hist.iter().zip(alpha.into_iter().rev()) {
        let b = rho * y.dot(&q);
        q += s * (a - b);
    }
    -q
}

/// Minimize the discrete transition norm on a chart whose domain contains the
/// annulus `rho_in <= |x| <= rho_out`.
pub fn transition_norm_minimization(chart: &MetricChart, opts: &TransitionOptions) -> Result<TransitionResult> {
    opts.validate()?;
    if chart.dim() != 2 {
        return Err(LabError::parameter("transition problems are set up for n = 2"));
    }
    let spec = ChartSpec {
        domain: Domain::Annulus {
            center: vec![0.0, 0.0],
            r_in: opts.rho_in,
            r_out: opts.rho_out,
        },
        ..chart.spec().clone()
    };
    let chart = MetricChart::with_model(spec, chart.model().clone())?;
    let r = opts.rho_out;
    let mesh = Arc::new(Mesh::on_box(chart, &[-r, -r], &[r, r], opts.step)?);
    crate::discrete::LatticeGraph::from_mesh(&mesh, 1).check_connected()?;
    let ops = Operators::build(&mesh)?;
    let len = mesh.len();
    let radius = |i: usize| crate::util::norm(&mesh.coords(i));

    // harmonic (log) interpolation between the bands as the starting field
    let start = |rho: f64| -> f64 {
        if rho <= opts.t_in {
            opts.a
        } else if rho >= opts.t_out {
            opts.b
        } else {
            let t = (rho / opts.t_in).ln() / (opts.t_out / opts.t_in).ln();
            opts.a + (opts.b - opts.a) * t
        }
    };
    let mut phi = DVector::from_iterator(len, (0..len).map(|i| if mesh.is_active(i) { start(radius(i)) } else { 0.0 }));
    let free: Vec<usize> = (0..len)
        .filter(|&i| mesh.is_active(i) && (opts.t_in..=opts.t_out).contains(&radius(i)))
        .collect();
    let objective = |ints: &[f64; 3]| ints.iter().map(|v| v.max(0.0).powf(1.0 / opts.p)).sum::<f64>();
    let restrict = |g: &DVector<f64>| DVector::from_iterator(free.len(), free.iter().map(|&i| g[i]));

    let (ints, g) = ops.evaluate(&phi, opts.p, opts.mu, true);
    let mut f = objective(&ints);
    let mut gx = restrict(&g.expect("gradient requested"));
    let g0 = gx.norm();
    let mut hist: VecDeque<(DVector<f64>, DVector<f64>, f64)> = VecDeque::new();
    let mut iterations = 0;
    let mut converged = g0 == 0.0 || free.is_empty();
    while !converged && iterations < opts.max_iter {
        iterations += 1;
        let mut dir = lbfgs_direction(&gx, &hist);
        let mut slope = gx.dot(&dir);
        if !(slope < 0.0) {
            hist.clear();
            dir = -gx.clone();
            slope = -gx.dot(&gx);
        }
        // Armijo backtracking
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let mut trial = phi.clone();
            for (k, &i) in free.iter().enumerate() {
                trial[i] += t * dir[k];
            }
            let (ti, _) = ops.evaluate(&trial, opts.p, opts.mu, false);
            let ft = objective(&ti);
            if ft.is_finite() && ft <= f + 1e-4 * t * slope {
                accepted = Some((trial, ft));
                break;
            }
            t *= 0.5;
        }
        let Some((trial, ft)) = accepted else { break };
        let (_, gn) = ops.evaluate(&trial, opts.p, opts.mu, true);
        let gnx = restrict(&gn.expect("gradient requested"));
        let s = &dir * t;
        let y = &gnx - &gx;
        let sy = s.dot(&y);
        if sy > 1e-300 {
            hist.push_back((s, y, 1.0 / sy));
            if hist.len() > opts.memory {
                hist.pop_front();
            }
        }
        phi = trial;
        let stalled = (f - ft).abs() <= 1e-15 * f.abs();
        f = ft;
        gx = gnx;
        converged = gx.norm() <= opts.gtol * g0;
        if stalled && !converged {
            break;
        }
    }

    let (surr_ints, _) = ops.evaluate(&phi, opts.p, opts.mu, false);
    let (exact, _) = ops.evaluate(&phi, opts.p, 0.0, false);
    let seminorms = exact.map(|v| v.max(0.0).powf(1.0 / opts.p));
    let field = (0..len).map(|i| if mesh.is_active(i) { phi[i] } else { f64::NAN }).collect();
    Ok(TransitionResult {
        norm: seminorms.iter().sum(),
        surrogate: objective(&surr_ints),
        seminorms,
        iterations,
        gradient_ratio: if g0 > 0.0 { gx.norm() / g0 } else { 0.0 },
        converged,
        upper_bound_only: !converged,
        volume: pairwise_sum(&ops.w),
        field,
        lattice: mesh.lattice().clone(),
    })
}

/// Upper sheet of the bigraph over the base profile with `count` spikes at
/// Halton points of `annulus`, all started at amplitude `total / count`.
/// Returns the chart and the amplitude sum actually accepted.
pub fn spiked_chart(count: usize, total: f64, annulus: Annulus, delta_ratio: f64) -> Result<(MetricChart, f64)> {
    let mut profile = SpikeProfile::new(2, annulus);
    if count > 0 {
        let opts = SpikeOptions {
            schedule: AmplitudeSchedule::Uniform { total, count },
            delta_ratio,
            ..Default::default()
        };
        profile = profile.with_halton_spikes(count, 1e-3, &opts)?;
    }
    let eta = profile.eta_sum();
    let chart = MetricChart::from_spec(ChartSpec {
        model: ModelSpec::Graph {
            ambient: AmbientKind::KleinBall,
            profile: ProfileSpec::Spiked(profile),
            side: 1,
            polar: false,
        },
        domain: Domain::Whole,
        exclusions: vec![],
        fd_step: Some(1e-5),
    })?;
    Ok((chart, eta))
}

/// Minimal transition norm against spike count, with fixed total amplitude.
pub fn spike_count_sweep(
    counts: &[usize],
    total: f64,
    annulus: Annulus,
    delta_ratio: f64,
    opts: &TransitionOptions,
) -> Result<(ExperimentReport, Vec<TransitionResult>)> {
    use rayon::prelude::*;
    let runs: Vec<(f64, TransitionResult)> = counts
        .par_iter()
        .map(|&c| {
            let (chart, eta) = spiked_chart(c, total, annulus, delta_ratio)?;
            Ok((eta, transition_norm_minimization(&chart, opts)?))
        })
        .collect::<Result<_>>()?;
    let mut report = ExperimentReport::new("transition_spike_sweep");
    let mut t = Table::new(
        "transition",
        &["spikes", "eta_sum", "norm", "l_p", "grad", "hess", "iterations", "gradient_ratio", "converged"],
    );
    for (&c, (eta, r)) in counts.iter().zip(&runs) {
        t.push(vec![
            c as f64,
            *eta,
            r.norm,
            r.seminorms[0],
            r.seminorms[1],
            r.seminorms[2],
            r.iterations as f64,
            r.gradient_ratio,
            if r.converged { 1.0 } else { 0.0 },
        ]);
    }
    let norms: Vec<f64> = runs.iter().map(|(_, r)| r.norm).collect();
    let nondecreasing = norms.windows(2).all(|w| w[1] >= 0.98 * w[0]);
    let gain = norms.last().copied().unwrap_or(0.0) / norms.first().copied().unwrap_or(1.0) - 1.0;
    report.metric("relative_gain_last_over_first", gain);
    report.flag("nondecreasing_within_noise", nondecreasing);
    report.flag("all_converged", runs.iter().all(|(_, r)| r.converged));
    if runs.iter().any(|(_, r)| r.upper_bound_only) {
        report.note("some runs stopped before the gradient tolerance; their norms are upper bounds");
    }
    report.tables.push(t);
    Ok((report, runs.into_iter().map(|(_, r)| r).collect()))
}
