//! Execution of single operations into checks, tables and stored objects.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use sobolev_lab::cutoff::{verify_cutoff, CutoffFamily, ModelManifold};
use sobolev_lab::discrete::Mesh;
use sobolev_lab::geometry::volume::{cone_volume_quadrature, klein_radius};
use sobolev_lab::geometry::{
    cone_volume_oracle, curvature, hyperbolic_ball_volume, volume, ChartSpec, CurvatureOptions, Domain,
    MetricChart, ModelSpec, Region, VolumeOptions,
};
use sobolev_lab::lab::identities::bochner_study;
use sobolev_lab::lab::{
    adjointness_study, bessel_j1_prime_zero, check_p1_identities, check_regularity_lemma, cone_energy_decay,
    density_experiment, doubling_and_poincare, ibp_residual, sampson_study, spike_count_sweep, BumpField,
    DoublingOptions, RadialProfile,
};
use sobolev_lab::report::{ExperimentReport, Table};
use sobolev_lab::spike::{
    bigraph_obj, check_obj, AmplitudeSchedule, Annulus, Profile, SpikeOptions, SpikeProfile,
};
use sobolev_lab::util::seeded_rng;
use sobolev_lab::{LabError, Result};

use crate::config::{BoxChart, OpKind, Operation};

/// One measured quantity against its limit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    /// `"<="` or `">="`
    pub relation: String,
    pub limit: f64,
    pub pass: bool,
    pub enforce: bool,
}

/// Object kinds kept in the output store.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectKind {
    Report,
    Curve,
    Profile,
    Family,
    Chart,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredObject {
    pub id: String,
    pub kind: ObjectKind,
    pub data: Value,
}

/// Everything an operation produced. `error` is set when the module failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpOutput {
    pub id: String,
    pub op: String,
    pub enforce: bool,
    pub checks: Vec<Check>,
    pub error: Option<String>,
    pub tables: Vec<Table>,
    #[serde(skip)]
    pub objects: Vec<StoredObject>,
    #[serde(skip)]
    pub files: Vec<(String, String)>,
}

impl OpOutput {
    pub fn passed(&self) -> bool {
        self.error.is_none() && self.checks.iter().all(|c| c.pass || !c.enforce)
    }
}

struct Ctx {
    enforce: bool,
    scale: f64,
    checks: Vec<Check>,
}

impl Ctx {
    fn at_most(&mut self, name: impl Into<String>, value: f64, limit: f64) {
        self.push(name.into(), value, "<=", limit, value <= limit);
    }

    fn at_least(&mut self, name: impl Into<String>, value: f64, limit: f64) {
        self.push(name.into(), value, ">=", limit, value >= limit);
    }

    fn push(&mut self, name: String, value: f64, relation: &str, limit: f64, pass: bool) {
        self.checks.push(Check {
            name,
            value,
            relation: relation.into(),
            limit,
            pass,
            enforce: self.enforce,
        });
    }

    fn tol(&self, t: f64) -> f64 {
        t * self.scale
    }
}

fn box_mesh(chart: &BoxChart, step: f64) -> Result<Arc<Mesh>> {
    let h = chart.half_width;
    sobolev_lab::lab::box_mesh(chart.model.clone(), &[-h, -h], &[h, h], step)
}

fn chart_of(model: ModelSpec, domain: Domain, fd_step: Option<f64>) -> Result<MetricChart> {
    MetricChart::from_spec(ChartSpec {
        model,
        domain,
        exclusions: vec![],
        fd_step,
    })
}

fn report_object(id: &str, report: &ExperimentReport) -> StoredObject {
    StoredObject {
        id: id.to_string(),
        kind: ObjectKind::Report,
        data: serde_json::to_value(report).expect("report serializes"),
    }
}

/// Run one operation. Module errors are captured in the output.
pub fn execute(op: &Operation, seed: u64, tolerance_scale: f64) -> OpOutput {
    let mut ctx = Ctx {
        enforce: op.enforce,
        scale: tolerance_scale,
        checks: vec![],
    };
    let mut out = OpOutput {
        id: op.id.clone(),
        op: op.kind.name().to_string(),
        enforce: op.enforce,
        checks: vec![],
        error: None,
        tables: vec![],
        objects: vec![],
        files: vec![],
    };
    if let Err(e) = run_kind(&op.kind, &op.id, seed, &mut ctx, &mut out) {
        out.error = Some(e.to_string());
    }
    out.checks = ctx.checks;
    out
}

fn run_kind(kind: &OpKind, id: &str, seed: u64, ctx: &mut Ctx, out: &mut OpOutput) -> Result<()> {
    match kind {
        OpKind::Regularity {
            chart,
            step,
            p,
            bumps,
            support,
            radius,
            outer,
            tolerance,
            ibp_tolerance,
        } => {
            let mesh = box_mesh(chart, *step)?;
            let mut t = Table::new("ratios", &["bump", "p", "local", "global", "cd_gradient", "cd_laplacian"]);
            for b in 0..*bumps {
                let f = BumpField::random(seed.wrapping_add(b as u64), 2, *support).sample(mesh.clone());
                for &pp in p {
                    let c = check_regularity_lemma(&f, pp, *radius, *outer, ctx.tol(*tolerance), &format!("bump{b}"))?;
                    let (g, l) = c.chained.as_ref().map_or((f64::NAN, f64::NAN), |[g, l]| (g.ratio, l.ratio));
                    t.push(vec![b as f64, pp, c.local.ratio, c.global.ratio, g, l]);
                    for k in c.all() {
                        ctx.at_most(format!("bump{b}_p{pp}_{}", k.name), k.ratio, 1.0 + k.tolerance);
                    }
                }
                if let (Some(tol), true) = (ibp_tolerance, p.contains(&2.0)) {
                    let r = ibp_residual(&f)?;
                    ctx.at_most(format!("bump{b}_integration_by_parts"), r, ctx.tol(*tol));
                }
            }
            out.tables.push(t);
        }
        OpKind::P1Identity {
            chart,
            step,
            eps,
            bumps,
            support,
            tolerance,
        } => {
            let mesh = box_mesh(chart, *step)?;
            let mut t = Table::new("lhs", &["bump", "eps", "lhs", "ratio"]);
            for b in 0..*bumps {
                let f = BumpField::random(seed.wrapping_add(b as u64), 2, *support).sample(mesh.clone());
                let r = check_p1_identities(&f, eps, ctx.tol(*tolerance), &format!("bump{b}"))?;
                for ((c, e), l) in r.checks.iter().zip(eps).zip(&r.lhs) {
                    t.push(vec![b as f64, *e, *l, c.ratio]);
                    ctx.at_most(format!("bump{b}_eps{e}"), c.ratio, 1.0 + c.tolerance);
                }
            }
            out.tables.push(t);
        }
        OpKind::Curvature {
            model,
            points,
            r_min,
            r_max,
            fd_step,
            expected,
            lower_bound,
            tolerance,
        } => {
            use rand::Rng;
            let chart = chart_of(model.clone(), Domain::Whole, *fd_step)?;
            let mut rng = seeded_rng(seed);
            let n = chart.dim();
            let opts = CurvatureOptions {
                seed,
                tolerance: ctx.tol(*tolerance),
                ..Default::default()
            };
            let mut t = Table::new("curvature", &["x", "y", "sectional_min", "sectional_max", "gauss_min", "residual"]);
            let (mut dev, mut gmin, mut resid) = (0.0f64, f64::INFINITY, 0.0f64);
            for _ in 0..*points {
                // uniform direction, radius uniform in [r_min, r_max]
                let mut x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let len = sobolev_lab::util::norm(&x).max(1e-12);
                let r = rng.gen_range(*r_min..=*r_max);
                x.iter_mut().for_each(|v| *v *= r / len);
                let c = curvature(&chart, &x, &opts)?;
                if let Some(e) = expected {
                    dev = dev.max((c.sectional_min - e).abs()).max((c.sectional_max - e).abs());
                }
                let g = c.gauss_sectional_min.unwrap_or(f64::NAN);
                gmin = gmin.min(g);
                resid = resid.max(c.gauss_equation_residual);
                let mut row = vec![x[0], x.get(1).copied().unwrap_or(0.0)];
                row.extend([c.sectional_min, c.sectional_max, g, c.gauss_equation_residual]);
                t.push(row);
            }
            if expected.is_some() {
                ctx.at_most("max_deviation_from_expected", dev, ctx.tol(*tolerance));
            }
            if let Some(lb) = lower_bound {
                ctx.push("gauss_sectional_min".into(), gmin, ">", *lb, gmin > *lb);
            }
            if matches!(model, ModelSpec::Graph { .. }) {
                ctx.at_most("gauss_equation_residual", resid, ctx.tol(*tolerance));
            }
            out.tables.push(t);
            out.objects.push(StoredObject {
                id: format!("{id}.chart"),
                kind: ObjectKind::Chart,
                data: serde_json::to_value(chart.spec()).expect("spec serializes"),
            });
        }
        OpKind::HyperbolicBallVolume { rho, tolerance } => {
            let chart = chart_of(ModelSpec::KleinBall { dim: 2 }, Domain::Whole, None)?;
            let mut t = Table::new("volume", &["rho", "numeric", "exact", "relative_error"]);
            for &r in rho {
                let v = volume(
                    &chart,
                    &Region::Ball {
                        center: vec![0.0, 0.0],
                        radius: klein_radius(r),
                    },
                    &VolumeOptions::default(),
                )?;
                let exact = hyperbolic_ball_volume(2, r);
                let rel = (v.value - exact).abs() / exact;
                t.push(vec![r, v.value, exact, rel]);
                ctx.at_most(format!("rho{r}_relative_error"), rel, ctx.tol(*tolerance));
            }
            out.tables.push(t);
        }
        OpKind::ConeVolume { tolerance } => {
            let numeric = cone_volume_quadrature(2, 80.0, 40000)?;
            let closed = cone_volume_oracle(2)?;
            let mut t = Table::new("volume", &["numeric", "closed_form", "relative_error"]);
            let rel = (numeric - closed).abs() / closed;
            t.push(vec![numeric, closed, rel]);
            ctx.at_most("relative_error", rel, ctx.tol(*tolerance));
            out.tables.push(t);
        }
        OpKind::Identities {
            steps,
            bochner_order,
            sampson_order,
            adjoint_order,
        } => {
            let mut t = Table::new("defects", &["step", "bochner", "sampson", "adjoint"]);
            let b = bochner_study(steps)?;
            let s = sampson_study(steps)?;
            let a = adjointness_study(steps)?;
            for (i, h) in steps.iter().enumerate() {
                t.push(vec![*h, b.errors[i], s.errors[i], a.errors[i]]);
            }
            ctx.at_least("bochner_order", b.order, *bochner_order);
            ctx.at_least("sampson_order", s.order, *sampson_order);
            ctx.at_least("adjoint_order", a.order, *adjoint_order);
            out.tables.push(t);
        }
        OpKind::Cutoff {
            k,
            order,
            sweep,
            max_spread,
        } => {
            let family = CutoffFamily::new(*k)?;
            let model = ModelManifold::hyperbolic(2);
            let rep = verify_cutoff(&family, &model, sweep, *order)?;
            for (key, v) in &rep.metrics {
                if key.starts_with("spread_") {
                    ctx.at_most(key.clone(), *v, max_spread * ctx.scale);
                }
            }
            ctx.push("ricci_hypothesis".into(), 1.0, "==", 1.0, rep.flags["ricci_hypothesis"]);
            out.tables.extend(rep.tables.clone());
            out.objects.push(report_object(id, &rep));
            out.objects.push(StoredObject {
                id: format!("{id}.family"),
                kind: ObjectKind::Family,
                data: serde_json::to_value(&family).expect("family serializes"),
            });
        }
        OpKind::Density {
            family_k,
            k,
            p,
            rate,
            sweep,
            min_trend,
            max_final_ratio,
        } => {
            let family = CutoffFamily::new(*family_k)?;
            let model = ModelManifold::hyperbolic(2);
            let res = density_experiment(&model, &family, RadialProfile::Exponential { rate: *rate }, *k, *p, sweep)?;
            ctx.at_least("trend", res.total.trend, *min_trend);
            ctx.at_most("final_over_initial", res.total.final_over_initial(), max_final_ratio * ctx.scale);
            out.tables.extend(res.report.tables.clone());
            out.files.push((format!("{id}.curve.csv"), res.total.to_csv("norm")));
            out.objects.push(report_object(id, &res.report));
            out.objects.push(StoredObject {
                id: format!("{id}.curve"),
                kind: ObjectKind::Curve,
                data: serde_json::to_value(&res.total).expect("curve serializes"),
            });
        }
        OpKind::ConeDecay {
            theta,
            mode,
            radii,
            cells,
            exponent_tolerance,
            ratio_tolerance,
        } => {
            let d = cone_energy_decay(*theta, *mode, radii, *cells)?;
            let nu = 2.0 * PI * *mode as f64 / theta;
            let expect = nu - 1.0;
            let ratio = 2f64.powf(-2.0 * expect);
            let limit = ctx.tol(*exponent_tolerance) * expect.abs().max(1.0);
            ctx.at_most("exponent_error", (d.exponent - expect).abs(), limit);
            let worst = d.energy_ratio.values.iter().map(|q| (q - ratio).abs() / ratio).fold(0.0, f64::max);
            ctx.at_most("energy_ratio_relative_error", worst, ctx.tol(*ratio_tolerance));
            out.tables.extend(d.report.tables.clone());
            out.objects.push(report_object(id, &d.report));
            out.objects.push(StoredObject {
                id: format!("{id}.curve"),
                kind: ObjectKind::Curve,
                data: serde_json::to_value(&d.energy_ratio).expect("curve serializes"),
            });
        }
        OpKind::Doubling {
            chart,
            center,
            radii,
            p,
            step,
            random_fields,
            doubling,
            doubling_tolerance,
            neumann_tolerance,
            reverse_doubling,
        } => {
            let h = chart.half_width;
            let c = chart_of(
                chart.model.clone(),
                Domain::Box {
                    lo: vec![-h, -h],
                    hi: vec![h, h],
                },
                None,
            )?;
            let mut opts = DoublingOptions {
                step: *step,
                seed,
                ..Default::default()
            };
            if let Some(r) = random_fields {
                opts.random_fields = *r;
            }
            let rep = doubling_and_poincare(&c, center, radii, *p, &opts)?;
            if let (Some(d), Some(tol)) = (doubling, doubling_tolerance) {
                let dev = (rep.metrics["doubling_max"] - d).abs().max((rep.metrics["doubling_min"] - d).abs());
                ctx.at_most("doubling_deviation", dev / d, ctx.tol(*tol));
            }
            if let Some(tol) = neumann_tolerance {
                let constant = rep
                    .table("poincare")
                    .and_then(|t| t.column("constant"))
                    .and_then(|c| c.last().copied())
                    .unwrap_or(f64::NAN);
                let oracle = 1.0 / bessel_j1_prime_zero();
                ctx.at_most("neumann_relative_error", (constant - oracle).abs() / oracle, ctx.tol(*tol));
            }
            if *reverse_doubling {
                let ok = rep.flags.get("reverse_doubling").copied().unwrap_or(false);
                ctx.push("reverse_doubling".into(), rep.metrics["reverse_doubling_worst_margin"], ">=", 0.0, ok);
            }
            out.tables.extend(rep.tables.clone());
            out.objects.push(report_object(id, &rep));
        }
        OpKind::TransitionSweep {
            counts,
            total,
            r_in,
            r_out,
            delta_ratio,
            options,
            noise,
            min_gain,
        } => {
            let opts = options.clone().unwrap_or_default();
            let (rep, _) = spike_count_sweep(counts, *total, Annulus::new(*r_in, *r_out)?, *delta_ratio, &opts)?;
            let norms = rep.table("transition").and_then(|t| t.column("norm")).unwrap_or_default();
            let worst_drop = norms.windows(2).map(|w| (w[0] - w[1]) / w[0]).fold(f64::NEG_INFINITY, f64::max);
            ctx.at_most("worst_relative_drop", worst_drop, noise * ctx.scale);
            ctx.at_least("relative_gain", rep.metrics["relative_gain_last_over_first"], *min_gain);
            out.tables.extend(rep.tables.clone());
            out.objects.push(report_object(id, &rep));
        }
        OpKind::SpikeProfile {
            count,
            eps_min,
            eta_bar,
            delta_ratio,
            r_in,
            r_out,
            certify_step,
            obj_rings,
        } => {
            let opts = SpikeOptions {
                schedule: AmplitudeSchedule::Geometric { eta_bar: *eta_bar },
                delta_ratio: *delta_ratio,
                ..Default::default()
            };
            let mut profile = SpikeProfile::new(2, Annulus::new(*r_in, *r_out)?);
            if *count > 0 {
                profile = profile.with_halton_spikes(*count, *eps_min, &opts)?;
            }
            let cert = profile.certify(*certify_step)?;
            ctx.at_least("concavity_margin", cert.min_margin, 0.0);
            ctx.push("certificate_valid".into(), 1.0, "==", 1.0, cert.valid);
            let rings = obj_rings.unwrap_or(24);
            let obj = bigraph_obj(&profile as &dyn Profile, rings, 4 * rings)?;
            let stats = check_obj(&obj)?;
            ctx.push("obj_manifold".into(), 1.0, "==", 1.0, stats.is_manifold());
            let mut t = Table::new("bumps", &["x", "y", "eps", "eta", "delta"]);
            for b in &profile.bumps {
                t.push(vec![b.center[0], b.center[1], b.eps, b.eta, b.delta]);
            }
            out.tables.push(t);
            out.files.push((format!("{id}.obj"), obj));
            out.objects.push(StoredObject {
                id: format!("{id}.profile"),
                kind: ObjectKind::Profile,
                data: json!(profile),
            });
        }
    }
    Ok(())
}

/// Human-readable summary of a stored object.
pub fn describe(obj: &StoredObject) -> std::result::Result<String, LabError> {
    let bad = |e: serde_json::Error| LabError::parameter(format!("stored object {} is malformed: {e}", obj.id));
    Ok(match obj.kind {
        ObjectKind::Profile => {
            let p: SpikeProfile = serde_json::from_value(obj.data.clone()).map_err(bad)?;
            format!(
                "spike profile {}: dimension {}, annulus [{}, {}], {} bumps, eta sum {:e}",
                obj.id,
                p.dim,
                p.annulus.r_in,
                p.annulus.r_out,
                p.bumps.len(),
                p.eta_sum()
            )
        }
        ObjectKind::Curve => {
            let c: sobolev_lab::lab::DecayCurve = serde_json::from_value(obj.data.clone()).map_err(bad)?;
            format!(
                "decay curve {}: {} points on [{}, {}], trend {:.3}, final/initial {:e}",
                obj.id,
                c.grid.len(),
                c.grid.first().copied().unwrap_or(f64::NAN),
                c.grid.last().copied().unwrap_or(f64::NAN),
                c.trend,
                c.final_over_initial()
            )
        }
        ObjectKind::Family => {
            let f: CutoffFamily = serde_json::from_value(obj.data.clone()).map_err(bad)?;
            format!(
                "cut-off family {}: K = {}, threshold t0 = {}, smoothstep order {}",
                obj.id, f.lambda.k, f.lambda.t0, f.eta_order
            )
        }
        ObjectKind::Chart => {
            let c: ChartSpec = serde_json::from_value(obj.data.clone()).map_err(bad)?;
            format!("chart {}: {}", obj.id, serde_json::to_string(&c.model).expect("serializes"))
        }
        ObjectKind::Report => {
            let r: ExperimentReport = serde_json::from_value(obj.data.clone()).map_err(bad)?;
            let mut s = format!("report {} ({})\n", obj.id, r.name);
            for (k, v) in &r.metrics {
                s.push_str(&format!("  {k} = {v:e}\n"));
            }
            for (k, v) in &r.flags {
                s.push_str(&format!("  {k}: {}\n", if *v { "yes" } else { "no" }));
            }
            for t in &r.tables {
                s.push_str(&format!("  table {} ({} rows)\n", t.name, t.rows.len()));
            }
            for n in &r.notes {
                s.push_str(&format!("  note: {n}\n"));
            }
            s
        }
    })
}
