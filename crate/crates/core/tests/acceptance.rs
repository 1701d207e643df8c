//! Acceptance criteria, one PASS/FAIL line each. Run with
//! `cargo test -p sobolev-lab --test acceptance -- --nocapture`.

use std::f64::consts::PI;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::Rng;
use rayon::prelude::*;

use sobolev_lab::cutoff::{verify_cutoff, CutoffFamily, ModelManifold};
use sobolev_lab::discrete::Mesh;
use sobolev_lab::geometry::volume::{cone_volume_quadrature, klein_radius};
use sobolev_lab::geometry::{
    cone_volume_oracle, curvature, hyperbolic_ball_volume, riemann, volume, ChartSpec, CurvatureOptions, Domain,
    MetricChart, ModelSpec, Region, VolumeOptions,
};
use sobolev_lab::lab::identities::bochner_study;
use sobolev_lab::lab::{
    adjointness_study, bessel_j1_prime_zero, check_p1_identities, check_regularity_lemma, cone_energy_decay,
    density_experiment, doubling_and_poincare, ibp_residual, sampson_study, spike_count_sweep, BumpField,
    DoublingOptions, RadialProfile, TransitionOptions,
};
use sobolev_lab::spike::{Annulus, ProfileSpec, EXTENSION_KNOT};
use sobolev_lab::util::{norm, seeded_rng};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn chart(model: ModelSpec, domain: Domain) -> MetricChart {
    MetricChart::from_spec(ChartSpec {
        model,
        domain,
        exclusions: vec![],
        fd_step: None,
    })
    .unwrap()
}

fn boxed(model: ModelSpec, half: f64) -> MetricChart {
    chart(model, Domain::Box { lo: vec![-half; 2], hi: vec![half; 2] })
}

fn within(elapsed: Duration, minutes: f64) -> bool {
    elapsed.as_secs_f64() <= 60.0 * minutes
}

fn curvature_oracle() -> Outcome {
    let t = Instant::now();
    // Klein chart, closed-form metric derivatives
    let klein = chart(ModelSpec::KleinBall { dim: 2 }, Domain::Whole);
    let mut rng = seeded_rng(11);
    let mut klein_err: f64 = 0.0;
    for _ in 0..100 {
        let r: f64 = rng.gen_range(0.0..0.95);
        let a: f64 = rng.gen_range(0.0..2.0 * PI);
        let u: [f64; 2] = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        let v = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        if (u[0] * v[1] - u[1] * v[0]).abs() < 1e-2 {
            continue;
        }
        let k = riemann(&klein, &[r * a.cos(), r * a.sin()]).unwrap().sectional(&u, &v).unwrap();
        klein_err = klein_err.max((k + 1.0).abs());
    }

    // spiked bigraph: intrinsic (finite-difference) against Gauss equation on
    // the 1/256 lattice, off the conical apex and off the C^2 seams of the
    // spikes, where third derivatives of the profile jump
    let fd = 1e-5;
    let (spiked, _) = sobolev_lab::lab::spiked_chart(4, 0.02, Annulus::new(0.1, 0.22).unwrap(), 0.25).unwrap();
    let spiked = MetricChart::from_spec(ChartSpec {
        fd_step: Some(fd),
        ..spiked.spec().clone()
    })
    .unwrap();
    let bumps = match &spiked.spec().model {
        ModelSpec::Graph { profile: ProfileSpec::Spiked(p), .. } => p.bumps.clone(),
        _ => unreachable!(),
    };
    let near_seam = |x: &[f64]| {
        bumps.iter().any(|b| {
            let d = sobolev_lab::util::dist(x, &b.center);
            [b.delta, 0.5 * b.eps, EXTENSION_KNOT * b.eps, b.eps]
                .iter()
                .any(|&k| (d - k).abs() < 3.0 * fd)
        })
    };
    let h = 1.0 / 256.0;
    let m = (0.25 / h) as i64;
    let pts: Vec<[f64; 2]> = (-m..=m)
        .flat_map(|i| (-m..=m).map(move |j| [i as f64 * h, j as f64 * h]))
        .filter(|x| (0.02..=0.25).contains(&norm(x)) && !near_seam(x))
        .collect();
    let opts = CurvatureOptions { random_planes: 4, ..Default::default() };
    let reps: Vec<_> = pts.par_iter().map(|x| curvature(&spiked, x, &opts).unwrap()).collect();
    let gauss_min = reps.iter().filter_map(|r| r.gauss_sectional_min).fold(f64::INFINITY, f64::min);
    let resid = reps.iter().map(|r| r.gauss_equation_residual).fold(0.0, f64::max);
    let el = t.elapsed();
    outcome(
        klein_err <= 1e-6 && gauss_min > -1.0 && resid <= 1e-3 && within(el, 1.0),
        format!(
            "klein |K+1| max {klein_err:.2e}; bigraph Gauss K min {gauss_min:.4} over {} points; route residual {resid:.2e}; {:.1}s",
            pts.len(),
            el.as_secs_f64()
        ),
    )
}

fn volume_oracle() -> Outcome {
    let t = Instant::now();
    let numeric = cone_volume_quadrature(2, 80.0, 40000).unwrap();
    let closed = cone_volume_oracle(2).unwrap();
    let cone_err = (numeric - closed).abs() / closed;
    let klein = chart(ModelSpec::KleinBall { dim: 2 }, Domain::Whole);
    let mut ball_err: f64 = 0.0;
    for rho in [0.5, 1.0, 2.0] {
        let v = volume(
            &klein,
            &Region::Ball { center: vec![0.0, 0.0], radius: klein_radius(rho) },
            &VolumeOptions::default(),
        )
        .unwrap();
        let exact = hyperbolic_ball_volume(2, rho);
        ball_err = ball_err.max((v.value - exact).abs() / exact);
    }
    let el = t.elapsed();
    outcome(
        cone_err <= 0.01 && ball_err <= 0.005 && within(el, 1.0),
        format!(
            "cone K numeric {numeric:.6} vs closed form {closed:.6} (rel {cone_err:.3}); hyperbolic balls worst rel {ball_err:.2e}; {:.1}s",
            el.as_secs_f64()
        ),
    )
}

fn meshes(step: f64) -> [(Arc<Mesh>, f64, f64, f64); 2] {
    // (mesh, bump support, R, r) with R, r distances from the chart origin
    let flat = Arc::new(Mesh::on_box(boxed(ModelSpec::Euclidean { dim: 2 }, 1.0), &[-1.0; 2], &[1.0; 2], step).unwrap());
    let hyp = Arc::new(Mesh::on_box(boxed(ModelSpec::PoincareBall { dim: 2 }, 0.6), &[-0.6; 2], &[0.6; 2], step).unwrap());
    [(flat, 0.9, 0.4, 0.8), (hyp, 0.5, 0.6, 1.0)]
}

fn regularity_suite() -> Outcome {
    let t = Instant::now();
    let ms = meshes(1.0 / 128.0);
    let jobs: Vec<(usize, u64, f64)> = (0..2)
        .flat_map(|m| (0..10u64).flat_map(move |s| [1.2, 1.5, 2.0].map(|p| (m, s, p))))
        .collect();
    let results: Vec<(f64, Option<f64>)> = jobs
        .par_iter()
        .map(|&(m, seed, p)| {
            let (mesh, support, r_in, r_out) = &ms[m];
            let f = BumpField::random(seed, 2, *support).sample(mesh.clone());
            let c = check_regularity_lemma(&f, p, *r_in, *r_out, 0.05, &format!("bump{seed}")).unwrap();
            let worst = c.all().iter().map(|k| k.ratio).fold(0.0, f64::max);
            let ibp = (p == 2.0).then(|| ibp_residual(&f).unwrap());
            (worst, ibp)
        })
        .collect();
    let worst = results.iter().map(|r| r.0).fold(0.0, f64::max);
    let ibp = results.iter().filter_map(|r| r.1).fold(0.0, f64::max);
    let el = t.elapsed();
    outcome(
        worst <= 1.05 && ibp <= 1e-3 && within(el, 5.0),
        format!("{} checks, worst ratio {worst:.4}; p = 2 integration by parts {ibp:.2e}; {:.1}s", jobs.len(), el.as_secs_f64()),
    )
}

fn p1_identity() -> Outcome {
    let ms = meshes(1.0 / 128.0);
    let worst = (0..2)
        .flat_map(|m| (0..10u64).map(move |s| (m, s)))
        .collect::<Vec<_>>()
        .par_iter()
        .map(|&(m, seed)| {
            let f = BumpField::random(seed, 2, ms[m].1).sample(ms[m].0.clone());
            let r = check_p1_identities(&f, &[1e-1, 1e-2, 1e-3], 0.05, "bump").unwrap();
            r.checks.iter().map(|c| c.ratio).fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max);
    outcome(worst <= 1.05, format!("worst ratio {worst:.4} over 20 bumps and 3 eps"))
}

fn identity_residuals() -> Outcome {
    let steps = [1.0 / 64.0, 1.0 / 128.0, 1.0 / 256.0];
    let b = bochner_study(&steps).unwrap();
    let s = sampson_study(&steps).unwrap();
    let a = adjointness_study(&steps).unwrap();
    // smallest C with defect <= C step^2 on every step
    let c = a.errors.iter().zip(&steps).map(|(e, h)| e / (h * h)).fold(0.0, f64::max);
    outcome(
        b.order >= 1.0 && s.order >= 1.9 && a.order >= 1.9 && c.is_finite(),
        format!(
            "Bochner order {:.2}; Sampson order {:.2}; adjointness order {:.2}, defect <= {c:.4} step^2",
            b.order, s.order, a.order
        ),
    )
}

fn cutoff_suite() -> Outcome {
    let model = ModelManifold::hyperbolic(2);
    let fam = CutoffFamily::new(1).unwrap();
    let sweep = [10.0, 20.0, 30.0, 40.0];
    let r2 = verify_cutoff(&fam, &model, &sweep, 2).unwrap();
    let r3 = verify_cutoff(&fam, &model, &sweep, 3).unwrap();
    let keys = [
        ("spread_grad_lambda", &r2),
        ("spread_laplacian", &r2),
        ("spread_hess_lambda", &r3),
        ("spread_laplacian_of_gradient", &r3),
    ];
    let pass = keys.iter().all(|(k, r)| r.metrics[*k] <= 2.0);
    let detail = keys.iter().map(|(k, r)| format!("{k} {:.3}", r.metrics[*k])).collect::<Vec<_>>().join(", ");
    outcome(pass, detail)
}

fn density_decay() -> Outcome {
    let t = Instant::now();
    let model = ModelManifold::hyperbolic(2);
    let fam = CutoffFamily::new(1).unwrap();
    let sweep: Vec<f64> = (6..=14).map(f64::from).collect();
    let mut pass = true;
    let mut parts = vec![];
    for (k, p) in [(2, 1.2), (2, 2.0), (3, 2.0)] {
        let r = density_experiment(&model, &fam, RadialProfile::Exponential { rate: 1.0 }, k, p, &sweep).unwrap();
        let trend = r.report.metrics["trend"];
        let fin = r.report.metrics["final_over_initial"];
        pass &= trend >= 0.9 && fin <= 0.1;
        parts.push(format!("(k={k}, p={p}) trend {trend:.2} final/initial {fin:.2e}"));
    }
    let el = t.elapsed();
    outcome(pass && within(el, 10.0), format!("{}; {:.1}s", parts.join("; "), el.as_secs_f64()))
}

fn cone_decay() -> Outcome {
    let mut pass = true;
    let mut parts = vec![];
    for theta in [PI / 2.0, PI, 1.5 * PI] {
        let d = cone_energy_decay(theta, 1, &[0.25, 0.5, 1.0], 1024).unwrap();
        let expect = 2.0 * PI / theta - 1.0;
        let ratio = 2f64.powf(-2.0 * expect);
        let e_ok = (d.exponent - expect).abs() <= 0.05 * expect;
        let r_ok = d.energy_ratio.values.iter().all(|q| (q - ratio).abs() <= 0.1 * ratio);
        pass &= e_ok && r_ok;
        parts.push(format!("theta {theta:.3}: exponent {:.4} vs {expect:.4}", d.exponent));
    }
    let flat = cone_energy_decay(2.0 * PI, 1, &[0.25, 0.5, 1.0], 1024).unwrap();
    let min = flat.energy_ratio.values.iter().cloned().fold(f64::INFINITY, f64::min);
    pass &= min >= 0.95;
    parts.push(format!("full turn ratio min {min:.4}"));
    outcome(pass, parts.join("; "))
}

fn transition_probe() -> Outcome {
    let t = Instant::now();
    let (rep, _) = spike_count_sweep(
        &[0, 4, 8, 16],
        0.02,
        Annulus::new(0.1, 0.22).unwrap(),
        0.15,
        &TransitionOptions::default(),
    )
    .unwrap();
    let gain = rep.metrics["relative_gain_last_over_first"];
    let mono = rep.flags["nondecreasing_within_noise"];
    let norms = rep.table("transition").unwrap().column("norm").unwrap();
    let etas = rep.table("transition").unwrap().column("eta_sum").unwrap();
    let el = t.elapsed();
    outcome(
        mono && gain >= 0.2 && within(el, 15.0),
        format!(
            "norms {norms:.4?}, amplitude sums {etas:?}, gain {:.2}%, converged {}; {:.1}s",
            100.0 * gain,
            rep.flags["all_converged"],
            el.as_secs_f64()
        ),
    )
}

fn doubling_poincare() -> Outcome {
    let flat = boxed(ModelSpec::Euclidean { dim: 2 }, 1.2);
    let opts = DoublingOptions { step: 1.0 / 80.0, ..Default::default() };
    let rep = doubling_and_poincare(&flat, &[0.0, 0.0], &[0.25, 0.5], 2.0, &opts).unwrap();
    let dmax = rep.metrics["doubling_max"];
    let dmin = rep.metrics["doubling_min"];
    let unit = doubling_and_poincare(&flat, &[0.0, 0.0], &[1.0], 2.0, &opts).unwrap();
    let c = unit.table("poincare").unwrap().column("constant").unwrap()[0];
    let oracle = 1.0 / bessel_j1_prime_zero();
    let hyp = boxed(ModelSpec::PoincareBall { dim: 2 }, 0.8);
    let hrep = doubling_and_poincare(
        &hyp,
        &[0.0, 0.0],
        &[0.5, 1.0, 1.5],
        2.0,
        &DoublingOptions { step: 1.0 / 64.0, random_fields: 4, ..Default::default() },
    )
    .unwrap();
    let dbl = (dmax - 4.0).abs() <= 0.08 && (dmin - 4.0).abs() <= 0.08;
    let poin = (c - oracle).abs() <= 0.1 * oracle;
    outcome(
        dbl && poin && hrep.flags["reverse_doubling"],
        format!(
            "flat doubling [{dmin:.4}, {dmax:.4}]; unit-ball Poincare {c:.4} vs Neumann {oracle:.4}; hyperbolic reverse doubling {} (worst margin {:.2e})",
            hrep.flags["reverse_doubling"], hrep.metrics["reverse_doubling_worst_margin"]
        ),
    )
}

#[test]
fn acceptance() {
    type Criterion = (&'static str, fn() -> Outcome, bool);
    let criteria: [Criterion; 10] = [
        ("curvature oracle", curvature_oracle, true),
        ("volume oracle", volume_oracle, true),
        ("regularity lemma suite", regularity_suite, true),
        ("p = 1 identity", p1_identity, true),
        ("identity residuals", identity_residuals, true),
        ("cut-off suite", cutoff_suite, true),
        ("density decay", density_decay, true),
        ("cone decay", cone_decay, true),
        ("transition mechanism probe (exploratory)", transition_probe, false),
        ("doubling / Poincare", doubling_poincare, true),
    ];
    let mut failed = vec![];
    for (name, run, enforced) in criteria {
        let o = run();
        let tag = if o.pass { "PASS" } else { "FAIL" };
        let note = if enforced || o.pass { "" } else { " (recorded, not enforced)" };
        println!("{tag} {name}: {}{note}", o.detail);
        if enforced && !o.pass {
            failed.push(name);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
