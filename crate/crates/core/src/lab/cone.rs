//! Harmonic functions near the apex of a flat cone `dr^2 + c^2 r^2 dphi^2`,
//! `c = theta / 2 pi`, and the decay of their Dirichlet energy.
//!
//! Boundary data `cos(m phi)` at r = 1 (phi in [0, 2 pi)) separates: the
//! harmonic extension is `R(r) cos(m phi)` with
//! `(r R')' / r - nu^2 R / r^2 = 0`, `nu = m / c`, so the discrete Laplace
//! problem is a tridiagonal system in r.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::DecayCurve;
use crate::error::{LabError, Result};
use crate::report::{ExperimentReport, Table};
use crate::util::linear_fit;

/// Energy decay of the harmonic extension of one angular mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConeDecay {
    pub theta: f64,
    pub mode: u32,
    /// `2 pi m / theta`
    pub nu: f64,
    /// `avg_{B_{r/2}} |grad u|^2 / avg_{B_r} |grad u|^2` against r.
    pub energy_ratio: DecayCurve,
    /// Fitted exponent of the circle-averaged `|grad u|` near the apex.
    pub exponent: f64,
    pub report: ExperimentReport,
}

/// Window of radii for the exponent fit, as multiples of the outer radius.
const FIT_WINDOW: (f64, f64) = (0.02, 0.25);

/// Thomas algorithm; `a` sub-, `b` main, `c` super-diagonal.
fn tridiagonal(a: &[f64], b: &[f64], c: &[f64], d: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut cp = vec![0.0; n];
    let mut dp = vec![0.0; n];
    cp[0] = c[0] / b[0];
    dp[0] = d[0] / b[0];
    for i in 1..n {
        let den = b[i] - a[i] * cp[i - 1];
        cp[i] = c[i] / den;
        dp[i] = (d[i] - a[i] * dp[i - 1]) / den;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = dp[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = dp[i] - cp[i] * x[i + 1];
    }
    x
}

/// Radial profile on `r_i = i h`, i = 0..=cells, with `R(1) = 1` and
/// `R(0) = 0` (or a Neumann apex for the constant mode).
fn radial_solve(nu: f64, cells: usize) -> Vec<f64> {
    if nu == 0.0 {
        return vec![1.0; cells + 1];
    }
    let h = 1.0 / cells as f64;
    let m = cells - 1; // unknowns r_1 .. r_{cells-1}
    let (mut a, mut b, mut c, mut d) = (vec![0.0; m], vec![0.0; m], vec![0.0; m], vec![0.0; m]);
    for k in 0..m {
        let i = (k + 1) as f64;
        let r = i * h;
        // flux form (r_{i+1/2}(R_{i+1}-R_i) - r_{i-1/2}(R_i-R_{i-1})) / (r h^2)
        let lo = (i - 0.5) * h / (r * h * h);
        let hi = (i + 0.5) * h / (r * h * h);
        a[k] = lo;
        c[k] = hi;
        b[k] = -(lo + hi) - nu * nu / (r * r);
        if k + 1 == m {
            d[k] -= hi; // R(1) = 1
            c[k] = 0.0;
        }
    }
    let inner = tridiagonal(&a, &b, &c, &d);
    let mut out = Vec::with_capacity(cells + 1);
    out.push(0.0);
    out.extend(inner);
    out.push(1.0);
    out
}

/// Energy decay of the harmonic function with data `cos(m phi)` on the unit
/// circle of the cone of total angle `theta`, solved at `cells` radial steps.
///
/// `radii` are the outer radii r of the ratio `avg_{B_{r/2}}/avg_{B_r}`.
pub fn cone_energy_decay(theta: f64, mode: u32, radii: &[f64], cells: usize) -> Result<ConeDecay> {
    if !(theta > 0.0) {
        return Err(LabError::parameter(format!("cone angle {theta} must be > 0")));
    }
    if theta > 2.0 * PI * (1.0 + 1e-12) {
        return Err(LabError::domain(format!(
            "total angle {theta} exceeds 2 pi; only cones of nonnegative curvature are modeled"
        )));
    }
    if cells < 16 {
        return Err(LabError::parameter("at least 16 radial cells"));
    }
    if radii.is_empty() || radii.iter().any(|&r| !(r > 0.0 && r <= 1.0)) {
        return Err(LabError::parameter("radii must lie in (0, 1]"));
    }
    let c = theta / (2.0 * PI);
    let nu = mode as f64 / c;
    let h = 1.0 / cells as f64;
    let rr = radial_solve(nu, cells);

    // cell midpoints: |grad u|^2 averaged over the circle is (R'^2 + nu^2 R^2 / r^2) / 2
    let mid: Vec<(f64, f64)> = (0..cells)
        .map(|i| {
            let r = (i as f64 + 0.5) * h;
            let dr = (rr[i + 1] - rr[i]) / h;
            let v = 0.5 * (rr[i + 1] + rr[i]);
            (r, 0.5 * (dr * dr + nu * nu * v * v / (r * r)))
        })
        .collect();
    // E(rho) = 2 pi c int_0^rho avg|grad u|^2 r dr, at the nodes
    let mut energy = vec![0.0; cells + 1];
    for (i, &(r, g2)) in mid.iter().enumerate() {
        energy[i + 1] = energy[i] + 2.0 * PI * c * g2 * r * h;
    }
    let energy_at = |rho: f64| -> f64 {
        let x = rho / h;
        let i = (x.floor() as usize).min(cells - 1);
        let t = x - i as f64;
        energy[i] + t * (energy[i + 1] - energy[i])
    };

    let mut sorted = radii.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    let ratios: Vec<f64> = sorted
        .iter()
        .map(|&r| {
            let full = energy_at(r);
            if full == 0.0 {
                0.0
            } else {
                // averages over areas pi c r^2 and pi c r^2 / 4
                4.0 * energy_at(0.5 * r) / full
            }
        })
        .collect();

    let (lx, ly): (Vec<f64>, Vec<f64>) = mid
        .iter()
        .filter(|(r, g2)| *r >= FIT_WINDOW.0 && *r <= FIT_WINDOW.1 && *g2 > 0.0)
        .map(|(r, g2)| (r.ln(), 0.5 * g2.ln()))
        .unzip();
    let exponent = if lx.len() >= 2 { linear_fit(&lx, &ly).0 } else { 0.0 };

    let mut report = ExperimentReport::new(format!("cone_theta{theta:.6}_m{mode}"));
    report.metric("theta", theta);
    report.metric("nu", nu);
    report.metric("exponent", exponent);
    report.metric("expected_exponent", nu - 1.0);
    report.metric("expected_ratio", 2f64.powf(-2.0 * (nu - 1.0)));
    let mut t = Table::new("cone_energy", &["r", "ratio"]);
    for (r, q) in sorted.iter().zip(&ratios) {
        t.push(vec![*r, *q]);
    }
    report.tables.push(t);
    let mut prof = Table::new("cone_profile", &["r", "R"]);
    for (i, v) in rr.iter().enumerate() {
        prof.push(vec![i as f64 * h, *v]);
    }
    report.tables.push(prof);

    Ok(ConeDecay {
        theta,
        mode,
        nu,
        energy_ratio: DecayCurve::new(sorted, ratios)?,
        exponent,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tridiagonal_solves() {
        // [2 1 0; 1 2 1; 0 1 2] x = [4, 8, 8] -> x = [1, 2, 3]
        let x = tridiagonal(&[0.0, 1.0, 1.0], &[2.0, 2.0, 2.0], &[1.0, 1.0, 0.0], &[4.0, 8.0, 8.0]);
        for (a, b) in x.iter().zip([1.0, 2.0, 3.0]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn profile_matches_power_law() {
        // separation of variables: R = r^nu
        for nu in [1.0, 4.0 / 3.0, 2.0, 4.0] {
            let r = radial_solve(nu, 256);
            let err = r
                .iter()
                .enumerate()
                .map(|(i, v)| (v - (i as f64 / 256.0).powf(nu)).abs())
                .fold(0.0, f64::max);
            assert!(err < 2e-3, "nu = {nu}: {err}");
        }
    }

    #[test]
    fn flat_plane_has_no_decay() {
        let d = cone_energy_decay(2.0 * PI, 1, &[0.25, 0.5, 1.0], 256).unwrap();
        assert!(d.energy_ratio.values.iter().all(|&q| (q - 1.0).abs() < 0.02), "{:?}", d.energy_ratio);
        assert!(d.exponent.abs() < 0.02);
    }

    #[test]
    fn half_plane_cone_decays_by_quarter() {
        let d = cone_energy_decay(PI, 1, &[0.5, 1.0], 256).unwrap();
        assert!((d.exponent - 1.0).abs() < 0.05, "{}", d.exponent);
        for q in &d.energy_ratio.values {
            assert!((q - 0.25).abs() < 0.025, "{q}");
        }
    }

    #[test]
    fn rejects_angles_beyond_full_turn() {
        assert!(matches!(cone_energy_decay(7.0, 1, &[1.0], 64), Err(LabError::Domain(_))));
        assert!(cone_energy_decay(PI, 1, &[1.5], 64).is_err());
    }

    #[test]
    fn constant_mode_has_zero_energy() {
        let d = cone_energy_decay(PI, 0, &[0.5, 1.0], 64).unwrap();
        assert!(d.energy_ratio.values.iter().all(|&q| q == 0.0));
    }
}
