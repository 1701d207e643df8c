use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::profile::{SpikeProfile, DISK_RADIUS};
use super::{max_eigenvalue, Profile};
use crate::error::{LabError, Result};

/// Radial concavity check through one bump apex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApexCheck {
    pub center: Vec<f64>,
    /// Largest directional second derivative seen along the sampled sections.
    pub max_second_derivative: f64,
    pub ok: bool,
}

/// Numerical concavity certificate for a profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcavityCertificate {
    pub step: f64,
    /// Minimum over the grid of `-(largest Hessian eigenvalue)`.
    pub min_margin: f64,
    pub grid_points: usize,
    pub skipped: usize,
    pub apex_checks: Vec<ApexCheck>,
    /// Minimum of `1 - sqrt(3)|x| - profile(x)` on the grid, for spike profiles.
    pub confinement_margin: Option<f64>,
    pub valid: bool,
}

impl ConcavityCertificate {
    pub fn skipped_fraction(&self) -> f64 {
        let total = self.grid_points + self.skipped;
        if total == 0 {
            0.0
        } else {
            self.skipped as f64 / total as f64
        }
    }

    pub fn failure_reason(&self) -> String {
        if self.valid {
            return "valid".into();
        }
        let mut why = Vec::new();
        if !(self.min_margin > 0.0) {
            why.push(format!("concavity margin {:.3e} <= 0", self.min_margin));
        }
        if self.apex_checks.iter().any(|a| !a.ok) {
            why.push("apex section not concave".to_string());
        }
        if let Some(m) = self.confinement_margin {
            if !(m > 0.0) {
                why.push(format!("cone confinement margin {m:.3e} <= 0"));
            }
        }
        if self.skipped_fraction() > 0.01 {
            why.push(format!("{:.2}% of grid points skipped", 100.0 * self.skipped_fraction()));
        }
        why.join("; ")
    }

    fn finish(mut self) -> Self {
        self.valid = self.min_margin > 0.0
            && self.apex_checks.iter().all(|a| a.ok)
            && self.confinement_margin.is_none_or(|m| m > 0.0)
            && self.skipped_fraction() <= 0.01
            && self.grid_points > 0;
        self
    }
}

struct GridStats {
    margin: f64,
    confinement: f64,
    points: usize,
    skipped: usize,
}

fn scan_grid<F, G>(
    lo: &[f64],
    counts: usize,
    step: f64,
    admit: F,
    skip: G,
    profile: &dyn Profile,
    confine: Option<&SpikeProfile>,
) -> Result<GridStats>
where
    F: Fn(&[f64]) -> bool + Sync,
    G: Fn(&[f64]) -> bool + Sync,
{
    let n = lo.len();
    let total = counts.pow(n as u32);
    let rows: Result<Vec<GridStats>> = (0..total)
        .into_par_iter()
        .map(|idx| {
            let mut rem = idx;
            let mut x = vec![0.0; n];
            for a in (0..n).rev() {
                x[a] = lo[a] + (rem % counts) as f64 * step;
                rem /= counts;
            }
            let mut st = GridStats {
                margin: f64::INFINITY,
                confinement: f64::INFINITY,
                points: 0,
                skipped: 0,
            };
            if !admit(&x) {
                return Ok(st);
            }
            if skip(&x) {
                st.skipped = 1;
                return Ok(st);
            }
            let h = profile.hessian(&x)?;
            st.margin = -max_eigenvalue(&h);
            if let Some(p) = confine {
                st.confinement = p.confinement_margin(&x)?;
            }
            st.points = 1;
            Ok(st)
        })
        .collect();
    let rows = rows?;
    Ok(rows.into_iter().fold(
        GridStats {
            margin: f64::INFINITY,
            confinement: f64::INFINITY,
            points: 0,
            skipped: 0,
        },
        |a, b| GridStats {
            margin: a.margin.min(b.margin),
            confinement: a.confinement.min(b.confinement),
            points: a.points + b.points,
            skipped: a.skipped + b.skipped,
        },
    ))
}

fn apex_check(profile: &dyn Profile, center: &[f64], reach: f64, samples: usize) -> Result<ApexCheck> {
    let n = center.len();
    let mut dirs: Vec<Vec<f64>> = Vec::new();
    for a in 0..n {
        let mut e = vec![0.0; n];
        e[a] = 1.0;
        dirs.push(e);
    }
    if n >= 2 {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let mut e = vec![0.0; n];
        e[0] = s;
        e[1] = s;
        dirs.push(e.clone());
        e[1] = -s;
        dirs.push(e);
    }
    let mut worst = f64::NEG_INFINITY;
    for e in &dirs {
        for i in 0..=samples {
            let t = -reach + 2.0 * reach * i as f64 / samples as f64;
            if t.abs() < 1e-12 * reach {
                continue;
            }
            let x: Vec<f64> = center.iter().zip(e).map(|(c, d)| c + t * d).collect();
            let h = profile.hessian(&x)?;
            let mut q = 0.0;
            for a in 0..n {
                for b in 0..n {
                    q += e[a] * h[(a, b)] * e[b];
                }
            }
            worst = worst.max(q);
        }
    }
    Ok(ApexCheck {
        center: center.to_vec(),
        max_second_derivative: worst,
        ok: worst < 0.0,
    })
}

/// Certificate of the spike profile inside `B_eps(y)` for bump `k`; outside that
/// ball the candidate coincides with its predecessor.
pub(crate) fn certify_local(
    profile: &SpikeProfile,
    k: usize,
    grid_per_eps: usize,
) -> Result<ConcavityCertificate> {
    let b = &profile.bumps[k];
    let step = b.eps / grid_per_eps.max(2) as f64;
    let lo: Vec<f64> = b.center.iter().map(|c| c - b.eps).collect();
    let counts = 2 * grid_per_eps.max(2) + 1;
    let center = b.center.clone();
    let eps = b.eps;
    let sharp = b.delta == 0.0;
    let st = scan_grid(
        &lo,
        counts,
        step,
        |x| crate::util::dist(x, &center) <= eps,
        |x| sharp && crate::util::dist(x, &center) < 1e-9 * eps,
        profile,
        Some(profile),
    )?;
    let apex = apex_check(profile, &b.center, b.eps, 8 * grid_per_eps.max(2))?;
    Ok(ConcavityCertificate {
        step,
        min_margin: st.margin,
        grid_points: st.points,
        skipped: st.skipped,
        apex_checks: vec![apex],
        confinement_margin: Some(st.confinement),
        valid: false,
    }
    .finish())
}

/// Certificate for a general profile over the punctured disk `0 < |x| < radius`
/// with the origin and the listed apices excluded within one grid step.
pub fn certify_profile(
    profile: &dyn Profile,
    radius: f64,
    step: f64,
    apices: &[(Vec<f64>, f64)],
) -> Result<ConcavityCertificate> {
    if !(step > 0.0) {
        return Err(LabError::parameter("certification step must be > 0"));
    }
    let n = profile.dim();
    let counts = (2.0 * radius / step).floor() as usize + 1;
    let lo = vec![-radius; n];
    let sharp: Vec<Vec<f64>> = apices
        .iter()
        .filter(|(_, d)| *d == 0.0)
        .map(|(c, _)| c.clone())
        .collect();
    let st = scan_grid(
        &lo,
        counts,
        step,
        |x| {
            let r = crate::util::norm(x);
            r < radius * (1.0 - 1e-9)
        },
        |x| {
            crate::util::norm(x) < step
                || sharp.iter().any(|c| crate::util::dist(x, c) < step)
        },
        profile,
        None,
    )?;
    let mut checks = Vec::new();
    for (c, reach) in apices {
        checks.push(apex_check(profile, c, *reach, 64)?);
    }
    Ok(ConcavityCertificate {
        step,
        min_margin: st.margin,
        grid_points: st.points,
        skipped: st.skipped,
        apex_checks: checks,
        confinement_margin: None,
        valid: false,
    }
    .finish())
}

/// Grid certificate of a spike profile over the whole punctured disk D,
/// including cone confinement and per-bump apex sections.
pub fn certify_concavity(profile: &SpikeProfile, step: f64) -> Result<ConcavityCertificate> {
    if let Some(b) = profile
        .bumps
        .iter()
        .find(|b| b.delta > 0.0 && step >= b.delta)
    {
        return Err(LabError::parameter(format!(
            "step {step} must be smaller than every smoothing radius (found {})",
            b.delta
        )));
    }
    let apices: Vec<(Vec<f64>, f64)> = profile
        .bumps
        .iter()
        .map(|b| (b.center.clone(), b.eps))
        .collect();
    let mut cert = certify_profile(profile, DISK_RADIUS, step, &apices)?;
    let n = profile.dim;
    let counts = (2.0 * DISK_RADIUS / step).floor() as usize + 1;
    let conf: Result<Vec<f64>> = (0..counts.pow(n as u32))
        .into_par_iter()
        .map(|idx| {
            let mut rem = idx;
            let mut x = vec![0.0; n];
            for a in (0..n).rev() {
                x[a] = -DISK_RADIUS + (rem % counts) as f64 * step;
                rem /= counts;
            }
            let r = crate::util::norm(&x);
            if r < step || r > DISK_RADIUS {
                return Ok(f64::INFINITY);
            }
            profile.confinement_margin(&x)
        })
        .collect();
    cert.confinement_margin = Some(conf?.into_iter().fold(f64::INFINITY, f64::min));
    Ok(cert.finish())
}
