use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::bump::SpikeBump;
use super::certify::{certify_local, ConcavityCertificate};
use super::{radial_hessian, Profile};
use crate::error::{LabError, Result};

/// Radius `2 - sqrt(3)` of the disk D carrying the base profile.
pub const DISK_RADIUS: f64 = 0.267_949_192_431_122_7;

const SQRT3: f64 = 1.732_050_807_568_877_2;

/// `sqrt(1 - |x|^2 - 2 sqrt(3) |x|)` on `0 < |x| <= 2 - sqrt(3)`.
pub fn base_profile(x: &[f64]) -> Result<f64> {
    let r = crate::util::norm(x);
    if r == 0.0 || r > DISK_RADIUS * (1.0 + 1e-12) {
        return Err(LabError::domain(format!(
            "base profile defined for 0 < |x| <= 2 - sqrt(3), got |x| = {r}"
        )));
    }
    Ok((1.0 - r * r - 2.0 * SQRT3 * r).max(0.0).sqrt())
}

/// The strictly concave base profile f, whose bigraph is the hypersurface M.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseProfile {
    dim: usize,
}

impl BaseProfile {
    pub fn new(dim: usize) -> Self {
        BaseProfile { dim }
    }

    /// `(F, F', F'')` as functions of rho = |x|.
    pub fn radial(rho: f64) -> Result<(f64, f64, f64)> {
        let f = base_profile(&[rho])?;
        if f == 0.0 {
            return Err(LabError::domain("base profile is not differentiable on the rim"));
        }
        let d1 = (-rho - SQRT3) / f;
        let d2 = (-1.0 - d1 * d1) / f;
        Ok((f, d1, d2))
    }
}

impl Profile for BaseProfile {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        base_profile(x)
    }

    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        let r = crate::util::norm(x);
        let (_, d1, _) = Self::radial(r)?;
        Ok(x.iter().map(|v| d1 * v / r).collect())
    }

    fn hessian(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let r = crate::util::norm(x);
        let (_, d1, d2) = Self::radial(r)?;
        Ok(radial_hessian(x, r, d2, d1 / r))
    }
}

/// `z = slope . x + offset`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineProfile {
    pub slope: Vec<f64>,
    pub offset: f64,
}

impl AffineProfile {
    pub fn new(slope: Vec<f64>, offset: f64) -> Self {
        AffineProfile { slope, offset }
    }
}

impl Profile for AffineProfile {
    fn dim(&self) -> usize {
        self.slope.len()
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        Ok(self.offset + self.slope.iter().zip(x).map(|(a, b)| a * b).sum::<f64>())
    }

    fn gradient(&self, _x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.slope.clone())
    }

    fn hessian(&self, _x: &[f64]) -> Result<DMatrix<f64>> {
        let n = self.slope.len();
        Ok(DMatrix::zeros(n, n))
    }
}

/// The region `r_in < |x| < r_out` where spikes may live.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Annulus {
    pub r_in: f64,
    pub r_out: f64,
}

impl Annulus {
    pub fn new(r_in: f64, r_out: f64) -> Result<Self> {
        if !(0.0 <= r_in && r_in < r_out && r_out <= DISK_RADIUS) {
            return Err(LabError::parameter(format!(
                "annulus needs 0 <= r_in < r_out <= 2 - sqrt(3), got [{r_in}, {r_out}]"
            )));
        }
        Ok(Annulus { r_in, r_out })
    }

    /// The annulus between consecutive exhaustion radii `1/(j+8)` and
    /// `1/(j+7)` (the outermost one reaches the rim of D).
    pub fn exhaustion_shell(j: usize) -> Result<Self> {
        if j == 0 {
            return Err(LabError::parameter("shell index starts at 1"));
        }
        let r_in = 1.0 / (j as f64 + 8.0);
        let r_out = if j == 1 {
            DISK_RADIUS
        } else {
            1.0 / (j as f64 + 7.0)
        };
        Annulus::new(r_in, r_out)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        let r = crate::util::norm(x);
        r > self.r_in && r < self.r_out
    }

    /// Distance from y to the annulus boundary (negative outside).
    pub fn boundary_distance(&self, y: &[f64]) -> f64 {
        let r = crate::util::norm(y);
        (r - self.r_in).min(self.r_out - r)
    }
}

/// How add_spike picks the starting amplitude.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum AmplitudeSchedule {
    /// Start at `eta_bar 2^{-k}` for the k-th bump (k from 0) and halve on failure.
    Geometric { eta_bar: f64 },
    /// Start every bump at `total / count`, halving on failure.
    Uniform { total: f64, count: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpikeOptions {
    pub schedule: AmplitudeSchedule,
    /// Apex smoothing radius as a fraction of eps (must be < 1/2; 0 keeps the apex sharp).
    pub delta_ratio: f64,
    /// Certification grid points per eps along each axis.
    pub grid_per_eps: usize,
    /// Amplitude floor below which the construction gives up.
    pub eta_floor: f64,
}

impl Default for SpikeOptions {
    fn default() -> Self {
        SpikeOptions {
            schedule: AmplitudeSchedule::Geometric { eta_bar: 0.05 },
            delta_ratio: 0.25,
            grid_per_eps: 24,
            eta_floor: 1e-12,
        }
    }
}

/// Record of one accepted add_spike call.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AddSpikeLog {
    pub eta: f64,
    pub attempts: usize,
    pub certificate: ConcavityCertificate,
}

/// Base profile plus a finite sequence of bumps living in an annulus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpikeProfile {
    pub dim: usize,
    pub annulus: Annulus,
    #[serde(default)]
    pub bumps: Vec<SpikeBump>,
}

impl SpikeProfile {
    pub fn new(dim: usize, annulus: Annulus) -> Self {
        SpikeProfile {
            dim,
            annulus,
            bumps: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        Annulus::new(self.annulus.r_in, self.annulus.r_out)?;
        for b in &self.bumps {
            b.validate()?;
            if b.center.len() != self.dim {
                return Err(LabError::parameter("bump center has the wrong dimension"));
            }
        }
        Ok(())
    }

    pub fn eta_sum(&self) -> f64 {
        self.bumps.iter().map(|b| b.eta).sum()
    }

    /// Sharp apices are punctures of the smooth locus.
    pub fn sharp_apices(&self) -> Vec<Vec<f64>> {
        self.bumps
            .iter()
            .filter(|b| b.delta == 0.0)
            .map(|b| b.center.clone())
            .collect()
    }

    /// Cone bound `1 - sqrt(3)|x|` minus the profile.
    pub fn confinement_margin(&self, x: &[f64]) -> Result<f64> {
        Ok(1.0 - SQRT3 * crate::util::norm(x) - self.value(x)?)
    }

    /// Default scale: half the distance from y to the annulus boundary and
    /// to every earlier center.
    pub fn default_eps(&self, y: &[f64]) -> f64 {
        let mut d = self.annulus.boundary_distance(y);
        for b in &self.bumps {
            d = d.min(crate::util::dist(y, &b.center));
        }
        0.5 * d
    }

    /// Append a bump centred at y with scale eps, choosing the amplitude by
    /// backtracking until the local concavity certificate and the cone
    /// confinement both pass.
    pub fn add_spike(&self, y: &[f64], eps: f64, opts: &SpikeOptions) -> Result<SpikeProfile> {
        self.add_spike_logged(y, eps, opts).map(|(p, _)| p)
    }

    pub fn add_spike_logged(
        &self,
        y: &[f64],
        eps: f64,
        opts: &SpikeOptions,
    ) -> Result<(SpikeProfile, AddSpikeLog)> {
        if y.len() != self.dim {
            return Err(LabError::parameter("spike center has the wrong dimension"));
        }
        if !(eps > 0.0) {
            return Err(LabError::parameter(format!("eps = {eps} must be > 0")));
        }
        if eps >= self.annulus.boundary_distance(y) {
            return Err(LabError::parameter(format!(
                "ball of radius {eps} about {y:?} is not compactly inside the annulus"
            )));
        }
        if let Some(b) = self.bumps.iter().find(|b| crate::util::dist(y, &b.center) <= eps) {
            return Err(LabError::parameter(format!(
                "ball of radius {eps} about {y:?} contains the earlier center {:?}",
                b.center
            )));
        }
        if !(0.0..0.5).contains(&opts.delta_ratio) {
            return Err(LabError::parameter("delta_ratio must lie in [0, 1/2)"));
        }
        let k = self.bumps.len();
        let mut eta = match &opts.schedule {
            AmplitudeSchedule::Geometric { eta_bar } => eta_bar * 0.5f64.powi(k as i32),
            AmplitudeSchedule::Uniform { total, count } => total / (*count).max(1) as f64,
        };
        let mut attempts = 0;
        let mut last_failure = String::from("no attempt made");
        while eta >= opts.eta_floor {
            attempts += 1;
            let mut cand = self.clone();
            cand.bumps.push(SpikeBump {
                center: y.to_vec(),
                eps,
                eta,
                delta: opts.delta_ratio * eps,
            });
            let cert = certify_local(&cand, k, opts.grid_per_eps)?;
            if cert.valid {
                return Ok((
                    cand,
                    AddSpikeLog {
                        eta,
                        attempts,
                        certificate: cert,
                    },
                ));
            }
            last_failure = cert.failure_reason();
            eta *= 0.5;
        }
        Err(LabError::Construction(format!(
            "no amplitude above {} passed at {y:?} (eps = {eps}): {last_failure}",
            opts.eta_floor
        )))
    }

    /// Place `count` spikes at Halton points of the annulus (n = 2), skipping
    /// candidates whose default scale falls below `eps_min`.
    pub fn with_halton_spikes(
        &self,
        count: usize,
        eps_min: f64,
        opts: &SpikeOptions,
    ) -> Result<SpikeProfile> {
        if self.dim != 2 {
            return Err(LabError::parameter("Halton spike layout implemented for n = 2"));
        }
        let mut p = self.clone();
        let mut index = 1usize;
        let limit = 200 * (count + 1);
        while p.bumps.len() < self.bumps.len() + count {
            if index > limit {
                return Err(LabError::Construction(format!(
                    "only {} of {count} spike centers found with eps >= {eps_min}",
                    p.bumps.len() - self.bumps.len()
                )));
            }
            let (u, v) = (halton(index, 2), halton(index, 3));
            index += 1;
            let (a, b) = (self.annulus.r_in, self.annulus.r_out);
            let r = (a * a + u * (b * b - a * a)).sqrt();
            let th = 2.0 * std::f64::consts::PI * v;
            let y = [r * th.cos(), r * th.sin()];
            let eps = p.default_eps(&y);
            if eps < eps_min {
                continue;
            }
            p = p.add_spike(&y, eps, opts)?;
        }
        Ok(p)
    }

    /// Certification over the whole disk; see `certify_concavity`.
    pub fn certify(&self, step: f64) -> Result<ConcavityCertificate> {
        super::certify::certify_concavity(self, step)
    }
}

impl Profile for SpikeProfile {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        let mut v = base_profile(x)?;
        for b in &self.bumps {
            if b.eta != 0.0 {
                v += b.eta * super::bump::spike_bump(b, x)?;
            }
        }
        Ok(v)
    }

    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut g = BaseProfile::new(self.dim).gradient(x)?;
        for b in &self.bumps {
            if b.eta != 0.0 {
                let (_, bg, _) = b.unit_jet(x)?;
                for (gi, bi) in g.iter_mut().zip(bg) {
                    *gi += b.eta * bi;
                }
            }
        }
        Ok(g)
    }

    fn hessian(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let mut h = BaseProfile::new(self.dim).hessian(x)?;
        for b in &self.bumps {
            if b.eta != 0.0 {
                let (_, _, bh) = b.unit_jet(x)?;
                h += bh * b.eta;
            }
        }
        Ok(h)
    }
}

/// Radical-inverse (van der Corput) sequence in the given base.
pub fn halton(mut index: usize, base: usize) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while index > 0 {
        f /= base as f64;
        r += f * (index % base) as f64;
        index /= base;
    }
    r
}
