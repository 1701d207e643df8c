use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

/// Radius where the fixed extension switches from the transition quintic to
/// the tail `4 (1 - s)^4`.
pub const EXTENSION_KNOT: f64 = 0.6;

// Quintic on [1/2, 0.6] in t = s - 1/2, matching (1/4, -2, -2) at t = 0 and the
// tail jets (0.1024, -1.024, 7.68) at t = 0.1.
const TRANSITION: [f64; 6] = [0.25, -2.0, -1.0, 202.0, -2096.0, 7000.0];

/// A rescaled bump `eta * g((x - y) / eps)` with apex smoothing radius delta.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpikeBump {
    pub center: Vec<f64>,
    pub eps: f64,
    pub eta: f64,
    /// Zero keeps the sharp apex.
    pub delta: f64,
}

impl SpikeBump {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0) {
            return Err(LabError::parameter(format!("bump scale {} must be > 0", self.eps)));
        }
        if self.eta < 0.0 {
            return Err(LabError::parameter(format!("bump amplitude {} < 0", self.eta)));
        }
        if self.delta < 0.0 || self.delta >= 0.5 * self.eps {
            return Err(LabError::parameter(format!(
                "smoothing radius {} must lie in [0, eps/2) with eps = {}",
                self.delta, self.eps
            )));
        }
        Ok(())
    }

    pub fn sigma(&self) -> f64 {
        self.delta / self.eps
    }

    /// Unit-amplitude bump value, gradient and Hessian at `x` (no eta factor).
    pub fn unit_jet(&self, x: &[f64]) -> Result<(f64, Vec<f64>, nalgebra::DMatrix<f64>)> {
        let n = x.len();
        let u: Vec<f64> = x
            .iter()
            .zip(&self.center)
            .map(|(a, b)| (a - b) / self.eps)
            .collect();
        let s = crate::util::norm(&u);
        if s >= 1.0 {
            return Ok((0.0, vec![0.0; n], nalgebra::DMatrix::zeros(n, n)));
        }
        let j = bump_radial(s, self.sigma())?;
        let grad = if s > 0.0 {
            u.iter().map(|v| j.d1 * v / s / self.eps).collect()
        } else {
            vec![0.0; n]
        };
        let e2 = self.eps * self.eps;
        let hess = super::radial_hessian(&u, s, j.d2 / e2, j.d1_over_s / e2);
        Ok((j.value, grad, hess))
    }
}

/// Radial profile of the unit bump and its derivatives in s = |u|.
#[derive(Debug, Clone, Copy)]
pub struct BumpJet {
    pub value: f64,
    pub d1: f64,
    /// `g'(s)/s`, finite at the smoothed apex.
    pub d1_over_s: f64,
    pub d2: f64,
}

/// Radial bump: apex quartic on `s < sigma`, core `1 - s - s^2` up to 1/2, a
/// transition quintic up to 0.6 and the tail `4 (1 - s)^4`, which vanishes to
/// third order at s = 1. All pieces meet with matching value and first two
/// derivatives.
pub fn bump_radial(s: f64, sigma: f64) -> Result<BumpJet> {
    if s >= 1.0 {
        return Ok(BumpJet {
            value: 0.0,
            d1: 0.0,
            d1_over_s: 0.0,
            d2: 0.0,
        });
    }
    if s < sigma {
        let c = 1.0 / (8.0 * sigma.powi(3));
        let b = -1.0 - 3.0 / (4.0 * sigma);
        let a = 1.0 - 3.0 * sigma / 8.0;
        let s2 = s * s;
        return Ok(BumpJet {
            value: a + b * s2 + c * s2 * s2,
            d1: 2.0 * b * s + 4.0 * c * s2 * s,
            d1_over_s: 2.0 * b + 4.0 * c * s2,
            d2: 2.0 * b + 12.0 * c * s2,
        });
    }
    if s == 0.0 {
        return Err(LabError::domain("sharp bump apex is not differentiable"));
    }
    let (value, d1, d2) = if s < 0.5 {
        (1.0 - s - s * s, -1.0 - 2.0 * s, -2.0)
    } else if s < EXTENSION_KNOT {
        let t = s - 0.5;
        let c = &TRANSITION;
        let v = c[0] + t * (c[1] + t * (c[2] + t * (c[3] + t * (c[4] + t * c[5]))));
        let d = c[1] + t * (2.0 * c[2] + t * (3.0 * c[3] + t * (4.0 * c[4] + t * 5.0 * c[5])));
        let dd = 2.0 * c[2] + t * (6.0 * c[3] + t * (12.0 * c[4] + t * 20.0 * c[5]));
        (v, d, dd)
    } else {
        let w = 1.0 - s;
        (4.0 * w.powi(4), -16.0 * w.powi(3), 48.0 * w * w)
    };
    Ok(BumpJet {
        value,
        d1,
        d1_over_s: d1 / s,
        d2,
    })
}

/// Unit-amplitude bump value `g((x - y)/eps)` with apex smoothing.
pub fn spike_bump(b: &SpikeBump, x: &[f64]) -> Result<f64> {
    b.validate()?;
    let u: Vec<f64> = x.iter().zip(&b.center).map(|(a, c)| (a - c) / b.eps).collect();
    let s = crate::util::norm(&u);
    if s == 0.0 && b.delta == 0.0 {
        return Ok(1.0);
    }
    Ok(bump_radial(s, b.sigma())?.value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bump(delta: f64) -> SpikeBump {
        SpikeBump {
            center: vec![0.1, 0.05],
            eps: 0.04,
            eta: 1.0,
            delta,
        }
    }

    #[test]
    fn sharp_apex_value() {
        assert_eq!(spike_bump(&bump(0.0), &[0.1, 0.05]).unwrap(), 1.0);
        // smoothed apex tends to 1 as delta -> 0
        let v = spike_bump(&bump(1e-6), &[0.1, 0.05]).unwrap();
        assert!((v - 1.0).abs() < 1e-4);
    }

    #[test]
    fn support() {
        assert_eq!(spike_bump(&bump(0.01), &[0.1 + 0.04, 0.05]).unwrap(), 0.0);
        assert_eq!(spike_bump(&bump(0.01), &[0.3, 0.3]).unwrap(), 0.0);
    }

    #[test]
    fn delta_too_large() {
        assert!(matches!(
            spike_bump(&bump(0.02), &[0.0, 0.0]),
            Err(LabError::Parameter(_))
        ));
    }

    fn jumps_at(s0: f64, sigma: f64) -> (f64, f64, f64) {
        let e = 1e-12;
        let a = bump_radial(s0 - e, sigma).unwrap();
        let b = bump_radial(s0 + e, sigma).unwrap();
        (
            (a.value - b.value).abs(),
            (a.d1 - b.d1).abs(),
            (a.d2 - b.d2).abs(),
        )
    }

    #[test]
    fn seams_are_c2() {
        let sigma = 0.2;
        for s0 in [sigma, 0.5, EXTENSION_KNOT, 1.0] {
            let (v, d, dd) = jumps_at(s0, sigma);
            assert!(v < 1e-10 && d < 1e-10 && dd < 1e-8, "seam {s0}: {v} {d} {dd}");
        }
    }

    #[test]
    fn quartic_matches_core_exactly() {
        let sigma = 0.13;
        let q = bump_radial(sigma - 1e-15, sigma).unwrap();
        let g = (1.0 - sigma - sigma * sigma, -1.0 - 2.0 * sigma, -2.0);
        assert!((q.value - g.0).abs() < 1e-10);
        assert!((q.d1 - g.1).abs() < 1e-10);
        assert!((q.d2 - g.2).abs() < 1e-10);
    }

    #[test]
    fn extension_is_nonnegative_and_decreasing() {
        for i in 0..=4000 {
            let s = 0.5 + 0.5 * i as f64 / 4000.0;
            let j = bump_radial(s, 0.1).unwrap();
            assert!(j.value >= 0.0 && j.d1 <= 0.0, "s = {s}");
        }
    }

    #[test]
    fn finite_difference_probe_of_seams() {
        // Partial derivatives of the 2-D bump stay continuous across each seam.
        let b = SpikeBump {
            center: vec![0.0, 0.0],
            eps: 1.0,
            eta: 1.0,
            delta: 0.25,
        };
        for s0 in [0.25, 0.5, EXTENSION_KNOT] {
            let dir = [0.6, 0.8];
            let at = |s: f64| [s * dir[0], s * dir[1]];
            let (_, _, h1) = b.unit_jet(&at(s0 - 1e-9)).unwrap();
            let (_, _, h2) = b.unit_jet(&at(s0 + 1e-9)).unwrap();
            assert!((h1 - h2).abs().max() < 1e-6, "seam {s0}");
        }
    }

    proptest! {
        #[test]
        fn smoothed_bump_is_concave_inside_half_ball(s in 0.0f64..0.5, sigma in 0.01f64..0.49) {
            let j = bump_radial(s, sigma).unwrap();
            prop_assert!(j.d2 < 0.0);
            prop_assert!(j.d1_over_s < 0.0);
        }

        #[test]
        fn bump_is_bounded(s in 0.0f64..1.2, sigma in 0.0f64..0.49) {
            if s > 0.0 || sigma > 0.0 {
                let j = bump_radial(s, sigma).unwrap();
                prop_assert!(j.value >= 0.0 && j.value <= 1.0);
            }
        }
    }
}
