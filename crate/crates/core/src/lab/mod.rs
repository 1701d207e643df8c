//! The verification harness: inequalities and identities as measured ratios
//! and residuals, plus the density and transition-norm experiments.

pub mod cone;
pub mod density;
pub mod doubling;
pub mod identities;
pub mod regularity;
pub mod transition;

use serde::{Deserialize, Serialize};

use std::sync::Arc;

use crate::discrete::Mesh;
use crate::error::{LabError, Result};
use crate::geometry::{ChartSpec, Domain, MetricChart, ModelSpec};

pub use cone::{cone_energy_decay, ConeDecay};
pub use density::{density_experiment, DensityResult, RadialProfile};
pub use doubling::{bessel_j1_prime_zero, doubling_and_poincare, DoublingOptions};
pub use identities::{
    adjointness_study, bochner_residual, sampson_residual, sampson_study, ConvergenceStudy,
};
pub use transition::{
    spike_count_sweep, spiked_chart, transition_norm_minimization, TransitionOptions,
    TransitionResult,
};
pub use regularity::{
    check_p1_identities, check_regularity_lemma, ibp_residual, BumpField, P1Result,
    RegularityChecks, CD_MIN_P,
};

/// Mesh over the box `[lo, hi]` of a model chart.
pub fn box_mesh(model: ModelSpec, lo: &[f64], hi: &[f64], step: f64) -> Result<Arc<Mesh>> {
    let chart = MetricChart::from_spec(ChartSpec {
        model,
        domain: Domain::Box {
            lo: lo.to_vec(),
            hi: hi.to_vec(),
        },
        exclusions: vec![],
        fd_step: None,
    })?;
    Ok(Arc::new(Mesh::on_box(chart, lo, hi, step)?))
}

/// Where a measured quantity came from.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub step: f64,
    pub chart: String,
    pub field: String,
}

/// One measured inequality `lhs <= rhs`, passing iff `lhs/rhs <= 1 + tolerance`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityCheck {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub provenance: Provenance,
}

impl InequalityCheck {
    /// `0 <= 0` counts as ratio 0.
    pub fn new(name: &str, lhs: f64, rhs: f64, tolerance: f64, provenance: Provenance) -> Self {
        let ratio = if rhs > 0.0 {
            lhs / rhs
        } else if lhs <= 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        InequalityCheck {
            name: name.to_string(),
            lhs,
            rhs,
            ratio,
            tolerance,
            pass: ratio <= 1.0 + tolerance,
            provenance,
        }
    }
}

/// Values over an increasing parameter grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayCurve {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    /// Fraction of strictly decreasing steps.
    pub trend: f64,
    /// Last value; an upper estimate of the limit for a decreasing curve.
    pub limit_estimate: f64,
}

impl DecayCurve {
    pub fn new(grid: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if grid.len() != values.len() || grid.is_empty() {
            return Err(LabError::parameter("decay curve needs matching nonempty grid and values"));
        }
        if grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(LabError::parameter("decay curve grid must be strictly increasing"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(LabError::numerical("decay curve has non-finite values", f64::NAN));
        }
        Ok(DecayCurve {
            trend: crate::util::decreasing_fraction(&values),
            limit_estimate: *values.last().expect("nonempty"),
            grid,
            values,
        })
    }

    /// `last / first`, or 0 for an identically vanishing curve.
    pub fn final_over_initial(&self) -> f64 {
        let first = self.values[0];
        let last = self.limit_estimate;
        if first == 0.0 {
            if last == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            last / first
        }
    }

    pub fn to_csv(&self, column: &str) -> String {
        let mut s = format!("x,{column}\n");
        for (x, v) in self.grid.iter().zip(&self.values) {
            s.push_str(&format!("{x:e},{v:e}\n"));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_over_zero_passes() {
        let c = InequalityCheck::new("z", 0.0, 0.0, 0.05, Provenance::default());
        assert!(c.pass && c.ratio == 0.0);
        let c = InequalityCheck::new("z", 1.0, 0.0, 0.05, Provenance::default());
        assert!(!c.pass);
    }

    #[test]
    fn decay_curve_invariants() {
        assert!(DecayCurve::new(vec![1.0, 1.0], vec![1.0, 0.5]).is_err());
        assert!(DecayCurve::new(vec![1.0, 2.0], vec![1.0, f64::NAN]).is_err());
        let c = DecayCurve::new(vec![1.0, 2.0, 3.0], vec![3.0, 2.0, 1.0]).unwrap();
        assert_eq!(c.trend, 1.0);
        assert_eq!(c.to_csv("v").lines().count(), 4);
        assert!((c.final_over_initial() - 1.0 / 3.0).abs() < 1e-15);
    }
}
