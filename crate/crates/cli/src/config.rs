//! Experiment configuration files.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use sobolev_lab::geometry::ModelSpec;
use sobolev_lab::lab::TransitionOptions;

use crate::CliError;

fn one() -> f64 {
    1.0
}

fn yes() -> bool {
    true
}

/// A suite: named list of operations with shared seed and tolerance scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub suite: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub seed: u64,
    /// Multiplies every tolerance of every check.
    #[serde(default = "one")]
    pub tolerance_scale: f64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub operations: Vec<Operation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Operation {
    /// Unique within the suite; names the stored objects and CSV files.
    pub id: String,
    /// Failing checks of a non-enforced operation are reported but do not
    /// change the exit code.
    #[serde(default = "yes")]
    pub enforce: bool,
    #[serde(flatten)]
    pub kind: OpKind,
}

/// Square chart `[-half_width, half_width]^2` of a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxChart {
    pub model: ModelSpec,
    pub half_width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum OpKind {
    /// Local, global and chained regularity estimates for random bumps.
    Regularity {
        chart: BoxChart,
        step: f64,
        p: Vec<f64>,
        bumps: usize,
        support: f64,
        radius: f64,
        outer: f64,
        tolerance: f64,
        /// Integration-by-parts bound for the p = 2 runs.
        #[serde(default)]
        ibp_tolerance: Option<f64>,
    },
    /// `int eps |grad f|^2 / (f^2 + eps)^{3/2} <= int |Delta f|`.
    P1Identity {
        chart: BoxChart,
        step: f64,
        eps: Vec<f64>,
        bumps: usize,
        support: f64,
        tolerance: f64,
    },
    /// Sampled sectional curvatures of a chart.
    Curvature {
        model: ModelSpec,
        points: usize,
        r_min: f64,
        r_max: f64,
        #[serde(default)]
        fd_step: Option<f64>,
        /// Every sampled curvature must equal this within `tolerance`.
        #[serde(default)]
        expected: Option<f64>,
        /// Every Gauss-equation curvature must exceed this.
        #[serde(default)]
        lower_bound: Option<f64>,
        tolerance: f64,
    },
    HyperbolicBallVolume {
        rho: Vec<f64>,
        tolerance: f64,
    },
    ConeVolume {
        tolerance: f64,
    },
    /// Refinement orders of the Bochner, Sampson and adjointness defects.
    Identities {
        steps: Vec<f64>,
        bochner_order: f64,
        sampson_order: f64,
        adjoint_order: f64,
    },
    Cutoff {
        k: usize,
        order: usize,
        sweep: Vec<f64>,
        max_spread: f64,
    },
    /// `||f chi_R - f||_{W^{k,p}}` on the hyperbolic model, `f = exp(-rate r)`.
    Density {
        family_k: usize,
        k: usize,
        p: f64,
        rate: f64,
        sweep: Vec<f64>,
        min_trend: f64,
        max_final_ratio: f64,
    },
    ConeDecay {
        theta: f64,
        mode: u32,
        radii: Vec<f64>,
        cells: usize,
        /// Relative to the expected exponent (absolute when that is below 1).
        exponent_tolerance: f64,
        ratio_tolerance: f64,
    },
    Doubling {
        chart: BoxChart,
        center: Vec<f64>,
        radii: Vec<f64>,
        p: f64,
        step: f64,
        #[serde(default)]
        random_fields: Option<usize>,
        /// Expected volume doubling ratio (`2^n` for flat space).
        #[serde(default)]
        doubling: Option<f64>,
        #[serde(default)]
        doubling_tolerance: Option<f64>,
        /// Poincare constant of the largest ball, compared with the Neumann value.
        #[serde(default)]
        neumann_tolerance: Option<f64>,
        #[serde(default)]
        reverse_doubling: bool,
    },
    TransitionSweep {
        counts: Vec<usize>,
        total: f64,
        r_in: f64,
        r_out: f64,
        delta_ratio: f64,
        #[serde(default)]
        options: Option<TransitionOptions>,
        /// Allowed relative drop between consecutive spike counts.
        noise: f64,
        min_gain: f64,
    },
    /// Spiked profile on an annulus, certified and exported as a surface.
    SpikeProfile {
        count: usize,
        eps_min: f64,
        eta_bar: f64,
        delta_ratio: f64,
        r_in: f64,
        r_out: f64,
        certify_step: f64,
        #[serde(default)]
        obj_rings: Option<usize>,
    },
}

impl OpKind {
    pub fn name(&self) -> &'static str {
        match self {
            OpKind::Regularity { .. } => "regularity",
            OpKind::P1Identity { .. } => "p1_identity",
            OpKind::Curvature { .. } => "curvature",
            OpKind::HyperbolicBallVolume { .. } => "hyperbolic_ball_volume",
            OpKind::ConeVolume { .. } => "cone_volume",
            OpKind::Identities { .. } => "identities",
            OpKind::Cutoff { .. } => "cutoff",
            OpKind::Density { .. } => "density",
            OpKind::ConeDecay { .. } => "cone_decay",
            OpKind::Doubling { .. } => "doubling",
            OpKind::TransitionSweep { .. } => "transition_sweep",
            OpKind::SpikeProfile { .. } => "spike_profile",
        }
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| CliError::Usage(format!("invalid config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let safe = |s: &str| {
            !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
        };
        if !safe(&self.suite) {
            return Err(CliError::Usage(format!(
                "suite name {:?} must be non-empty [A-Za-z0-9_-]",
                self.suite
            )));
        }
        if !(self.tolerance_scale > 0.0 && self.tolerance_scale.is_finite()) {
            return Err(CliError::Usage("tolerance_scale must be a positive number".into()));
        }
        let mut seen = HashSet::new();
        for op in &self.operations {
            if !safe(&op.id) {
                return Err(CliError::Usage(format!("operation id {:?} must be non-empty [A-Za-z0-9_-]", op.id)));
            }
            if !seen.insert(op.id.as_str()) {
                return Err(CliError::Usage(format!("duplicate operation id {:?}", op.id)));
            }
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form (keys sorted), after any overrides.
    pub fn hash(&self) -> String {
        let value = serde_json::to_value(self).expect("config serializes");
        hex::encode(Sha256::digest(value.to_string().as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_suite_parses() {
        let c = ExperimentConfig::parse(r#"{"suite": "empty", "operations": []}"#).unwrap();
        assert_eq!(c.tolerance_scale, 1.0);
        assert!(c.operations.is_empty());
    }

    #[test]
    fn schema_violations_are_usage_errors() {
        for bad in [
            "{",
            r#"{"suite": "x", "bogus": 1}"#,
            r#"{"suite": "a b"}"#,
            r#"{"suite": "x", "tolerance_scale": 0}"#,
            r#"{"suite": "x", "operations": [{"id": "a", "op": "cone_volume"}]}"#,
            r#"{"suite": "x", "operations": [{"id": "a", "op": "nope"}]}"#,
            r#"{"suite": "x", "operations": [{"id": "a", "op": "cone_volume", "tolerance": 1},
                                             {"id": "a", "op": "cone_volume", "tolerance": 1}]}"#,
        ] {
            assert!(matches!(ExperimentConfig::parse(bad), Err(CliError::Usage(_))), "{bad}");
        }
    }

    #[test]
    fn hash_ignores_key_order_but_not_values() {
        let a = ExperimentConfig::parse(r#"{"suite": "x", "seed": 1}"#).unwrap();
        let b = ExperimentConfig::parse(r#"{"seed": 1, "suite": "x"}"#).unwrap();
        let c = ExperimentConfig::parse(r#"{"seed": 2, "suite": "x"}"#).unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
    }
}
