use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::profile::DISK_RADIUS;
use super::Profile;
use crate::discrete::{Lattice, LatticeGraph};
use crate::error::{LabError, Result};
use crate::geometry::{AmbientKind, ChartSpec, Domain, GraphHypersurface, MetricChart, ModelSpec};

/// Mesh and sampling parameters for graph-distance comparisons.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiLipschitzOptions {
    pub ambient: AmbientKind,
    /// Lattice step in base coordinates.
    pub step: f64,
    /// The comparison runs on the base annulus `rho_min <= |x| <= rho_max`.
    pub rho_min: f64,
    pub rho_max: f64,
    pub pairs: usize,
    pub seed: u64,
    /// Stencil reach of the lattice graph.
    pub reach: i64,
}

impl Default for BiLipschitzOptions {
    fn default() -> Self {
        BiLipschitzOptions {
            ambient: AmbientKind::KleinBall,
            step: 0.004,
            rho_min: 0.05,
            rho_max: 0.25,
            pairs: 24,
            seed: 11,
            reach: 3,
        }
    }
}

/// Extreme ratios `d_A / d_B` over the sampled pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiLipschitzBounds {
    pub min: f64,
    pub max: f64,
    pub pairs: usize,
    pub active_nodes: usize,
    pub step: f64,
}

impl BiLipschitzBounds {
    /// Smallest C with `1/C <= min` and `max <= C`.
    pub fn constant(&self) -> f64 {
        self.max.max(1.0 / self.min)
    }
}

fn graph_for(profile: Arc<dyn Profile>, opts: &BiLipschitzOptions) -> Result<LatticeGraph> {
    let surface = GraphHypersurface::new(opts.ambient, profile, 1)?;
    let spec = ChartSpec {
        model: ModelSpec::Euclidean { dim: 2 },
        domain: Domain::Annulus {
            center: vec![0.0, 0.0],
            r_in: opts.rho_min,
            r_out: opts.rho_max,
        },
        exclusions: vec![],
        fd_step: None,
    };
    let chart = MetricChart::with_model(spec, Arc::new(surface))?;
    let r = opts.rho_max;
    let lattice = Lattice::new(&[-r, -r], &[r, r], opts.step, &[false, false])?;
    let g = LatticeGraph::from_chart(&chart, lattice, opts.reach)?;
    g.check_connected()?;
    Ok(g)
}

/// Compare graph distances of the upper graphs of two profiles over the same
/// base annulus. Pairs are drawn from the nodes active in both meshes.
pub fn bilipschitz_estimate(
    a: Arc<dyn Profile>,
    b: Arc<dyn Profile>,
    opts: &BiLipschitzOptions,
) -> Result<BiLipschitzBounds> {
    if a.dim() != 2 || b.dim() != 2 {
        return Err(LabError::parameter("bi-Lipschitz comparison is implemented for n = 2"));
    }
    if !(0.0 < opts.rho_min && opts.rho_min < opts.rho_max && opts.rho_max < DISK_RADIUS) {
        return Err(LabError::parameter("need 0 < rho_min < rho_max < 2 - sqrt(3)"));
    }
    if opts.pairs == 0 {
        return Err(LabError::parameter("need at least one sample pair"));
    }
    let ga = graph_for(a, opts)?;
    let gb = graph_for(b, opts)?;
    let common: Vec<usize> = ga
        .active_nodes()
        .into_iter()
        .filter(|&i| gb.is_active(i))
        .collect();
    if common.len() < 2 {
        return Err(LabError::Mesh("fewer than two nodes shared by both meshes".into()));
    }
    let mut rng = crate::util::seeded_rng(opts.seed);
    let mut pairs = Vec::with_capacity(opts.pairs);
    while pairs.len() < opts.pairs {
        let s = common[rng.gen_range(0..common.len())];
        let t = common[rng.gen_range(0..common.len())];
        if s != t {
            pairs.push((s, t));
        }
    }
    let ratios: Result<Vec<f64>> = pairs
        .par_iter()
        .map(|&(s, t)| {
            let da = ga.distances(s)?[t];
            let db = gb.distances(s)?[t];
            if !(da.is_finite() && db.is_finite() && db > 0.0) {
                return Err(LabError::Mesh(format!("pair ({s}, {t}) not connected")));
            }
            Ok(da / db)
        })
        .collect();
    let ratios = ratios?;
    Ok(BiLipschitzBounds {
        min: ratios.iter().cloned().fold(f64::INFINITY, f64::min),
        max: ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        pairs: ratios.len(),
        active_nodes: common.len(),
        step: ga.lattice().step[0],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spike::{Annulus, BaseProfile, SpikeOptions, SpikeProfile};

    fn coarse() -> BiLipschitzOptions {
        BiLipschitzOptions {
            step: 0.01,
            pairs: 8,
            ..Default::default()
        }
    }

    #[test]
    fn identical_profiles_give_unit_bounds() {
        let p: Arc<dyn Profile> = Arc::new(BaseProfile::new(2));
        let b = bilipschitz_estimate(p.clone(), p, &coarse()).unwrap();
        assert!((b.min - 1.0).abs() < 1e-12 && (b.max - 1.0).abs() < 1e-12);
    }

    #[test]
    fn spiked_profile_has_finite_constant() {
        let base: Arc<dyn Profile> = Arc::new(BaseProfile::new(2));
        let sp = SpikeProfile::new(2, Annulus::new(0.1, 0.2).unwrap())
            .with_halton_spikes(4, 0.004, &SpikeOptions::default())
            .unwrap();
        assert!(sp.eta_sum() <= 0.1);
        let b = bilipschitz_estimate(base, Arc::new(sp), &coarse()).unwrap();
        assert!(b.min > 0.0 && b.min <= b.max);
        assert!(b.constant().is_finite() && b.constant() < 2.0);
    }

    #[test]
    fn rejects_bad_annulus() {
        let p: Arc<dyn Profile> = Arc::new(BaseProfile::new(2));
        let o = BiLipschitzOptions {
            rho_max: 0.3,
            ..coarse()
        };
        assert!(bilipschitz_estimate(p.clone(), p, &o).is_err());
    }
}
