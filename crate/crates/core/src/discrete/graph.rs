//! Shortest-path distances on a lattice whose edges are weighted by the
//! Riemannian length of the straight coordinate segment.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rayon::prelude::*;

use super::mesh::{Lattice, Mesh};
use crate::error::{LabError, Result};
use crate::geometry::MetricChart;

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

/// Lattice offsets with entries in `[-reach, reach]` whose entries have no
/// common divisor; longer stencils reduce the grid anisotropy of path lengths.
pub fn coprime_offsets(n: usize, reach: i64) -> Vec<Vec<i64>> {
    let side = (2 * reach + 1) as usize;
    let mut out = Vec::new();
    for code in 0..side.pow(n as u32) {
        let mut c = code;
        let mut v = vec![0i64; n];
        for slot in v.iter_mut() {
            *slot = (c % side) as i64 - reach;
            c /= side;
        }
        let g = v.iter().fold(0, |acc, &x| gcd(acc, x));
        if g == 1 {
            out.push(v);
        }
    }
    out
}

#[derive(Clone, Copy, PartialEq)]
struct Item(f64, usize);

impl Eq for Item {}

impl PartialOrd for Item {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Item {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

/// Lattice graph with per-node metrics.
#[derive(Debug, Clone)]
pub struct LatticeGraph {
    lattice: Lattice,
    active: Vec<bool>,
    metric: Vec<f64>,
    offsets: Vec<Vec<i64>>,
}

impl LatticeGraph {
    /// Evaluate the chart metric at every admitted node.
    pub fn from_chart(chart: &MetricChart, lattice: Lattice, reach: i64) -> Result<Self> {
        let n = chart.dim();
        let rows: Vec<Option<Vec<f64>>> = (0..lattice.len())
            .into_par_iter()
            .map(|i| {
                let x = lattice.coords(i);
                if !chart.admits(&x) {
                    return None;
                }
                let g = chart.metric_at(&x).ok()?;
                if g.iter().any(|v| !v.is_finite()) {
                    return None;
                }
                Some(g.iter().copied().collect())
            })
            .collect();
        let mut active = vec![false; lattice.len()];
        let mut metric = vec![0.0; lattice.len() * n * n];
        for (i, r) in rows.into_iter().enumerate() {
            if let Some(g) = r {
                active[i] = true;
                metric[i * n * n..(i + 1) * n * n].copy_from_slice(&g);
            }
        }
        Ok(LatticeGraph {
            lattice,
            active,
            metric,
            offsets: coprime_offsets(n, reach.max(1)),
        })
    }

    pub fn from_mesh(mesh: &Mesh, reach: i64) -> Self {
        let n = mesh.dim();
        let mut metric = vec![0.0; mesh.len() * n * n];
        for i in 0..mesh.len() {
            metric[i * n * n..(i + 1) * n * n].copy_from_slice(mesh.metric(i));
        }
        LatticeGraph {
            lattice: mesh.lattice().clone(),
            active: mesh.active().to_vec(),
            metric,
            offsets: coprime_offsets(n, reach.max(1)),
        }
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn is_active(&self, node: usize) -> bool {
        self.active[node]
    }

    pub fn active_nodes(&self) -> Vec<usize> {
        (0..self.lattice.len()).filter(|&i| self.active[i]).collect()
    }

    fn target(&self, idx: &[usize], off: &[i64]) -> Option<usize> {
        let mut j = idx.to_vec();
        for a in 0..idx.len() {
            let c = self.lattice.counts[a] as i64;
            let mut v = idx[a] as i64 + off[a];
            if self.lattice.periodic[a] {
                v = v.rem_euclid(c);
            } else if v < 0 || v >= c {
                return None;
            }
            j[a] = v as usize;
        }
        Some(self.lattice.node(&j))
    }

    fn quad(&self, node: usize, v: &[f64]) -> f64 {
        let n = v.len();
        let g = &self.metric[node * n * n..(node + 1) * n * n];
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                s += v[i] * g[i * n + j] * v[j];
            }
        }
        s.max(0.0).sqrt()
    }

    /// Edge length, or None if an endpoint or an intermediate lattice point the
    /// segment passes next to is inactive.
    fn edge(&self, from: usize, idx: &[usize], off: &[i64]) -> Option<(usize, f64)> {
        let to = self.target(idx, off)?;
        if !self.active[to] {
            return None;
        }
        let steps = off.iter().map(|o| o.abs()).max().unwrap_or(1);
        for s in 1..steps {
            let mid: Vec<i64> = off
                .iter()
                .map(|&o| ((o * s) as f64 / steps as f64).round() as i64)
                .collect();
            let m = self.target(idx, &mid)?;
            if !self.active[m] {
                return None;
            }
        }
        let v: Vec<f64> = off
            .iter()
            .zip(&self.lattice.step)
            .map(|(&o, h)| o as f64 * h)
            .collect();
        Some((to, 0.5 * (self.quad(from, &v) + self.quad(to, &v))))
    }

    /// Single-source shortest-path distances; unreachable nodes get infinity.
    pub fn distances(&self, source: usize) -> Result<Vec<f64>> {
        if !self.active[source] {
            return Err(LabError::Mesh(format!("source node {source} is masked")));
        }
        let mut dist = vec![f64::INFINITY; self.lattice.len()];
        dist[source] = 0.0;
        let mut heap = BinaryHeap::new();
        heap.push(Item(0.0, source));
        while let Some(Item(d, u)) = heap.pop() {
            if d > dist[u] {
                continue;
            }
            let idx = self.lattice.multi_index(u);
            for off in &self.offsets {
                if let Some((v, w)) = self.edge(u, &idx, off) {
                    let nd = d + w;
                    if nd < dist[v] {
                        dist[v] = nd;
                        heap.push(Item(nd, v));
                    }
                }
            }
        }
        Ok(dist)
    }

    /// Error if some active node cannot be reached from the first active node.
    pub fn check_connected(&self) -> Result<()> {
        let nodes = self.active_nodes();
        let Some(&first) = nodes.first() else {
            return Err(LabError::Mesh("graph has no active nodes".into()));
        };
        let d = self.distances(first)?;
        let unreached = nodes.iter().filter(|&&i| !d[i].is_finite()).count();
        if unreached > 0 {
            return Err(LabError::Mesh(format!(
                "mesh graph is disconnected: {unreached} of {} active nodes unreachable",
                nodes.len()
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{ChartSpec, Domain, Exclusion, ModelSpec};

    #[test]
    fn offsets_are_primitive() {
        let o = coprime_offsets(2, 1);
        assert_eq!(o.len(), 8);
        assert_eq!(coprime_offsets(2, 3).len(), 32);
    }

    #[test]
    fn flat_distance_is_nearly_euclidean() {
        let chart = MetricChart::euclidean_box(vec![0.0, 0.0], vec![1.0, 1.0]);
        let lat = Lattice::new(&[0.0, 0.0], &[1.0, 1.0], 0.05, &[false, false]).unwrap();
        let g = LatticeGraph::from_chart(&chart, lat, 3).unwrap();
        let d = g.distances(0).unwrap();
        let far = g.lattice().node(&[20, 7]);
        let exact = (1.0f64 + 0.35 * 0.35).sqrt();
        assert!((d[far] - exact).abs() / exact < 0.01, "{} vs {exact}", d[far]);
    }

    #[test]
    fn disconnected_mesh_is_reported() {
        let chart = MetricChart::from_spec(ChartSpec {
            model: ModelSpec::Euclidean { dim: 2 },
            domain: Domain::Box {
                lo: vec![0.0, 0.0],
                hi: vec![1.0, 1.0],
            },
            exclusions: (0..=10)
                .map(|i| Exclusion {
                    center: vec![0.5, i as f64 * 0.1],
                    radius: 0.12,
                })
                .collect(),
            fd_step: None,
        })
        .unwrap();
        let lat = Lattice::new(&[0.0, 0.0], &[1.0, 1.0], 0.05, &[false, false]).unwrap();
        let g = LatticeGraph::from_chart(&chart, lat, 3).unwrap();
        assert!(matches!(g.check_connected(), Err(LabError::Mesh(_))));
    }
}
