use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::geometry::curvature::{orthonormal_frame, riemann_from_jet};
use crate::geometry::MetricChart;

/// Lattice layout of a mesh, independent of the chart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lattice {
    pub lo: Vec<f64>,
    pub step: Vec<f64>,
    pub counts: Vec<usize>,
    /// Periodic axes wrap around; their last node is one step short of `lo + period`.
    pub periodic: Vec<bool>,
}

impl Lattice {
    /// Lattice on `[lo, hi]` with the given step along every axis; non-periodic
    /// axes include both endpoints.
    pub fn new(lo: &[f64], hi: &[f64], step: f64, periodic: &[bool]) -> Result<Self> {
        let n = lo.len();
        if hi.len() != n || periodic.len() != n {
            return Err(LabError::parameter("lattice bounds and periodic flags disagree in length"));
        }
        if !(step > 0.0) {
            return Err(LabError::parameter(format!("mesh step {step} must be > 0")));
        }
        let mut counts = Vec::with_capacity(n);
        let mut steps = Vec::with_capacity(n);
        for a in 0..n {
            let len = hi[a] - lo[a];
            if !(len > 0.0) {
                return Err(LabError::parameter(format!("empty extent along axis {a}")));
            }
            let cells = (len / step).round().max(1.0) as usize;
            let h = len / cells as f64;
            steps.push(h);
            counts.push(if periodic[a] { cells } else { cells + 1 });
        }
        Ok(Lattice {
            lo: lo.to_vec(),
            step: steps,
            counts,
            periodic: periodic.to_vec(),
        })
    }

    pub fn dim(&self) -> usize {
        self.counts.len()
    }

    pub fn len(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn multi_index(&self, mut node: usize) -> Vec<usize> {
        let n = self.dim();
        let mut idx = vec![0; n];
        for a in (0..n).rev() {
            idx[a] = node % self.counts[a];
            node /= self.counts[a];
        }
        idx
    }

    pub fn node(&self, idx: &[usize]) -> usize {
        idx.iter()
            .zip(&self.counts)
            .fold(0, |acc, (i, c)| acc * c + i)
    }

    pub fn coords(&self, node: usize) -> Vec<f64> {
        self.multi_index(node)
            .iter()
            .enumerate()
            .map(|(a, &i)| self.lo[a] + i as f64 * self.step[a])
            .collect()
    }

    /// Neighbor of `node` shifted by `offset` cells along `axis`, if it exists.
    pub fn shift(&self, node: usize, axis: usize, offset: i64) -> Option<usize> {
        let mut idx = self.multi_index(node);
        let c = self.counts[axis] as i64;
        let mut j = idx[axis] as i64 + offset;
        if self.periodic[axis] {
            j = j.rem_euclid(c);
        } else if j < 0 || j >= c {
            return None;
        }
        idx[axis] = j as usize;
        Some(self.node(&idx))
    }

    /// Trapezoid weight of a node (halved on each non-periodic boundary face).
    pub fn cell_weight(&self, node: usize) -> f64 {
        let idx = self.multi_index(node);
        let mut w = 1.0;
        for a in 0..self.dim() {
            w *= self.step[a];
            if !self.periodic[a] && (idx[a] == 0 || idx[a] + 1 == self.counts[a]) {
                w *= 0.5;
            }
        }
        w
    }
}

/// A lattice over a chart with per-node geometric caches.
#[derive(Debug, Clone)]
pub struct Mesh {
    chart: MetricChart,
    lattice: Lattice,
    active: Vec<bool>,
    g: Vec<f64>,
    ginv: Vec<f64>,
    sqrt_det: Vec<f64>,
    gamma: Vec<f64>,
    riemann: Vec<f64>,
    ricci: Vec<f64>,
    frames: Vec<f64>,
    curvature_operator_min: Vec<f64>,
}

struct NodeCache {
    g: Vec<f64>,
    ginv: Vec<f64>,
    sqrt_det: f64,
    gamma: Vec<f64>,
    up: Vec<f64>,
    ricci: Vec<f64>,
    frame: Vec<f64>,
    op_min: f64,
}

impl Mesh {
    /// Build the mesh and its caches. Nodes outside the chart domain, inside an
    /// exclusion ball, or where the metric cannot be evaluated are masked.
    pub fn new(chart: MetricChart, lattice: Lattice) -> Result<Self> {
        let n = chart.dim();
        if lattice.dim() != n {
            return Err(LabError::parameter(format!(
                "lattice of dimension {} on a chart of dimension {n}",
                lattice.dim()
            )));
        }
        let caches: Vec<Option<NodeCache>> = (0..lattice.len())
            .into_par_iter()
            .map(|node| {
                let x = lattice.coords(node);
                if !chart.admits(&x) {
                    return None;
                }
                let jet = chart.jet_at(&x).ok()?;
                let rm = riemann_from_jet(&jet).ok()?;
                let det = rm.g.determinant();
                if !(det > 0.0) || rm.up.iter().any(|v| !v.is_finite()) {
                    return None;
                }
                let frame = orthonormal_frame(&rm.g);
                Some(NodeCache {
                    g: rm.g.iter().copied().collect(),
                    ginv: rm.ginv.iter().copied().collect(),
                    sqrt_det: det.sqrt(),
                    gamma: rm.gamma.clone(),
                    op_min: rm.curvature_operator_min(),
                    up: rm.up,
                    ricci: rm.ricci.iter().copied().collect(),
                    frame: frame.iter().copied().collect(),
                })
            })
            .collect();
        let len = lattice.len();
        let (n2, n3, n4) = (n * n, n * n * n, n * n * n * n);
        let mut mesh = Mesh {
            chart,
            lattice,
            active: vec![false; len],
            g: vec![0.0; len * n2],
            ginv: vec![0.0; len * n2],
            sqrt_det: vec![0.0; len],
            gamma: vec![0.0; len * n3],
            riemann: vec![0.0; len * n4],
            ricci: vec![0.0; len * n2],
            frames: vec![0.0; len * n2],
            curvature_operator_min: vec![0.0; len],
        };
        for (i, c) in caches.into_iter().enumerate() {
            if let Some(c) = c {
                mesh.active[i] = true;
                // nalgebra iterates column-major; all cached matrices are symmetric
                // except the frame, which is transposed back below.
                mesh.g[i * n2..(i + 1) * n2].copy_from_slice(&c.g);
                mesh.ginv[i * n2..(i + 1) * n2].copy_from_slice(&c.ginv);
                mesh.sqrt_det[i] = c.sqrt_det;
                mesh.gamma[i * n3..(i + 1) * n3].copy_from_slice(&c.gamma);
                mesh.riemann[i * n4..(i + 1) * n4].copy_from_slice(&c.up);
                mesh.ricci[i * n2..(i + 1) * n2].copy_from_slice(&c.ricci);
                for r in 0..n {
                    for col in 0..n {
                        mesh.frames[i * n2 + r * n + col] = c.frame[col * n + r];
                    }
                }
                mesh.curvature_operator_min[i] = c.op_min;
            }
        }
        if !mesh.active.iter().any(|&a| a) {
            return Err(LabError::Mesh("every mesh node is masked".into()));
        }
        Ok(mesh)
    }

    /// Convenience: lattice with one step on a box.
    pub fn on_box(chart: MetricChart, lo: &[f64], hi: &[f64], step: f64) -> Result<Self> {
        let periodic = vec![false; lo.len()];
        let lattice = Lattice::new(lo, hi, step, &periodic)?;
        Mesh::new(chart, lattice)
    }

    pub fn chart(&self) -> &MetricChart {
        &self.chart
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn dim(&self) -> usize {
        self.lattice.dim()
    }

    pub fn len(&self) -> usize {
        self.lattice.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lattice.is_empty()
    }

    pub fn coords(&self, node: usize) -> Vec<f64> {
        self.lattice.coords(node)
    }

    pub fn is_active(&self, node: usize) -> bool {
        self.active[node]
    }

    pub fn active(&self) -> &[bool] {
        &self.active
    }

    /// `g_ij` at a node (row-major, length n^2).
    pub fn metric(&self, node: usize) -> &[f64] {
        let n2 = self.dim() * self.dim();
        &self.g[node * n2..(node + 1) * n2]
    }

    pub fn inverse_metric(&self, node: usize) -> &[f64] {
        let n2 = self.dim() * self.dim();
        &self.ginv[node * n2..(node + 1) * n2]
    }

    pub fn sqrt_det(&self, node: usize) -> f64 {
        self.sqrt_det[node]
    }

    /// `Gamma^k_ij` at `(k * n + i) * n + j`.
    pub fn christoffel(&self, node: usize) -> &[f64] {
        let n3 = self.dim().pow(3);
        &self.gamma[node * n3..(node + 1) * n3]
    }

    /// `R^d_{cab}` at `((d * n + c) * n + a) * n + b`.
    pub fn riemann(&self, node: usize) -> &[f64] {
        let n4 = self.dim().pow(4);
        &self.riemann[node * n4..(node + 1) * n4]
    }

    pub fn ricci(&self, node: usize) -> &[f64] {
        let n2 = self.dim() * self.dim();
        &self.ricci[node * n2..(node + 1) * n2]
    }

    /// Orthonormal frame, row-major with column j holding `E_j`.
    pub fn frame(&self, node: usize) -> &[f64] {
        let n2 = self.dim() * self.dim();
        &self.frames[node * n2..(node + 1) * n2]
    }

    pub fn curvature_operator_min(&self, node: usize) -> f64 {
        self.curvature_operator_min[node]
    }

    /// Volume weight `sqrt(det g)` times the trapezoid cell weight.
    pub fn volume_weight(&self, node: usize) -> f64 {
        self.sqrt_det[node] * self.lattice.cell_weight(node)
    }

    /// Total volume of the active nodes.
    pub fn volume(&self) -> f64 {
        let w: Vec<f64> = (0..self.len())
            .filter(|&i| self.active[i])
            .map(|i| self.volume_weight(i))
            .collect();
        crate::util::pairwise_sum(&w)
    }

    /// Centered first partial along `axis` of the `m` components stored at
    /// `data[node * m ..]`, one-sided second order at non-periodic boundaries.
    /// Returns false if the stencil touches a masked or invalid node.
    pub fn partial(
        &self,
        data: &[f64],
        valid: &[bool],
        m: usize,
        node: usize,
        axis: usize,
        out: &mut [f64],
    ) -> bool {
        let h = self.lattice.step[axis];
        let ok = |i: usize| valid[i] && self.active[i];
        let get = |i: usize, c: usize| data[i * m + c];
        let l = &self.lattice;
        match (l.shift(node, axis, -1), l.shift(node, axis, 1)) {
            (Some(a), Some(b)) => {
                if !(ok(a) && ok(b)) {
                    return false;
                }
                for c in 0..m {
                    out[c] = (get(b, c) - get(a, c)) / (2.0 * h);
                }
            }
            (None, Some(b)) => {
                let Some(b2) = l.shift(node, axis, 2) else { return false };
                if !(ok(node) && ok(b) && ok(b2)) {
                    return false;
                }
                for c in 0..m {
                    out[c] = (-3.0 * get(node, c) + 4.0 * get(b, c) - get(b2, c)) / (2.0 * h);
                }
            }
            (Some(a), None) => {
                let Some(a2) = l.shift(node, axis, -2) else { return false };
                if !(ok(node) && ok(a) && ok(a2)) {
                    return false;
                }
                for c in 0..m {
                    out[c] = (3.0 * get(node, c) - 4.0 * get(a, c) + get(a2, c)) / (2.0 * h);
                }
            }
            (None, None) => return false,
        }
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{ChartSpec, Domain, ModelSpec};

    #[test]
    fn lattice_roundtrip() {
        let l = Lattice::new(&[0.0, -1.0], &[1.0, 1.0], 0.25, &[false, true]).unwrap();
        assert_eq!(l.counts, vec![5, 8]);
        for node in 0..l.len() {
            assert_eq!(l.node(&l.multi_index(node)), node);
        }
        assert_eq!(l.shift(0, 1, -1), Some(7));
        assert_eq!(l.shift(0, 0, -1), None);
    }

    #[test]
    fn caches_match_chart() {
        let chart = MetricChart::from_spec(ChartSpec {
            model: ModelSpec::PoincareBall { dim: 2 },
            domain: Domain::Box {
                lo: vec![-0.5, -0.5],
                hi: vec![0.5, 0.5],
            },
            exclusions: vec![],
            fd_step: None,
        })
        .unwrap();
        let mesh = Mesh::on_box(chart.clone(), &[-0.5, -0.5], &[0.5, 0.5], 0.1).unwrap();
        for node in [0, 17, 60, mesh.len() - 1] {
            let g = chart.metric_at(&mesh.coords(node)).unwrap();
            for i in 0..2 {
                for j in 0..2 {
                    assert!((mesh.metric(node)[i * 2 + j] - g[(i, j)]).abs() < 1e-12);
                }
            }
        }
        // frame columns are orthonormal
        let node = 33;
        let e = mesh.frame(node);
        let g = mesh.metric(node);
        for a in 0..2 {
            for b in 0..2 {
                let mut s = 0.0;
                for i in 0..2 {
                    for j in 0..2 {
                        s += e[i * 2 + a] * g[i * 2 + j] * e[j * 2 + b];
                    }
                }
                assert!((s - if a == b { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn flat_volume_is_exact() {
        let chart = MetricChart::euclidean_box(vec![0.0, 0.0], vec![2.0, 1.0]);
        let mesh = Mesh::on_box(chart, &[0.0, 0.0], &[2.0, 1.0], 0.1).unwrap();
        assert!((mesh.volume() - 2.0).abs() < 1e-12);
    }
}
