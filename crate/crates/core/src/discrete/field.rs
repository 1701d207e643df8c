use std::sync::Arc;

use super::mesh::Mesh;
use crate::error::{LabError, Result};

/// Covariant k-tensor sampled at the mesh nodes, all `n^k` components stored.
/// Component `(a_1, ..., a_k)` sits at offset `sum a_i n^(k-i)` within a node.
#[derive(Debug, Clone)]
pub struct TensorField {
    mesh: Arc<Mesh>,
    degree: usize,
    data: Vec<f64>,
    valid: Vec<bool>,
}

/// Scalar fields are degree-0 tensor fields.
pub type DiscreteField = TensorField;

impl TensorField {
    pub fn zeros(mesh: Arc<Mesh>, degree: usize) -> Self {
        let m = mesh.dim().pow(degree as u32);
        let len = mesh.len();
        let valid = mesh.active().to_vec();
        TensorField {
            mesh,
            degree,
            data: vec![0.0; len * m],
            valid,
        }
    }

    pub fn from_parts(mesh: Arc<Mesh>, degree: usize, data: Vec<f64>, valid: Vec<bool>) -> Result<Self> {
        let m = mesh.dim().pow(degree as u32);
        if data.len() != mesh.len() * m || valid.len() != mesh.len() {
            return Err(LabError::parameter("field storage does not match the mesh"));
        }
        Ok(TensorField {
            mesh,
            degree,
            data,
            valid,
        })
    }

    /// Sample a scalar function at every active node.
    pub fn scalar<F: Fn(&[f64]) -> f64>(mesh: Arc<Mesh>, f: F) -> Self {
        let mut out = TensorField::zeros(mesh, 0);
        for i in 0..out.mesh.len() {
            if out.valid[i] {
                let v = f(&out.mesh.coords(i));
                if v.is_finite() {
                    out.data[i] = v;
                } else {
                    out.valid[i] = false;
                }
            }
        }
        out
    }

    /// Sample a tensor function returning all `n^k` components at a point.
    pub fn sample<F: Fn(&[f64]) -> Vec<f64>>(mesh: Arc<Mesh>, degree: usize, f: F) -> Self {
        let mut out = TensorField::zeros(mesh, degree);
        let m = out.components();
        for i in 0..out.mesh.len() {
            if out.valid[i] {
                let v = f(&out.mesh.coords(i));
                assert_eq!(v.len(), m, "tensor sample has the wrong number of components");
                out.data[i * m..(i + 1) * m].copy_from_slice(&v);
            }
        }
        out
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Components per node.
    pub fn components(&self) -> usize {
        self.mesh.dim().pow(self.degree as u32)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn valid(&self) -> &[bool] {
        &self.valid
    }

    pub fn is_valid(&self, node: usize) -> bool {
        self.valid[node]
    }

    pub fn invalidate(&mut self, node: usize) {
        self.valid[node] = false;
    }

    /// Number of active mesh nodes where this field is flagged.
    pub fn flagged_count(&self) -> usize {
        (0..self.mesh.len())
            .filter(|&i| self.mesh.is_active(i) && !self.valid[i])
            .count()
    }

    pub fn at(&self, node: usize) -> &[f64] {
        let m = self.components();
        &self.data[node * m..(node + 1) * m]
    }

    pub fn at_mut(&mut self, node: usize) -> &mut [f64] {
        let m = self.components();
        &mut self.data[node * m..(node + 1) * m]
    }

    pub fn value(&self, node: usize) -> f64 {
        self.data[node * self.components()]
    }

    /// Pointwise `<A, B>_g` of two fields of the same degree.
    pub fn inner_at(&self, other: &TensorField, node: usize) -> f64 {
        inner(self.mesh.inverse_metric(node), self.mesh.dim(), self.degree, self.at(node), other.at(node))
    }

    pub fn norm_at(&self, node: usize) -> f64 {
        self.inner_at(self, node).max(0.0).sqrt()
    }

    /// Nodewise map of two fields of the same shape; validity is intersected.
    pub fn zip_map<F: Fn(f64, f64) -> f64>(&self, other: &TensorField, f: F) -> Result<TensorField> {
        if self.degree != other.degree || !Arc::ptr_eq(&self.mesh, &other.mesh) {
            return Err(LabError::parameter("fields live on different meshes or have different degrees"));
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| f(*a, *b)).collect();
        let valid = self.valid.iter().zip(&other.valid).map(|(a, b)| *a && *b).collect();
        Ok(TensorField {
            mesh: self.mesh.clone(),
            degree: self.degree,
            data,
            valid,
        })
    }

    pub fn add(&self, other: &TensorField) -> Result<TensorField> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &TensorField) -> Result<TensorField> {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn scale(&self, s: f64) -> TensorField {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|v| *v *= s);
        out
    }

    pub fn map_scalar<F: Fn(f64) -> f64>(&self, f: F) -> TensorField {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|v| *v = f(*v));
        out
    }
}

/// `<A, B>` of two covariant k-tensors with the inverse metric.
pub fn inner(ginv: &[f64], n: usize, k: usize, a: &[f64], b: &[f64]) -> f64 {
    if k == 0 {
        return a[0] * b[0];
    }
    // Raise every index of b in turn, then contract.
    let mut raised = b.to_vec();
    let m = raised.len();
    let mut tmp = vec![0.0; m];
    for pos in 0..k {
        let stride = n.pow((k - 1 - pos) as u32);
        for (idx, slot) in tmp.iter_mut().enumerate() {
            let ai = (idx / stride) % n;
            let base = idx - ai * stride;
            let mut s = 0.0;
            for c in 0..n {
                s += ginv[ai * n + c] * raised[base + c * stride];
            }
            *slot = s;
        }
        std::mem::swap(&mut raised, &mut tmp);
    }
    a.iter().zip(&raised).map(|(x, y)| x * y).sum()
}

/// Sorted index tuples with repetition, i.e. the independent components of a
/// symmetric k-tensor in dimension n.
pub fn multisets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(n: usize, k: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(n, k, i, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(n, k, 0, &mut Vec::new(), &mut out);
    out
}

fn flat_index(idx: &[usize], n: usize) -> usize {
    idx.iter().fold(0, |acc, &i| acc * n + i)
}

fn unflatten(mut flat: usize, n: usize, k: usize) -> Vec<usize> {
    let mut idx = vec![0; k];
    for p in (0..k).rev() {
        idx[p] = flat % n;
        flat /= n;
    }
    idx
}

/// Fully symmetric covariant k-tensor field stored by multiset components.
#[derive(Debug, Clone)]
pub struct SymTensorField {
    mesh: Arc<Mesh>,
    degree: usize,
    keys: Vec<Vec<usize>>,
    data: Vec<f64>,
    valid: Vec<bool>,
}

impl SymTensorField {
    /// Symmetrization `s_k`: every stored component is the average of the full
    /// tensor over the permutations of its indices.
    pub fn from_full(t: &TensorField) -> Self {
        let n = t.mesh.dim();
        let k = t.degree;
        let keys = multisets(n, k);
        let m_full = t.components();
        // For each multiset, the list of flat indices of its permutations.
        let mut perms: Vec<Vec<usize>> = vec![Vec::new(); keys.len()];
        for flat in 0..m_full {
            let mut idx = unflatten(flat, n, k);
            idx.sort_unstable();
            let slot = keys.iter().position(|kk| *kk == idx).expect("multiset");
            perms[slot].push(flat);
        }
        let len = t.mesh.len();
        let mut data = vec![0.0; len * keys.len()];
        for node in 0..len {
            let src = t.at(node);
            for (s, p) in perms.iter().enumerate() {
                data[node * keys.len() + s] = p.iter().map(|&f| src[f]).sum::<f64>() / p.len() as f64;
            }
        }
        SymTensorField {
            mesh: t.mesh.clone(),
            degree: k,
            keys,
            data,
            valid: t.valid.clone(),
        }
    }

    pub fn to_full(&self) -> TensorField {
        let n = self.mesh.dim();
        let k = self.degree;
        let m_full = n.pow(k as u32);
        let slot: Vec<usize> = (0..m_full)
            .map(|flat| {
                let mut idx = unflatten(flat, n, k);
                idx.sort_unstable();
                self.keys.iter().position(|kk| *kk == idx).expect("multiset")
            })
            .collect();
        let len = self.mesh.len();
        let ks = self.keys.len();
        let mut data = vec![0.0; len * m_full];
        for node in 0..len {
            for (flat, &s) in slot.iter().enumerate() {
                data[node * m_full + flat] = self.data[node * ks + s];
            }
        }
        TensorField {
            mesh: self.mesh.clone(),
            degree: k,
            data,
            valid: self.valid.clone(),
        }
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn keys(&self) -> &[Vec<usize>] {
        &self.keys
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn valid(&self) -> &[bool] {
        &self.valid
    }

    /// Stored component for an index tuple in any order.
    pub fn component(&self, node: usize, idx: &[usize]) -> f64 {
        let mut s = idx.to_vec();
        s.sort_unstable();
        let slot = self.keys.iter().position(|k| *k == s).expect("index tuple of the right degree");
        self.data[node * self.keys.len() + slot]
    }

    pub fn norm_at(&self, node: usize) -> f64 {
        self.to_full_at(node).1
    }

    fn to_full_at(&self, node: usize) -> (Vec<f64>, f64) {
        let n = self.mesh.dim();
        let k = self.degree;
        let full: Vec<f64> = (0..n.pow(k as u32))
            .map(|flat| self.component(node, &unflatten(flat, n, k)))
            .collect();
        let nrm = inner(self.mesh.inverse_metric(node), n, k, &full, &full).max(0.0).sqrt();
        (full, nrm)
    }
}

pub(crate) fn index_of(idx: &[usize], n: usize) -> usize {
    flat_index(idx, n)
}

pub(crate) fn indices_of(flat: usize, n: usize, k: usize) -> Vec<usize> {
    unflatten(flat, n, k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discrete::mesh::Mesh;
    use crate::geometry::MetricChart;

    fn flat_mesh() -> Arc<Mesh> {
        let chart = MetricChart::euclidean_box(vec![0.0, 0.0], vec![1.0, 1.0]);
        Arc::new(Mesh::on_box(chart, &[0.0, 0.0], &[1.0, 1.0], 0.25).unwrap())
    }

    #[test]
    fn multiset_counts() {
        assert_eq!(multisets(2, 2).len(), 3);
        assert_eq!(multisets(3, 3).len(), 10);
        assert_eq!(multisets(2, 0), vec![Vec::<usize>::new()]);
    }

    #[test]
    fn symmetrize_e1_e2() {
        let mesh = flat_mesh();
        let t = TensorField::sample(mesh, 2, |_| vec![0.0, 1.0, 0.0, 0.0]);
        let s = SymTensorField::from_full(&t).to_full();
        assert_eq!(s.at(3), &[0.0, 0.5, 0.5, 0.0]);
    }

    #[test]
    fn inner_uses_inverse_metric() {
        let ginv = [4.0, 0.0, 0.0, 1.0];
        assert_eq!(inner(&ginv, 2, 1, &[1.0, 0.0], &[1.0, 0.0]), 4.0);
        assert_eq!(inner(&ginv, 2, 2, &[1.0, 0.0, 0.0, 0.0], &[1.0, 0.0, 0.0, 0.0]), 16.0);
    }
}
