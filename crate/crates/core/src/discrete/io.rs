//! Field persistence: CSV grids and a compact little-endian binary grid.
//!
//! Binary layout: magic `SLGRID1\0`, u32 dim, u32 degree, then per axis
//! u64 count, f64 lo, f64 step, u8 periodic; then one mask byte per node and
//! the components as f64.

use std::fmt::Write as _;
use std::sync::Arc;

use super::field::TensorField;
use super::mesh::{Lattice, Mesh};
use crate::error::{LabError, Result};

const MAGIC: &[u8; 8] = b"SLGRID1\0";

/// Raw grid contents, independent of any chart.
#[derive(Debug, Clone, PartialEq)]
pub struct GridData {
    pub lattice: Lattice,
    pub degree: usize,
    pub valid: Vec<bool>,
    pub data: Vec<f64>,
}

impl GridData {
    pub fn from_field(f: &TensorField) -> Self {
        GridData {
            lattice: f.mesh().lattice().clone(),
            degree: f.degree(),
            valid: f.valid().to_vec(),
            data: f.data().to_vec(),
        }
    }

    /// Attach the grid to a mesh with the same lattice.
    pub fn into_field(self, mesh: Arc<Mesh>) -> Result<TensorField> {
        let l = mesh.lattice();
        let same = l.counts == self.lattice.counts
            && l.periodic == self.lattice.periodic
            && l.lo.iter().zip(&self.lattice.lo).all(|(a, b)| (a - b).abs() <= 1e-12 * a.abs().max(1.0))
            && l.step.iter().zip(&self.lattice.step).all(|(a, b)| (a - b).abs() <= 1e-12 * a.abs().max(1.0));
        if !same {
            return Err(LabError::Format("grid lattice does not match the mesh".into()));
        }
        let valid = self
            .valid
            .iter()
            .zip(mesh.active())
            .map(|(a, b)| *a && *b)
            .collect();
        TensorField::from_parts(mesh, self.degree, self.data, valid)
    }
}

/// CSV with one row per node: coordinates, validity flag, components.
pub fn to_csv(f: &TensorField) -> String {
    let n = f.mesh().dim();
    let m = f.components();
    let mut out = String::new();
    let cols: Vec<String> = (0..n)
        .map(|a| format!("x{a}"))
        .chain(std::iter::once("valid".to_string()))
        .chain((0..m).map(|c| format!("c{c}")))
        .collect();
    out.push_str(&cols.join(","));
    out.push('\n');
    for node in 0..f.mesh().len() {
        let x = f.mesh().coords(node);
        for v in &x {
            write!(out, "{v},").unwrap();
        }
        write!(out, "{}", u8::from(f.is_valid(node))).unwrap();
        for v in f.at(node) {
            write!(out, ",{v}").unwrap();
        }
        out.push('\n');
    }
    out
}

/// Read CSV written by [`to_csv`] back into a field on `mesh`.
pub fn from_csv(text: &str, mesh: Arc<Mesh>, degree: usize) -> Result<TensorField> {
    let n = mesh.dim();
    let m = n.pow(degree as u32);
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| LabError::Format("empty CSV".into()))?;
    if header.split(',').count() != n + 1 + m {
        return Err(LabError::Format(format!("CSV header has the wrong column count: {header}")));
    }
    let mut data = vec![0.0; mesh.len() * m];
    let mut valid = vec![false; mesh.len()];
    let mut rows = 0;
    for (node, line) in lines.enumerate() {
        if node >= mesh.len() {
            return Err(LabError::Format("CSV has more rows than mesh nodes".into()));
        }
        let vals: Vec<&str> = line.split(',').collect();
        if vals.len() != n + 1 + m {
            return Err(LabError::Format(format!("row {} has {} columns", node + 1, vals.len())));
        }
        let parse = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| LabError::Format(format!("row {}: {e}", node + 1)))
        };
        valid[node] = vals[n].trim() == "1" && mesh.is_active(node);
        for c in 0..m {
            data[node * m + c] = parse(vals[n + 1 + c])?;
        }
        rows += 1;
    }
    if rows != mesh.len() {
        return Err(LabError::Format(format!("CSV has {rows} rows, mesh has {}", mesh.len())));
    }
    TensorField::from_parts(mesh, degree, data, valid)
}

pub fn to_binary(f: &TensorField) -> Vec<u8> {
    let g = GridData::from_field(f);
    let mut out = Vec::with_capacity(64 + g.data.len() * 8 + g.valid.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(g.lattice.dim() as u32).to_le_bytes());
    out.extend_from_slice(&(g.degree as u32).to_le_bytes());
    for a in 0..g.lattice.dim() {
        out.extend_from_slice(&(g.lattice.counts[a] as u64).to_le_bytes());
        out.extend_from_slice(&g.lattice.lo[a].to_le_bytes());
        out.extend_from_slice(&g.lattice.step[a].to_le_bytes());
        out.push(u8::from(g.lattice.periodic[a]));
    }
    out.extend(g.valid.iter().map(|&v| u8::from(v)));
    for v in &g.data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(LabError::Format("truncated grid file".into()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

pub fn from_binary(bytes: &[u8]) -> Result<GridData> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err(LabError::Format("not a grid file (bad magic)".into()));
    }
    let dim = r.u32()? as usize;
    let degree = r.u32()? as usize;
    if dim == 0 || dim > 8 || degree > 8 {
        return Err(LabError::Format(format!("implausible header: dim {dim}, degree {degree}")));
    }
    let mut lattice = Lattice {
        lo: Vec::new(),
        step: Vec::new(),
        counts: Vec::new(),
        periodic: Vec::new(),
    };
    for _ in 0..dim {
        lattice.counts.push(r.u64()? as usize);
        lattice.lo.push(r.f64()?);
        lattice.step.push(r.f64()?);
        lattice.periodic.push(r.take(1)?[0] != 0);
    }
    let len = lattice.len();
    let m = dim.pow(degree as u32);
    let valid = r.take(len)?.iter().map(|&b| b != 0).collect();
    let mut data = Vec::with_capacity(len * m);
    for _ in 0..len * m {
        data.push(r.f64()?);
    }
    if r.pos != bytes.len() {
        return Err(LabError::Format("trailing bytes after grid data".into()));
    }
    Ok(GridData {
        lattice,
        degree,
        valid,
        data,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::MetricChart;

    fn field() -> TensorField {
        let chart = MetricChart::euclidean_box(vec![0.0, 0.0], vec![1.0, 1.0]);
        let mesh = Arc::new(Mesh::on_box(chart, &[0.0, 0.0], &[1.0, 1.0], 0.25).unwrap());
        TensorField::sample(mesh, 1, |x| vec![x[0].sin(), x[0] * x[1]])
    }

    #[test]
    fn binary_roundtrip() {
        let f = field();
        let g = from_binary(&to_binary(&f)).unwrap();
        let back = g.into_field(f.mesh().clone()).unwrap();
        assert_eq!(back.data(), f.data());
        assert_eq!(back.valid(), f.valid());
    }

    #[test]
    fn csv_roundtrip() {
        let f = field();
        let back = from_csv(&to_csv(&f), f.mesh().clone(), 1).unwrap();
        assert_eq!(back.data(), f.data());
    }

    #[test]
    fn corrupt_binary_rejected() {
        let f = field();
        let mut b = to_binary(&f);
        b[0] = b'X';
        assert!(from_binary(&b).is_err());
        let b = to_binary(&f);
        assert!(from_binary(&b[..b.len() - 3]).is_err());
    }
}
