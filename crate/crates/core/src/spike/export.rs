use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::profile::DISK_RADIUS;
use super::Profile;
use crate::error::{LabError, Result};

/// Height field over a square grid covering D, one `x,y,z` row per node
/// inside the punctured disk.
pub fn height_field_csv(profile: &dyn Profile, per_axis: usize) -> Result<String> {
    if profile.dim() != 2 {
        return Err(LabError::parameter("height field export needs n = 2"));
    }
    let mut out = String::from("x,y,z\n");
    let h = 2.0 * DISK_RADIUS / (per_axis.max(2) - 1) as f64;
    for i in 0..per_axis {
        for j in 0..per_axis {
            let x = [-DISK_RADIUS + i as f64 * h, -DISK_RADIUS + j as f64 * h];
            let r = crate::util::norm(&x);
            if r == 0.0 || r > DISK_RADIUS {
                continue;
            }
            let z = profile.value(&x)?;
            writeln!(out, "{},{},{}", x[0], x[1], z).unwrap();
        }
    }
    Ok(out)
}

/// Closed triangulated bigraph `z = +-profile(x)` over D as ASCII OBJ. The
/// two apices sit at `(0, 0, +-1)`, the limit of the profile at the origin.
pub fn bigraph_obj(profile: &dyn Profile, rings: usize, sectors: usize) -> Result<String> {
    if profile.dim() != 2 {
        return Err(LabError::parameter("OBJ export needs n = 2"));
    }
    if rings < 2 || sectors < 3 {
        return Err(LabError::parameter("need at least 2 rings and 3 sectors"));
    }
    let mut out = String::from("# bigraph over the disk of radius 2 - sqrt(3)\n");
    let mut verts: Vec<[f64; 3]> = vec![[0.0, 0.0, 1.0], [0.0, 0.0, -1.0]];
    // upper[i][k] and lower[i][k] for rings 1..rings; the last ring is shared.
    let mut upper = vec![vec![0usize; sectors]; rings + 1];
    let mut lower = vec![vec![0usize; sectors]; rings + 1];
    for i in 1..=rings {
        let rho = DISK_RADIUS * i as f64 / rings as f64;
        for k in 0..sectors {
            let th = 2.0 * std::f64::consts::PI * k as f64 / sectors as f64;
            let (x, y) = (rho * th.cos(), rho * th.sin());
            if i == rings {
                verts.push([x, y, 0.0]);
                upper[i][k] = verts.len() - 1;
                lower[i][k] = verts.len() - 1;
            } else {
                let z = profile.value(&[x, y])?;
                verts.push([x, y, z]);
                upper[i][k] = verts.len() - 1;
                verts.push([x, y, -z]);
                lower[i][k] = verts.len() - 1;
            }
        }
    }
    let mut faces: Vec<[usize; 3]> = Vec::new();
    for k in 0..sectors {
        let k1 = (k + 1) % sectors;
        faces.push([0, upper[1][k], upper[1][k1]]);
        faces.push([1, lower[1][k1], lower[1][k]]);
        for i in 1..rings {
            let (a, b, c, d) = (upper[i][k], upper[i][k1], upper[i + 1][k], upper[i + 1][k1]);
            faces.push([a, c, d]);
            faces.push([a, d, b]);
            let (a, b, c, d) = (lower[i][k], lower[i][k1], lower[i + 1][k], lower[i + 1][k1]);
            faces.push([a, d, c]);
            faces.push([a, b, d]);
        }
    }
    for v in &verts {
        writeln!(out, "v {} {} {}", v[0], v[1], v[2]).unwrap();
    }
    for f in &faces {
        writeln!(out, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1).unwrap();
    }
    Ok(out)
}

/// Summary of an OBJ triangulation check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjStats {
    pub vertices: usize,
    pub faces: usize,
    pub boundary_edges: usize,
    pub overused_edges: usize,
    pub degenerate_faces: usize,
    pub closed: bool,
}

impl ObjStats {
    /// Every edge shared by at most two faces and no degenerate faces.
    pub fn is_manifold(&self) -> bool {
        self.overused_edges == 0 && self.degenerate_faces == 0
    }
}

/// Parse an ASCII OBJ and check edge manifoldness and face degeneracy.
pub fn check_obj(text: &str) -> Result<ObjStats> {
    let mut verts: Vec<[f64; 3]> = Vec::new();
    let mut faces: Vec<Vec<usize>> = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let mut it = line.split_whitespace();
        match it.next() {
            Some("v") => {
                let c: Vec<f64> = it
                    .take(3)
                    .map(|s| s.parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|e| LabError::Format(format!("line {}: {e}", ln + 1)))?;
                if c.len() != 3 {
                    return Err(LabError::Format(format!("line {}: short vertex", ln + 1)));
                }
                verts.push([c[0], c[1], c[2]]);
            }
            Some("f") => {
                let idx: Vec<usize> = it
                    .map(|s| s.split('/').next().unwrap_or("").parse::<usize>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|e| LabError::Format(format!("line {}: {e}", ln + 1)))?;
                if idx.len() < 3 || idx.iter().any(|&i| i == 0 || i > verts.len()) {
                    return Err(LabError::Format(format!("line {}: bad face", ln + 1)));
                }
                faces.push(idx.into_iter().map(|i| i - 1).collect());
            }
            _ => {}
        }
    }
    let mut edges: HashMap<(usize, usize), usize> = HashMap::new();
    let mut degenerate = 0;
    for f in &faces {
        let m = f.len();
        for i in 0..m {
            let (a, b) = (f[i], f[(i + 1) % m]);
            *edges.entry((a.min(b), a.max(b))).or_default() += 1;
        }
        let (p, q, r) = (verts[f[0]], verts[f[1]], verts[f[2]]);
        let u = [q[0] - p[0], q[1] - p[1], q[2] - p[2]];
        let v = [r[0] - p[0], r[1] - p[1], r[2] - p[2]];
        let c = [
            u[1] * v[2] - u[2] * v[1],
            u[2] * v[0] - u[0] * v[2],
            u[0] * v[1] - u[1] * v[0],
        ];
        let area = 0.5 * (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt();
        let distinct = f.iter().collect::<std::collections::HashSet<_>>().len() == m;
        if !distinct || area < 1e-14 {
            degenerate += 1;
        }
    }
    let boundary = edges.values().filter(|&&c| c == 1).count();
    let over = edges.values().filter(|&&c| c > 2).count();
    Ok(ObjStats {
        vertices: verts.len(),
        faces: faces.len(),
        boundary_edges: boundary,
        overused_edges: over,
        degenerate_faces: degenerate,
        closed: boundary == 0 && over == 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spike::BaseProfile;

    #[test]
    fn base_bigraph_is_closed_manifold() {
        let obj = bigraph_obj(&BaseProfile::new(2), 12, 24).unwrap();
        let st = check_obj(&obj).unwrap();
        assert!(st.is_manifold(), "{st:?}");
        assert!(st.closed);
        assert_eq!(st.faces, 2 * 24 + 4 * 24 * 11);
    }

    #[test]
    fn detects_overused_and_degenerate() {
        let bad = "v 0 0 0\nv 1 0 0\nv 0 1 0\nv 0 0 1\nf 1 2 3\nf 1 2 4\nf 2 1 3\nf 1 1 2\n";
        let st = check_obj(bad).unwrap();
        assert!(st.overused_edges > 0);
        assert!(st.degenerate_faces > 0);
        assert!(!st.is_manifold());
    }

    #[test]
    fn csv_has_header_and_rows() {
        let csv = height_field_csv(&BaseProfile::new(2), 11).unwrap();
        assert!(csv.starts_with("x,y,z\n"));
        assert!(csv.lines().count() > 40);
    }
}
