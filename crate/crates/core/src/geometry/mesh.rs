//! Simplicial 3-complexes with boundary marking.

use crate::error::{CywError, Result, Stage};
use std::collections::HashMap;

/// Interior or boundary marker for a vertex.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VertexFlag {
    Interior,
    Boundary,
}

/// A boundary triangle together with the tetrahedron it closes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BoundaryFace {
    pub vertices: [usize; 3],
    /// +1 when `vertices` is counter-clockwise seen from outside, −1 otherwise.
    pub orientation: i8,
    pub tet: usize,
    /// Local index (0..4) of the tetrahedron vertex opposite to the face.
    pub opposite: usize,
}

/// Tetrahedral mesh. Vertex coordinates live in a chart of dimension `dim`
/// (3 for Euclidean and periodic charts, 4 for the embedded round sphere).
#[derive(Clone, Debug)]
pub struct Mesh {
    id: u64,
    dim: usize,
    coords: Vec<f64>,
    tets: Vec<[usize; 4]>,
    boundary_faces: Vec<BoundaryFace>,
    flags: Vec<VertexFlag>,
    period: Option<f64>,
    adj_ptr: Vec<usize>,
    adj: Vec<usize>,
}

const FACES: [[usize; 3]; 4] = [[1, 2, 3], [0, 3, 2], [0, 1, 3], [0, 2, 1]];

impl Mesh {
    /// Builds a mesh from coordinates and tetrahedra. Boundary faces are
    /// the triangles that belong to exactly one tetrahedron.
    pub fn new(dim: usize, coords: Vec<f64>, tets: Vec<[usize; 4]>, period: Option<f64>) -> Result<Self> {
        if dim == 0 || coords.len() % dim != 0 {
            return Err(CywError::invalid(Stage::Geometry, "coordinate array length is not a multiple of dim"));
        }
        let nv = coords.len() / dim;
        if nv == 0 || tets.is_empty() {
            return Err(CywError::invalid(Stage::Geometry, "mesh needs at least one vertex and one tetrahedron"));
        }
        for (t, tet) in tets.iter().enumerate() {
            for (i, &v) in tet.iter().enumerate() {
                if v >= nv {
                    return Err(CywError::invalid(Stage::Geometry, format!("tetrahedron {t} references vertex {v} out of range")));
                }
                if tet[..i].contains(&v) {
                    return Err(CywError::invalid(Stage::Geometry, format!("tetrahedron {t} repeats vertex {v}")));
                }
            }
        }

        let mut face_count: HashMap<[usize; 3], (usize, usize, usize)> = HashMap::new();
        for (t, tet) in tets.iter().enumerate() {
            for (k, f) in FACES.iter().enumerate() {
                let mut key = [tet[f[0]], tet[f[1]], tet[f[2]]];
                key.sort_unstable();
                let e = face_count.entry(key).or_insert((0, t, k));
                e.0 += 1;
            }
        }
        let mut boundary_faces = Vec::new();
        for (t, tet) in tets.iter().enumerate() {
            for (k, f) in FACES.iter().enumerate() {
                let mut key = [tet[f[0]], tet[f[1]], tet[f[2]]];
                key.sort_unstable();
                let (count, _, _) = face_count[&key];
                if count > 2 {
                    return Err(CywError::invalid(Stage::Geometry, format!("face {key:?} shared by {count} tetrahedra")));
                }
                if count == 1 {
                    boundary_faces.push(BoundaryFace {
                        vertices: [tet[f[0]], tet[f[1]], tet[f[2]]],
                        orientation: 1,
                        tet: t,
                        opposite: k,
                    });
                }
            }
        }

        let mut flags = vec![VertexFlag::Interior; nv];
        for f in &boundary_faces {
            for &v in &f.vertices {
                flags[v] = VertexFlag::Boundary;
            }
        }

        let mut neigh: Vec<Vec<usize>> = vec![Vec::new(); nv];
        for tet in &tets {
            for i in 0..4 {
                for j in 0..4 {
                    if i != j {
                        neigh[tet[i]].push(tet[j]);
                    }
                }
            }
        }
        let mut adj_ptr = Vec::with_capacity(nv + 1);
        let mut adj = Vec::new();
        adj_ptr.push(0);
        for list in neigh.iter_mut() {
            list.sort_unstable();
            list.dedup();
            adj.extend_from_slice(list);
            adj_ptr.push(adj.len());
        }

        let mut mesh = Mesh {
            id: 0,
            dim,
            coords,
            tets,
            boundary_faces,
            flags,
            period,
            adj_ptr,
            adj,
        };
        mesh.id = mesh.content_hash();
        Ok(mesh)
    }

    /// Deterministic FNV-1a fingerprint of coordinates and topology.
    fn content_hash(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut eat = |bytes: &[u8]| {
            for b in bytes {
                h ^= u64::from(*b);
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        };
        eat(&(self.dim as u64).to_le_bytes());
        for c in &self.coords {
            eat(&c.to_bits().to_le_bytes());
        }
        for t in &self.tets {
            for v in t {
                eat(&(*v as u64).to_le_bytes());
            }
        }
        h
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vertex_count(&self) -> usize {
        self.flags.len()
    }

    pub fn vertex(&self, v: usize) -> &[f64] {
        &self.coords[v * self.dim..(v + 1) * self.dim]
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn tets(&self) -> &[[usize; 4]] {
        &self.tets
    }

    pub fn boundary_faces(&self) -> &[BoundaryFace] {
        &self.boundary_faces
    }

    pub fn flags(&self) -> &[VertexFlag] {
        &self.flags
    }

    pub fn is_boundary(&self, v: usize) -> bool {
        self.flags[v] == VertexFlag::Boundary
    }

    pub fn is_closed(&self) -> bool {
        self.boundary_faces.is_empty()
    }

    pub fn period(&self) -> Option<f64> {
        self.period
    }

    /// Vertices sharing an edge with `v`, sorted ascending.
    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adj[self.adj_ptr[v]..self.adj_ptr[v + 1]]
    }

    /// Undirected edges (i < j), sorted.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.adj.len() / 2);
        for v in 0..self.vertex_count() {
            for &w in self.neighbors(v) {
                if v < w {
                    out.push((v, w));
                }
            }
        }
        out
    }

    /// Difference `vertex(b) − vertex(a)` with the periodic minimum-image
    /// convention applied when the mesh is periodic.
    pub fn delta(&self, a: usize, b: usize) -> Vec<f64> {
        let (pa, pb) = (self.vertex(a), self.vertex(b));
        pa.iter()
            .zip(pb)
            .map(|(x, y)| {
                let mut d = y - x;
                if let Some(p) = self.period {
                    d -= p * (d / p).round();
                }
                d
            })
            .collect()
    }

    /// Chart-coordinate edge length (periodic minimum image when applicable).
    pub fn edge_length(&self, a: usize, b: usize) -> f64 {
        self.delta(a, b).iter().map(|d| d * d).sum::<f64>().sqrt()
    }

    pub fn min_edge_length(&self) -> f64 {
        self.edges()
            .iter()
            .map(|&(a, b)| self.edge_length(a, b))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max_edge_length(&self) -> f64 {
        self.edges()
            .iter()
            .map(|&(a, b)| self.edge_length(a, b))
            .fold(0.0, f64::max)
    }

    /// Replaces boundary orientation flags; used by geometry construction,
    /// which knows the chart needed to decide outwardness.
    pub(crate) fn set_face_orientations(&mut self, signs: &[i8]) {
        for (f, s) in self.boundary_faces.iter_mut().zip(signs) {
            f.orientation = *s;
        }
    }

    /// Returns a mesh with vertices relabelled: new index of old vertex `v`
    /// is `perm[v]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Mesh> {
        let nv = self.vertex_count();
        if perm.len() != nv {
            return Err(CywError::invalid(Stage::Geometry, "permutation length differs from vertex count"));
        }
        let mut seen = vec![false; nv];
        for &p in perm {
            if p >= nv || seen[p] {
                return Err(CywError::invalid(Stage::Geometry, "not a permutation"));
            }
            seen[p] = true;
        }
        let mut coords = vec![0.0; self.coords.len()];
        for v in 0..nv {
            coords[perm[v] * self.dim..(perm[v] + 1) * self.dim].copy_from_slice(self.vertex(v));
        }
        let tets = self.tets.iter().map(|t| [perm[t[0]], perm[t[1]], perm[t[2]], perm[t[3]]]).collect();
        Mesh::new(self.dim, coords, tets, self.period)
    }
}

/// Local vertex triples of the four faces; face `k` is opposite vertex `k`
/// and listed so that its normal points away from vertex `k` for a
/// positively oriented tetrahedron.
pub fn tet_faces() -> [[usize; 3]; 4] {
    FACES
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_tet() -> Mesh {
        let coords = vec![0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0];
        Mesh::new(3, coords, vec![[0, 1, 2, 3]], None).unwrap()
    }

    #[test]
    fn single_tet_has_four_boundary_faces() {
        let m = single_tet();
        assert_eq!(m.boundary_faces().len(), 4);
        assert!(m.flags().iter().all(|f| *f == VertexFlag::Boundary));
        assert_eq!(m.neighbors(0), &[1, 2, 3]);
        assert_eq!(m.edges().len(), 6);
    }

    #[test]
    fn rejects_out_of_range_vertex() {
        let coords = vec![0.0; 9];
        assert!(Mesh::new(3, coords, vec![[0, 1, 2, 5]], None).is_err());
    }

    #[test]
    fn periodic_delta_uses_minimum_image() {
        let coords = vec![0.05, 0.0, 0.0, 0.95, 0.0, 0.0, 0.5, 0.5, 0.0, 0.5, 0.0, 0.5];
        let m = Mesh::new(3, coords, vec![[0, 1, 2, 3]], Some(1.0)).unwrap();
        let d = m.delta(0, 1);
        assert!((d[0] + 0.1).abs() < 1e-12);
    }

    #[test]
    fn identical_content_gives_identical_id() {
        assert_eq!(single_tet().id(), single_tet().id());
    }
}
