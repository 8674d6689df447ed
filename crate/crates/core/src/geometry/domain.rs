//! Vertex subdomains, mollification and admissible curvature candidates.

use super::{GeometrySpec, Mesh, ScalarField};
use crate::error::{CywError, Result, Stage};
use std::collections::VecDeque;

/// Edge-connected vertex subset split into interior and frontier vertices.
///
/// A vertex of the subset is on the frontier when it has a neighbour outside
/// the subset or lies on the mesh boundary.
#[derive(Clone, Debug, PartialEq)]
pub struct Domain {
    pub mesh_id: u64,
    pub member: Vec<bool>,
    pub vertex_set: Vec<usize>,
    pub interior_set: Vec<usize>,
    pub frontier_set: Vec<usize>,
}

impl Domain {
    /// Smallest dihedral angle, in degrees, over tetrahedra inside the domain
    /// that touch its frontier. The frontier is piecewise flat; this is only
    /// a quality figure for it. `NaN` when no such tetrahedron exists.
    pub fn frontier_min_dihedral(&self, mesh: &Mesh) -> f64 {
        let mut on_frontier = vec![false; self.member.len()];
        for &v in &self.frontier_set {
            on_frontier[v] = true;
        }
        let mut worst = f64::NAN;
        for t in mesh.tets() {
            if t.iter().all(|&v| self.member[v]) && t.iter().any(|&v| on_frontier[v]) {
                let x: Vec<&[f64]> = t.iter().map(|&v| mesh.vertex(v)).collect();
                for (i, j, k, l) in [(0, 1, 2, 3), (0, 2, 1, 3), (0, 3, 1, 2), (1, 2, 0, 3), (1, 3, 0, 2), (2, 3, 0, 1)] {
                    let angle = dihedral(x[i], x[j], x[k], x[l]);
                    if !(angle >= worst) {
                        worst = angle;
                    }
                }
            }
        }
        worst
    }

    /// Builds a domain from a membership mask, checking connectivity and a
    /// nonempty interior.
    pub fn from_mask(mesh: &Mesh, member: Vec<bool>) -> Result<Domain> {
        if member.len() != mesh.vertex_count() {
            return Err(CywError::invalid(Stage::Geometry, "mask length differs from vertex count"));
        }
        let vertex_set: Vec<usize> = (0..member.len()).filter(|&v| member[v]).collect();
        let Some(&start) = vertex_set.first() else {
            return Err(CywError::invalid(Stage::Geometry, "empty selection"));
        };

        let mut seen = vec![false; member.len()];
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        let mut reached = 1;
        while let Some(v) = queue.pop_front() {
            for &w in mesh.neighbors(v) {
                if member[w] && !seen[w] {
                    seen[w] = true;
                    reached += 1;
                    queue.push_back(w);
                }
            }
        }
        if reached != vertex_set.len() {
            return Err(CywError::invalid(
                Stage::Geometry,
                format!("disconnected selection: {reached} of {} vertices reachable", vertex_set.len()),
            ));
        }

        let mut interior_set = Vec::new();
        let mut frontier_set = Vec::new();
        for &v in &vertex_set {
            let open = mesh.is_boundary(v) || mesh.neighbors(v).iter().any(|&w| !member[w]);
            if open {
                frontier_set.push(v);
            } else {
                interior_set.push(v);
            }
        }
        if frontier_set.is_empty() {
            return Err(CywError::invalid(
                Stage::Geometry,
                "selection has no frontier (not a proper subset of a closed mesh)",
            ));
        }
        if interior_set.is_empty() {
            return Err(CywError::invalid(Stage::Geometry, "selection has empty interior"));
        }
        Ok(Domain {
            mesh_id: mesh.id(),
            member,
            vertex_set,
            interior_set,
            frontier_set,
        })
    }

    /// The whole mesh of a bounded preset, frontier = mesh boundary.
    pub fn whole(mesh: &Mesh) -> Result<Domain> {
        Domain::from_mask(mesh, vec![true; mesh.vertex_count()])
    }

    pub fn is_interior(&self, v: usize) -> bool {
        self.member[v] && self.interior_set.binary_search(&v).is_ok()
    }

    /// Removes every vertex within chart distance `eps` of `center` (at least
    /// the nearest one). Returns the punctured domain and the snapped radius,
    /// the smallest distance from `center` to a remaining vertex.
    pub fn puncture(&self, mesh: &Mesh, geom: &GeometrySpec, center: &[f64], eps: f64) -> Result<(Domain, f64)> {
        if !(eps >= 0.0) {
            return Err(CywError::invalid(Stage::Geometry, "puncture radius must be nonnegative"));
        }
        let dist: Vec<f64> = (0..mesh.vertex_count())
            .map(|v| geom.chart.distance(center, mesh.vertex(v)))
            .collect();
        let nearest = self
            .vertex_set
            .iter()
            .copied()
            .min_by(|&a, &b| dist[a].total_cmp(&dist[b]))
            .expect("domain is nonempty");
        let mut member = self.member.clone();
        for &v in &self.vertex_set {
            if dist[v] < eps || v == nearest {
                member[v] = false;
            }
        }
        let snapped = (0..member.len())
            .filter(|&v| member[v])
            .map(|v| dist[v])
            .fold(f64::INFINITY, f64::min);
        Ok((Domain::from_mask(mesh, member)?, snapped))
    }
}

/// Selects the vertices whose chart coordinates satisfy `predicate`.
pub fn extract_subdomain(mesh: &Mesh, predicate: impl Fn(&[f64]) -> bool) -> Result<Domain> {
    let member = (0..mesh.vertex_count()).map(|v| predicate(mesh.vertex(v))).collect();
    Domain::from_mask(mesh, member)
}

fn kernel(s: f64) -> f64 {
    if s >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - s * s)).exp()
    }
}

/// Vertices within chart distance `< width` of `v`, found by a graph
/// traversal restricted to the ball.
fn stencil(mesh: &Mesh, geom: &GeometrySpec, v: usize, width: f64, mark: &mut [u32], stamp: u32) -> Vec<(usize, f64)> {
    let x = mesh.vertex(v);
    let mut out = vec![(v, 0.0)];
    mark[v] = stamp;
    let mut head = 0;
    while head < out.len() {
        let u = out[head].0;
        head += 1;
        for &w in mesh.neighbors(u) {
            if mark[w] == stamp {
                continue;
            }
            mark[w] = stamp;
            let d = geom.chart.distance(x, mesh.vertex(w));
            if d < width {
                out.push((w, d));
            }
        }
    }
    out
}

/// Local average with the standard mollifier kernel `exp(−1/(1−s²))`,
/// weighted by lumped vertex volumes.
pub fn mollify(mesh: &Mesh, geom: &GeometrySpec, field: &ScalarField, width: f64) -> Result<ScalarField> {
    field.check(mesh)?;
    let min_edge = mesh
        .edges()
        .iter()
        .map(|&(a, b)| geom.chart.distance(mesh.vertex(a), mesh.vertex(b)))
        .fold(f64::INFINITY, f64::min);
    if !(width >= 2.0 * min_edge) {
        return Err(CywError::invalid(
            Stage::Geometry,
            format!("mollifier width {width} below twice the minimum edge length {min_edge}"),
        ));
    }
    let mass = geom.lumped_volume_weights(mesh);
    let mut mark = vec![0u32; mesh.vertex_count()];
    let mut out = Vec::with_capacity(mesh.vertex_count());
    for v in 0..mesh.vertex_count() {
        let st = stencil(mesh, geom, v, width, &mut mark, v as u32 + 1);
        let first = field.values[st[0].0];
        if st.iter().all(|&(w, _)| field.values[w] == first) {
            out.push(first);
            continue;
        }
        let mut num = 0.0;
        let mut den = 0.0;
        for &(w, d) in &st {
            let k = kernel(d / width) * mass[w];
            num += k * field.values[w];
            den += k;
        }
        let (lo, hi) = st
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(w, _)| (lo.min(field.values[w]), hi.max(field.values[w])));
        out.push((num / den).clamp(lo, hi));
    }
    ScalarField::new(mesh, out)
}

/// A curvature candidate equal to `level` on the eroded core of `region`.
#[derive(Clone, Debug)]
pub struct AdmissibleFunction {
    pub field: ScalarField,
    pub level: f64,
    pub width: f64,
    pub region: Vec<usize>,
    /// Vertices where the field equals `level` exactly.
    pub core: Vec<usize>,
}

/// `S = base + χ·(level − base)` with `χ` the mollified region indicator.
pub fn construct_admissible_function(
    mesh: &Mesh,
    geom: &GeometrySpec,
    base: &ScalarField,
    region: &Domain,
    level: f64,
    width: f64,
) -> Result<AdmissibleFunction> {
    base.check(mesh)?;
    if region.mesh_id != mesh.id() {
        return Err(CywError::invalid(Stage::Geometry, "region does not belong to this mesh"));
    }
    if !(level > 0.0) {
        return Err(CywError::invalid(Stage::Geometry, "admissible level must be positive"));
    }
    let chi = ScalarField::new(mesh, region.member.iter().map(|&m| if m { 1.0 } else { 0.0 }).collect())?;
    let chi = mollify(mesh, geom, &chi, width)?;
    let core: Vec<usize> = (0..mesh.vertex_count()).filter(|&v| chi.values[v] == 1.0).collect();
    if core.is_empty() {
        return Err(CywError::invalid(Stage::Geometry, "region too small to contain an eroded core"));
    }
    let values = base
        .values
        .iter()
        .zip(&chi.values)
        .map(|(&b, &c)| if c == 1.0 { level } else if c == 0.0 { b } else { b + c * (level - b) })
        .collect();
    Ok(AdmissibleFunction {
        field: ScalarField::new(mesh, values)?,
        level,
        width,
        region: region.vertex_set.clone(),
        core,
    })
}

/// Angle at edge `ab` between the faces `abc` and `abd`, in any ambient
/// dimension.
fn dihedral(a: &[f64], b: &[f64], c: &[f64], d: &[f64]) -> f64 {
    let sub = |p: &[f64], q: &[f64]| -> Vec<f64> { p.iter().zip(q).map(|(x, y)| x - y).collect() };
    let dot = |p: &[f64], q: &[f64]| -> f64 { p.iter().zip(q).map(|(x, y)| x * y).sum() };
    let e = sub(b, a);
    let ee = dot(&e, &e);
    let reject = |p: Vec<f64>| -> Vec<f64> {
        let s = dot(&p, &e) / ee;
        p.iter().zip(&e).map(|(x, y)| x - s * y).collect()
    };
    let (u, w) = (reject(sub(c, a)), reject(sub(d, a)));
    let cos = dot(&u, &w) / (dot(&u, &u) * dot(&w, &w)).sqrt();
    cos.clamp(-1.0, 1.0).acos().to_degrees()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::build_preset;

    fn ball_at(c: [f64; 3], r: f64) -> impl Fn(&[f64]) -> bool {
        move |x: &[f64]| {
            let d: f64 = (0..3)
                .map(|i| {
                    let t = x[i] - c[i];
                    let t = t - t.round();
                    t * t
                })
                .sum();
            d.sqrt() < r
        }
    }

    #[test]
    fn torus_ball_is_a_domain() {
        let (mesh, _) = build_preset("bump-t3", 1).unwrap();
        let d = extract_subdomain(&mesh, ball_at([0.5, 0.5, 0.5], 0.3)).unwrap();
        assert!(!d.interior_set.is_empty());
        assert_eq!(d.interior_set.len() + d.frontier_set.len(), d.vertex_set.len());
    }

    #[test]
    fn regular_tetrahedron_dihedral() {
        let s = 1.0 / 2f64.sqrt();
        let p = [[1.0, 0.0, -s], [-1.0, 0.0, -s], [0.0, 1.0, s], [0.0, -1.0, s]];
        assert!((dihedral(&p[0], &p[1], &p[2], &p[3]) - (1.0f64 / 3.0).acos().to_degrees()).abs() < 1e-12);
        let (mesh, _) = build_preset("flat-t3", 1).unwrap();
        let d = extract_subdomain(&mesh, ball_at([0.5, 0.5, 0.5], 0.3)).unwrap();
        let q = d.frontier_min_dihedral(&mesh);
        assert!(q > 0.0 && q < 90.0);
    }

    #[test]
    fn whole_closed_mesh_is_rejected() {
        let (mesh, _) = build_preset("bump-t3", 0).unwrap();
        assert!(extract_subdomain(&mesh, |_| true).is_err());
    }

    #[test]
    fn disjoint_balls_are_rejected() {
        let (mesh, _) = build_preset("flat-t3", 1).unwrap();
        let a = ball_at([0.25, 0.25, 0.25], 0.12);
        let b = ball_at([0.75, 0.75, 0.75], 0.12);
        let err = extract_subdomain(&mesh, |x| a(x) || b(x)).unwrap_err();
        assert!(err.to_string().contains("disconnected"));
    }

    #[test]
    fn mollified_spike_stays_below_one() {
        let (mesh, geom) = build_preset("flat-t3", 1).unwrap();
        let mut vals = vec![0.0; mesh.vertex_count()];
        vals[7] = 1.0;
        let f = ScalarField::new(&mesh, vals).unwrap();
        let m = mollify(&mesh, &geom, &f, 0.3).unwrap();
        assert!(m.max() < 1.0 && m.min() >= 0.0);
    }

    #[test]
    fn identity_admissible_function() {
        let (mesh, geom) = build_preset("round-s3", 1).unwrap();
        let base = ScalarField::constant(&mesh, 6.0);
        let region = extract_subdomain(&mesh, |x| x[3] > 0.3).unwrap();
        let s = construct_admissible_function(&mesh, &geom, &base, &region, 6.0, 0.6).unwrap();
        assert!(s.field.values.iter().all(|&v| v == 6.0));
    }
}
