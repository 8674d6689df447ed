//! Meshes, analytic geometry presets and admissible curvature candidates.
//!
//! The metric is stored per quadrature point in the reference coordinates of
//! each tetrahedron: `g_ref = c(x)·JᵀJ` where `J` is the chart Jacobian and
//! `c(x)·δ` the chart metric. Assembly then needs no chart knowledge.

pub mod chart;
pub mod domain;
pub mod io;
pub mod mesh;
pub mod presets;
pub mod quadrature;

pub use chart::{Chart, CubeMap};
pub use domain::{construct_admissible_function, extract_subdomain, mollify, AdmissibleFunction, Domain};
pub use mesh::{BoundaryFace, Mesh, VertexFlag};
pub use presets::{Model, PresetId, PresetParams};

use crate::error::{CywError, Result, Stage};
use quadrature::{face_point_in_tet, TET_POINTS, TET_WEIGHT, TRI_POINTS, TRI_WEIGHT};

/// `a = 4(n−1)/(n−2)` and `p = 2n/(n−2)` for dimension `n ≥ 3`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DimensionConstants {
    pub n: u32,
    pub a: f64,
    pub p: f64,
}

impl DimensionConstants {
    pub fn new(n: u32) -> Result<Self> {
        if n < 3 {
            return Err(CywError::invalid(Stage::Geometry, format!("dimension {n} < 3")));
        }
        let nf = f64::from(n);
        Ok(DimensionConstants {
            n,
            a: 4.0 * (nf - 1.0) / (nf - 2.0),
            p: 2.0 * nf / (nf - 2.0),
        })
    }

    pub fn three() -> Self {
        DimensionConstants { n: 3, a: 8.0, p: 6.0 }
    }

    /// Coefficient `2/(p−2)` of the Robin operator.
    pub fn robin_coefficient(&self) -> f64 {
        2.0 / (self.p - 2.0)
    }
}

/// One real value per mesh vertex.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    pub values: Vec<f64>,
    pub mesh_id: u64,
}

impl ScalarField {
    pub fn new(mesh: &Mesh, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.vertex_count() {
            return Err(CywError::invalid(
                Stage::Geometry,
                format!("field has {} values, mesh has {} vertices", values.len(), mesh.vertex_count()),
            ));
        }
        Ok(ScalarField {
            values,
            mesh_id: mesh.id(),
        })
    }

    pub fn constant(mesh: &Mesh, c: f64) -> Self {
        ScalarField {
            values: vec![c; mesh.vertex_count()],
            mesh_id: mesh.id(),
        }
    }

    pub fn from_fn(mesh: &Mesh, f: impl Fn(&[f64]) -> f64) -> Self {
        ScalarField {
            values: (0..mesh.vertex_count()).map(|v| f(mesh.vertex(v))).collect(),
            mesh_id: mesh.id(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn check(&self, mesh: &Mesh) -> Result<()> {
        if self.mesh_id != mesh.id() || self.values.len() != mesh.vertex_count() {
            return Err(CywError::invalid(Stage::Geometry, "field does not belong to this mesh"));
        }
        Ok(())
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Symmetric 3×3 matrix stored as `[g00, g01, g02, g11, g12, g22]`.
pub type Sym3 = [f64; 6];

pub fn sym_full(s: &Sym3) -> [[f64; 3]; 3] {
    [[s[0], s[1], s[2]], [s[1], s[3], s[4]], [s[2], s[4], s[5]]]
}

pub fn sym_det(s: &Sym3) -> f64 {
    s[0] * (s[3] * s[5] - s[4] * s[4]) - s[1] * (s[1] * s[5] - s[4] * s[2]) + s[2] * (s[1] * s[4] - s[3] * s[2])
}

pub fn sym_inverse(s: &Sym3) -> Sym3 {
    let d = sym_det(s);
    [
        (s[3] * s[5] - s[4] * s[4]) / d,
        (s[2] * s[4] - s[1] * s[5]) / d,
        (s[1] * s[4] - s[2] * s[3]) / d,
        (s[0] * s[5] - s[2] * s[2]) / d,
        (s[1] * s[2] - s[0] * s[4]) / d,
        (s[0] * s[3] - s[1] * s[1]) / d,
    ]
}

/// `xᵀ S y`.
pub fn sym_form(s: &Sym3, x: &[f64; 3], y: &[f64; 3]) -> f64 {
    let m = sym_full(s);
    (0..3).map(|i| (0..3).map(|j| x[i] * m[i][j] * y[j]).sum::<f64>()).sum()
}

fn sym_positive_definite(s: &Sym3) -> bool {
    s[0] > 0.0 && s[0] * s[3] - s[1] * s[1] > 0.0 && sym_det(s) > 0.0
}

/// Per-quadrature-point metric data, curvature coefficients and the optional
/// conformally flat factor.
#[derive(Clone, Debug)]
pub struct GeometrySpec {
    pub preset_id: String,
    pub mesh_id: u64,
    pub chart: Chart,
    /// Reference-coordinate metric at the four points of each tetrahedron.
    pub metric: Vec<[Sym3; 4]>,
    /// `√det` of `metric`.
    pub volume_density: Vec<[f64; 4]>,
    /// Scalar curvature at vertices.
    pub scalar_curvature: ScalarField,
    /// Scalar curvature at tetrahedron quadrature points (used by assembly).
    pub curvature_qp: Vec<[f64; 4]>,
    /// Mean curvature on boundary vertices, `None` elsewhere.
    pub mean_curvature: Vec<Option<f64>>,
    /// Mean curvature at the three points of each boundary face.
    pub mean_curvature_qp: Vec<[f64; 3]>,
    /// Surface density at boundary-face points relative to the reference
    /// triangle spanned by the face's first vertex.
    pub face_density: Vec<[f64; 3]>,
    pub conformal_flat_factor: Option<ScalarField>,
    pub model: Option<Model>,
    pub marked_region: Option<Vec<bool>>,
    pub warnings: Vec<String>,
}

impl GeometrySpec {
    /// Samples the closed-form model at all quadrature points.
    pub fn from_model(mesh: &Mesh, chart: Chart, model: Model, preset_id: &str) -> Result<Self> {
        let nt = mesh.tets().len();
        let mut metric = Vec::with_capacity(nt);
        let mut density = Vec::with_capacity(nt);
        let mut curvature_qp = Vec::with_capacity(nt);
        for t in 0..nt {
            let mut gm = [[0.0; 6]; 4];
            let mut dens = [0.0; 4];
            let mut rq = [0.0; 4];
            for (q, b) in TET_POINTS.iter().enumerate() {
                let (g, x) = sample_metric(&chart, &model, mesh, t, b);
                let det = sym_det(&g);
                if !(det > 0.0) || !sym_positive_definite(&g) {
                    return Err(CywError::invalid(Stage::Geometry, format!("singular metric sample in tetrahedron {t}")));
                }
                gm[q] = g;
                dens[q] = det.sqrt();
                rq[q] = model.scalar_curvature(&x);
            }
            metric.push(gm);
            density.push(dens);
            curvature_qp.push(rq);
        }

        let faces = mesh::tet_faces();
        let nb = mesh.boundary_faces().len();
        let mut face_density = Vec::with_capacity(nb);
        let mut h_qp = Vec::with_capacity(nb);
        for f in mesh.boundary_faces() {
            let local = faces[f.opposite];
            let mut fd = [0.0; 3];
            let mut hq = [0.0; 3];
            for (q, tri) in TRI_POINTS.iter().enumerate() {
                let b = face_point_in_tet(local, *tri);
                let (g, x) = sample_metric(&chart, &model, mesh, f.tet, &b);
                fd[q] = face_area_density(&g, local);
                hq[q] = model.mean_curvature(&x);
            }
            face_density.push(fd);
            h_qp.push(hq);
        }

        let mut mean_curvature = vec![None; mesh.vertex_count()];
        for v in 0..mesh.vertex_count() {
            if mesh.is_boundary(v) {
                mean_curvature[v] = Some(model.mean_curvature(mesh.vertex(v)));
            }
        }
        let scalar_curvature = ScalarField::from_fn(mesh, |x| model.scalar_curvature(x));
        let psi = ScalarField::from_fn(mesh, |x| model.conformal_flat_factor(x));
        let marked = if model.has_marked_region() {
            Some((0..mesh.vertex_count()).map(|v| model.in_marked_region(mesh.vertex(v))).collect())
        } else {
            None
        };

        let mut spec = GeometrySpec {
            preset_id: preset_id.to_string(),
            mesh_id: mesh.id(),
            chart,
            metric,
            volume_density: density,
            scalar_curvature,
            curvature_qp,
            mean_curvature,
            mean_curvature_qp: h_qp,
            face_density,
            conformal_flat_factor: Some(psi),
            model: Some(model),
            marked_region: marked,
            warnings: Vec::new(),
        };
        let obtuse = spec.count_positive_couplings(mesh);
        if obtuse > 0 {
            spec.warnings.push(format!(
                "acuteness: {obtuse} edges with positive stiffness coupling (discrete maximum principle not guaranteed)"
            ));
        }
        Ok(spec)
    }

    /// Total volume `Σ w·√det g` over all quadrature points.
    pub fn total_volume(&self) -> f64 {
        self.volume_density.iter().map(|d| d.iter().sum::<f64>() * TET_WEIGHT).sum()
    }

    /// Row sums of the consistent mass matrix, `∫ λ_v dVol`.
    pub fn lumped_volume_weights(&self, mesh: &Mesh) -> Vec<f64> {
        let mut m = vec![0.0; mesh.vertex_count()];
        for (t, tet) in mesh.tets().iter().enumerate() {
            for (q, b) in TET_POINTS.iter().enumerate() {
                let w = TET_WEIGHT * self.volume_density[t][q];
                for i in 0..4 {
                    m[tet[i]] += w * b[i];
                }
            }
        }
        m
    }

    /// Row sums of the boundary mass, `∫_∂ λ_v dS`.
    pub fn lumped_boundary_weights(&self, mesh: &Mesh) -> Vec<f64> {
        let faces = mesh::tet_faces();
        let mut m = vec![0.0; mesh.vertex_count()];
        for (fi, f) in mesh.boundary_faces().iter().enumerate() {
            let local = faces[f.opposite];
            let tet = mesh.tets()[f.tet];
            for (q, tri) in TRI_POINTS.iter().enumerate() {
                let w = TRI_WEIGHT * self.face_density[fi][q];
                for k in 0..3 {
                    m[tet[local[k]]] += w * tri[k];
                }
            }
        }
        m
    }

    /// Checks the stored metric against its invariants.
    pub fn validate(&self, mesh: &Mesh) -> Result<()> {
        if self.mesh_id != mesh.id() || self.metric.len() != mesh.tets().len() {
            return Err(CywError::invalid(Stage::Geometry, "geometry does not belong to this mesh"));
        }
        self.scalar_curvature.check(mesh)?;
        for (t, (gm, dens)) in self.metric.iter().zip(&self.volume_density).enumerate() {
            for q in 0..4 {
                if !sym_positive_definite(&gm[q]) {
                    return Err(CywError::invalid(Stage::Geometry, format!("metric not positive definite in tetrahedron {t}")));
                }
                let d = sym_det(&gm[q]).sqrt();
                if (d - dens[q]).abs() > 1e-12 * d {
                    return Err(CywError::invalid(Stage::Geometry, format!("volume density mismatch in tetrahedron {t}")));
                }
            }
        }
        for v in 0..mesh.vertex_count() {
            if self.mean_curvature[v].is_some() != mesh.is_boundary(v) {
                return Err(CywError::invalid(Stage::Geometry, format!("mean curvature defined off the boundary at vertex {v}")));
            }
        }
        Ok(())
    }

    /// Number of mesh edges whose element stiffness coupling is positive in
    /// the stored metric (obtuse configurations).
    pub fn count_positive_couplings(&self, mesh: &Mesh) -> usize {
        use std::collections::HashMap;
        let grads = quadrature::BARY_GRADIENTS;
        let mut coupling: HashMap<(usize, usize), f64> = HashMap::new();
        for (t, tet) in mesh.tets().iter().enumerate() {
            for q in 0..4 {
                let ginv = sym_inverse(&self.metric[t][q]);
                let w = TET_WEIGHT * self.volume_density[t][q];
                for i in 0..4 {
                    for j in (i + 1)..4 {
                        let kij = w * sym_form(&ginv, &grads[i], &grads[j]);
                        let key = (tet[i].min(tet[j]), tet[i].max(tet[j]));
                        *coupling.entry(key).or_insert(0.0) += kij;
                    }
                }
            }
        }
        let scale = coupling.values().fold(0.0f64, |m, v| m.max(v.abs()));
        coupling.values().filter(|&&v| v > 1e-10 * scale).count()
    }
}

/// Reference metric and chart point at barycentric point `b` of tetrahedron `t`.
fn sample_metric(chart: &Chart, model: &Model, mesh: &Mesh, t: usize, b: &[f64; 4]) -> (Sym3, [f64; 4]) {
    let s = chart.sample(mesh, t, b);
    let dim = chart.ambient_dim();
    let c = model.metric_factor(&s.point[..dim]);
    let mut g = [0.0; 6];
    let idx = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)];
    for (k, &(i, j)) in idx.iter().enumerate() {
        g[k] = c * (0..dim).map(|r| s.jac[r][i] * s.jac[r][j]).sum::<f64>();
    }
    (g, s.point)
}

/// Surface density of the face with local vertices `face` under the
/// reference metric `g`: `√det` of the first fundamental form in the edge
/// basis `(v1 − v0, v2 − v0)`.
pub fn face_area_density(g: &Sym3, face: [usize; 3]) -> f64 {
    let corner = |i: usize| -> [f64; 3] {
        let mut e = [0.0; 3];
        if i > 0 {
            e[i - 1] = 1.0;
        }
        e
    };
    let (p0, p1, p2) = (corner(face[0]), corner(face[1]), corner(face[2]));
    let e1 = [p1[0] - p0[0], p1[1] - p0[1], p1[2] - p0[2]];
    let e2 = [p2[0] - p0[0], p2[1] - p0[1], p2[2] - p0[2]];
    let a = sym_form(g, &e1, &e1);
    let b = sym_form(g, &e1, &e2);
    let c = sym_form(g, &e2, &e2);
    (a * c - b * b).max(0.0).sqrt()
}

/// Builds the mesh and geometry of a preset with default parameters.
pub fn build_preset(preset_id: &str, refinement: u32) -> Result<(Mesh, GeometrySpec)> {
    build_preset_with(PresetId::parse(preset_id)?, refinement, &PresetParams::default())
}

pub fn build_preset_with(id: PresetId, refinement: u32, params: &PresetParams) -> Result<(Mesh, GeometrySpec)> {
    let pm = presets::generate(id, refinement, params)?;
    let mut mesh = pm.mesh;
    let orientations = vec![1i8; mesh.boundary_faces().len()];
    mesh.set_face_orientations(&orientations);
    let geom = GeometrySpec::from_model(&mesh, pm.chart, pm.model, id.as_str())?;
    Ok((mesh, geom))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constants_for_three_dimensions() {
        let c = DimensionConstants::new(3).unwrap();
        assert_eq!(c, DimensionConstants::three());
        assert_eq!(c.p - 2.0, 4.0);
        let c5 = DimensionConstants::new(5).unwrap();
        assert!((c5.a - 16.0 / 3.0).abs() < 1e-15);
        assert!((c5.p - 10.0 / 3.0).abs() < 1e-15);
        assert!(DimensionConstants::new(2).is_err());
    }

    #[test]
    fn every_preset_validates() {
        for id in PresetId::ALL {
            let (mesh, geom) = build_preset_with(id, 0, &PresetParams::default()).unwrap();
            geom.validate(&mesh).unwrap();
            for d in &geom.volume_density {
                assert!(d.iter().all(|&x| x > 0.0));
            }
        }
    }

    #[test]
    fn round_sphere_curvature_and_volume() {
        let (_, geom) = build_preset("round-s3", 1).unwrap();
        assert!(geom.scalar_curvature.values.iter().all(|&r| r == 6.0));
        let vol = geom.total_volume();
        assert!((vol - 2.0 * std::f64::consts::PI.powi(2)).abs() < 0.1 * vol);
    }

    #[test]
    fn flat_torus_has_unit_volume_and_no_boundary() {
        let (mesh, geom) = build_preset("flat-t3", 0).unwrap();
        assert!(mesh.boundary_faces().is_empty());
        assert!((geom.total_volume() - 1.0).abs() < 1e-13);
        assert!(geom.scalar_curvature.values.iter().all(|&r| r == 0.0));
    }

    #[test]
    fn ball_has_negative_curvature_and_boundary() {
        let (mesh, geom) = build_preset("ball-negR", 2).unwrap();
        assert!(!mesh.boundary_faces().is_empty());
        let min = geom.curvature_qp.iter().flatten().copied().fold(f64::INFINITY, f64::min);
        assert!(min < 0.0);
    }

    #[test]
    fn boundary_area_of_unit_ball() {
        let params = PresetParams {
            ball_amplitude: 0.0,
            ..PresetParams::default()
        };
        let (mesh, geom) = build_preset_with(PresetId::BallNegR, 2, &params).unwrap();
        let area: f64 = geom.lumped_boundary_weights(&mesh).iter().sum();
        assert!((area - 4.0 * std::f64::consts::PI).abs() < 0.02 * area, "area {area}");
    }
}
