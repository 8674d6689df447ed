//! Weak-form assembly of the conformal Laplacian and the Robin boundary
//! operator, with quotients, eigenpairs and discrete conformal change.
//!
//! Consistent matrices are used for spectra and quotients. Pointwise field
//! operations use row-sum lumping, which keeps the nonlinear systems in
//! M-matrix form and makes vertex-wise inequalities exact.

pub mod eigen;
pub mod solvers;
pub mod sparse;

pub use eigen::{first_eigenpair, first_laplacian_eigenpair, first_lumped_eigenpair, EigenResult};
pub use sparse::CsrMatrix;

use crate::error::{CywError, Result, Stage};
use crate::geometry::quadrature::{face_point_in_tet, BARY_GRADIENTS, TET_POINTS, TET_WEIGHT, TRI_POINTS, TRI_WEIGHT};
use crate::geometry::{mesh::tet_faces, sym_det, sym_form, sym_inverse, DimensionConstants, Domain, GeometrySpec, Mesh, ScalarField, Sym3};

/// Boundary treatment of the assembled problem.
#[derive(Clone, Debug, PartialEq)]
pub enum BcMode {
    Closed,
    /// Homogeneous Dirichlet data on the domain frontier and outside it.
    Dirichlet(Domain),
    Robin,
}

impl BcMode {
    pub fn name(&self) -> &'static str {
        match self {
            BcMode::Closed => "closed",
            BcMode::Dirichlet(_) => "dirichlet",
            BcMode::Robin => "robin",
        }
    }
}

#[derive(Clone, Debug)]
pub struct AssembledOperators {
    pub mesh_id: u64,
    pub constants: DimensionConstants,
    pub bc_mode: BcMode,
    /// Weak `−Δ_g`.
    pub stiffness: CsrMatrix,
    pub mass: CsrMatrix,
    /// `R_g`-weighted mass.
    pub curvature_mass: CsrMatrix,
    /// `(2a/(p−2))·h_g`-weighted boundary mass.
    pub boundary_mass: CsrMatrix,
    pub lumped_mass: Vec<f64>,
    pub lumped_curvature: Vec<f64>,
    pub lumped_boundary: Vec<f64>,
    /// `∫_∂ λ_v dS`.
    pub boundary_weights: Vec<f64>,
    /// Vertices carrying unknowns (all, or the Dirichlet interior).
    pub free: Vec<usize>,
    pub free_index: Vec<Option<usize>>,
    tets: Vec<[usize; 4]>,
    qp_weights: Vec<[f64; 4]>,
}

/// Assembles P1 matrices with the degree-2 rules.
pub fn assemble(mesh: &Mesh, geom: &GeometrySpec, constants: DimensionConstants, bc_mode: BcMode) -> Result<AssembledOperators> {
    if geom.mesh_id != mesh.id() || geom.metric.len() != mesh.tets().len() {
        return Err(CywError::invalid(Stage::Assembly, "geometry does not belong to this mesh"));
    }
    match &bc_mode {
        BcMode::Closed if !mesh.is_closed() => {
            return Err(CywError::invalid(Stage::Assembly, "closed mode requires a mesh without boundary"));
        }
        BcMode::Robin if mesh.is_closed() => {
            return Err(CywError::invalid(Stage::Assembly, "robin mode requires a mesh with boundary"));
        }
        BcMode::Dirichlet(d) if d.mesh_id != mesh.id() => {
            return Err(CywError::invalid(Stage::Assembly, "dirichlet domain does not belong to this mesh"));
        }
        _ => {}
    }

    let mut k = CsrMatrix::mesh_pattern(mesh);
    let mut m = k.clone();
    let mut mr = k.clone();
    let mut qp_weights = Vec::with_capacity(mesh.tets().len());
    for (t, tet) in mesh.tets().iter().enumerate() {
        let mut wq = [0.0; 4];
        for (q, b) in TET_POINTS.iter().enumerate() {
            let g = &geom.metric[t][q];
            let ginv: Sym3 = sym_inverse(g);
            if !ginv.iter().all(|v| v.is_finite()) {
                return Err(CywError::invalid(Stage::Assembly, format!("singular metric sample in tetrahedron {t}")));
            }
            let w = TET_WEIGHT * geom.volume_density[t][q];
            wq[q] = w;
            let r = geom.curvature_qp[t][q];
            for i in 0..4 {
                for j in 0..4 {
                    k.add_at(tet[i], tet[j], w * sym_form(&ginv, &BARY_GRADIENTS[i], &BARY_GRADIENTS[j]));
                    let bb = w * b[i] * b[j];
                    m.add_at(tet[i], tet[j], bb);
                    mr.add_at(tet[i], tet[j], r * bb);
                }
            }
        }
        qp_weights.push(wq);
    }

    let coef = constants.a * constants.robin_coefficient();
    let mut mh = CsrMatrix::mesh_pattern(mesh);
    let mut bw = vec![0.0; mesh.vertex_count()];
    let faces = tet_faces();
    for (fi, f) in mesh.boundary_faces().iter().enumerate() {
        let local = faces[f.opposite];
        let tet = mesh.tets()[f.tet];
        for (q, tri) in TRI_POINTS.iter().enumerate() {
            let w = TRI_WEIGHT * geom.face_density[fi][q];
            let h = geom.mean_curvature_qp[fi][q];
            for a in 0..3 {
                bw[tet[local[a]]] += w * tri[a];
                for b in 0..3 {
                    mh.add_at(tet[local[a]], tet[local[b]], coef * h * w * tri[a] * tri[b]);
                }
            }
        }
    }

    let n = mesh.vertex_count();
    let free: Vec<usize> = match &bc_mode {
        BcMode::Dirichlet(d) => d.interior_set.clone(),
        _ => (0..n).collect(),
    };
    let mut free_index = vec![None; n];
    for (i, &v) in free.iter().enumerate() {
        free_index[v] = Some(i);
    }
    Ok(AssembledOperators {
        mesh_id: mesh.id(),
        constants,
        lumped_mass: m.row_sums(),
        lumped_curvature: mr.row_sums(),
        lumped_boundary: mh.row_sums(),
        stiffness: k,
        mass: m,
        curvature_mass: mr,
        boundary_mass: mh,
        boundary_weights: bw,
        bc_mode,
        free,
        free_index,
        tets: mesh.tets().to_vec(),
        qp_weights,
    })
}

impl AssembledOperators {
    pub fn vertex_count(&self) -> usize {
        self.lumped_mass.len()
    }

    pub fn is_robin(&self) -> bool {
        matches!(self.bc_mode, BcMode::Robin)
    }

    /// `aK + M_R` on the full vertex set (plus `M_h` under Robin).
    pub fn conformal_matrix(&self) -> CsrMatrix {
        let mut l = self.stiffness.linear_combination(self.constants.a, &self.curvature_mass, 1.0);
        if self.is_robin() {
            l = l.linear_combination(1.0, &self.boundary_mass, 1.0);
        }
        l
    }

    /// `aK + diag(lumped M_R)` (plus lumped `M_h` under Robin).
    pub fn lumped_conformal_matrix(&self) -> CsrMatrix {
        let mut d = self.lumped_curvature.clone();
        if self.is_robin() {
            for (di, bi) in d.iter_mut().zip(&self.lumped_boundary) {
                *di += bi;
            }
        }
        self.stiffness.scaled(self.constants.a).add_diagonal(&d)
    }

    pub fn restrict(&self, m: &CsrMatrix) -> CsrMatrix {
        m.restrict(&self.free_index, self.free.len())
    }

    pub fn gather(&self, full: &[f64]) -> Vec<f64> {
        self.free.iter().map(|&v| full[v]).collect()
    }

    /// Scatters free values into a full vector, zero elsewhere.
    pub fn scatter(&self, reduced: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.vertex_count()];
        for (i, &v) in self.free.iter().enumerate() {
            out[v] = reduced[i];
        }
        out
    }

    /// Zeroes the entries of non-free vertices.
    pub fn mask(&self, full: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; full.len()];
        for &v in &self.free {
            out[v] = full[v];
        }
        out
    }

    /// `∫ |u_h|^q dVol` by the tetrahedron rule on the P1 interpolant.
    pub fn lp_integral(&self, u: &[f64], q: f64) -> f64 {
        let mut total = 0.0;
        for (tet, w) in self.tets.iter().zip(&self.qp_weights) {
            for (k, b) in TET_POINTS.iter().enumerate() {
                let val: f64 = (0..4).map(|i| b[i] * u[tet[i]]).sum();
                total += w[k] * val.abs().powf(q);
            }
        }
        total
    }

    /// Tetrahedra with their quadrature weights `w·√det g`.
    pub fn qp_pairs(&self) -> impl Iterator<Item = (&[usize; 4], &[f64; 4])> {
        self.tets.iter().zip(&self.qp_weights)
    }
}

fn check_field(ops: &AssembledOperators, u: &ScalarField) -> Result<()> {
    if u.mesh_id != ops.mesh_id || u.len() != ops.vertex_count() {
        return Err(CywError::invalid(Stage::Assembly, "field dimension does not match the operators"));
    }
    Ok(())
}

/// `M_L⁻¹(aK u + M_{R,L} u)`, a pointwise approximation of `□_g u`.
pub fn apply_conformal_laplacian(ops: &AssembledOperators, u: &ScalarField) -> Result<ScalarField> {
    check_field(ops, u)?;
    let ku = ops.stiffness.mul(&u.values);
    let values = (0..u.len())
        .map(|v| (ops.constants.a * ku[v] + ops.lumped_curvature[v] * u.values[v]) / ops.lumped_mass[v])
        .collect();
    Ok(ScalarField {
        values,
        mesh_id: u.mesh_id,
    })
}

/// Discrete Yamabe quotient with the `L^p` norm taken by quadrature of the
/// P1 interpolant. Under Dirichlet mode non-free values are ignored.
pub fn yamabe_quotient(ops: &AssembledOperators, u: &ScalarField) -> Result<f64> {
    check_field(ops, u)?;
    let u = ops.mask(&u.values);
    let p = ops.constants.p;
    let denom = ops.lp_integral(&u, p);
    if !(denom > 0.0) {
        return Err(CywError::invalid(Stage::Assembly, "Yamabe quotient of the zero field"));
    }
    let num = ops.conformal_matrix().quadratic_form(&u);
    Ok(num / denom.powf(2.0 / p))
}

/// Inputs of the Li–Yau eigenvalue lower bound.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LiYauInputs {
    pub r_inj: f64,
    /// `K` with `Ric ≥ −(n−1)K`.
    pub ricci_lower: f64,
    pub h_min: f64,
    pub n: u32,
}

/// `(1/γ)[(log γ)²/(4(n−1)r²) − (n−1)K]` with
/// `γ = max{exp[1 + (1 − 4(n−1)²r²K)^{1/2}], exp[−2(n−1)h r]}`; the square
/// root is clamped at zero.
pub fn li_yau_bound(inputs: &LiYauInputs) -> Result<f64> {
    if !(inputs.r_inj > 0.0) {
        return Err(CywError::invalid(Stage::Assembly, "injectivity radius must be positive"));
    }
    if inputs.n < 3 {
        return Err(CywError::invalid(Stage::Assembly, "dimension must be at least 3"));
    }
    let nm1 = f64::from(inputs.n) - 1.0;
    let (r, k, h) = (inputs.r_inj, inputs.ricci_lower, inputs.h_min);
    let disc = (1.0 - 4.0 * nm1 * nm1 * r * r * k).max(0.0);
    let log_gamma = (1.0 + disc.sqrt()).max(-2.0 * nm1 * h * r);
    let gamma = log_gamma.exp();
    Ok((log_gamma * log_gamma / (4.0 * nm1 * r * r) - nm1 * k) / gamma)
}

/// P1 interpolant of vertex values at the quadrature points of `tet`.
fn at_points(tet: &[usize; 4], u: &[f64]) -> [f64; 4] {
    let mut out = [0.0; 4];
    for (q, b) in TET_POINTS.iter().enumerate() {
        out[q] = (0..4).map(|i| b[i] * u[tet[i]]).sum();
    }
    out
}

/// Outward normal derivative of the P1 field `u` at each boundary vertex,
/// averaged over incident boundary faces with area weights.
pub fn boundary_normal_derivative(mesh: &Mesh, geom: &GeometrySpec, u: &[f64]) -> Vec<f64> {
    let faces = tet_faces();
    let mut num = vec![0.0; mesh.vertex_count()];
    let mut den = vec![0.0; mesh.vertex_count()];
    for (fi, f) in mesh.boundary_faces().iter().enumerate() {
        let tet = mesh.tets()[f.tet];
        let local = faces[f.opposite];
        let mut g = [0.0; 6];
        for q in 0..4 {
            for c in 0..6 {
                g[c] += 0.25 * geom.metric[f.tet][q][c];
            }
        }
        let ginv = sym_inverse(&g);
        let mut du = [0.0; 3];
        for i in 0..4 {
            for c in 0..3 {
                du[c] += u[tet[i]] * BARY_GRADIENTS[i][c];
            }
        }
        let dl = BARY_GRADIENTS[f.opposite];
        let dn = -sym_form(&ginv, &du, &dl) / sym_form(&ginv, &dl, &dl).sqrt();
        let area: f64 = geom.face_density[fi].iter().sum::<f64>() * TRI_WEIGHT;
        for &lv in &local {
            num[tet[lv]] += area * dn;
            den[tet[lv]] += area;
        }
    }
    num.iter().zip(&den).map(|(n, d)| if *d > 0.0 { n / d } else { 0.0 }).collect()
}

/// Geometry of `g̃ = u^{p−2} g`: metric and density rescaled at quadrature
/// points, `R̃ = u^{1−p}□_g u` and `h̃ = u^{−p/2}((p−2)/2·∂_ν u + h u)`,
/// with `∂_ν u` the flux left in the lumped boundary rows.
pub fn conformal_change(mesh: &Mesh, geom: &GeometrySpec, ops: &AssembledOperators, u: &ScalarField) -> Result<GeometrySpec> {
    check_field(ops, u)?;
    u.check(mesh)?;
    if let Some(v) = u.values.iter().position(|&x| !(x > 0.0)) {
        return Err(CywError::invalid(Stage::Assembly, format!("conformal factor is not positive at vertex {v}")));
    }
    let p = ops.constants.p;
    let n = f64::from(ops.constants.n);
    let mut out = geom.clone();
    for (t, tet) in mesh.tets().iter().enumerate() {
        let uq = at_points(tet, &u.values);
        for q in 0..4 {
            let s = uq[q].powf(p - 2.0);
            for c in 0..6 {
                out.metric[t][q][c] *= s;
            }
            out.volume_density[t][q] *= uq[q].powf((p - 2.0) * n / 2.0);
        }
    }

    // Boundary rows of the stiffness part carry the normal flux. There the
    // pointwise value of −aΔu is extrapolated from interior neighbors and the
    // remainder of the row is read as `a·bw·∂_ν u`.
    let ku = ops.stiffness.mul(&u.values);
    let diffusion: Vec<f64> = (0..u.len()).map(|v| ops.constants.a * ku[v] / ops.lumped_mass[v]).collect();
    let mut lap = apply_conformal_laplacian(ops, u)?.values;
    let mut flux = vec![None; mesh.vertex_count()];
    for v in 0..mesh.vertex_count() {
        if !mesh.is_boundary(v) || !(ops.boundary_weights[v] > 0.0) {
            continue;
        }
        let inner: Vec<usize> = mesh.neighbors(v).iter().copied().filter(|&w| !mesh.is_boundary(w)).collect();
        if inner.is_empty() {
            continue;
        }
        let ext = inner.iter().map(|&w| diffusion[w]).sum::<f64>() / inner.len() as f64;
        flux[v] = Some(ops.lumped_mass[v] * (diffusion[v] - ext) / (ops.constants.a * ops.boundary_weights[v]));
        lap[v] += ext - diffusion[v];
    }
    let r_new: Vec<f64> = lap.iter().zip(&u.values).map(|(l, uv)| uv.powf(1.0 - p) * l).collect();
    for (t, tet) in mesh.tets().iter().enumerate() {
        out.curvature_qp[t] = at_points(tet, &r_new);
    }
    out.scalar_curvature = ScalarField::new(mesh, r_new)?;

    let dn = boundary_normal_derivative(mesh, geom, &u.values);
    let mut h_new = vec![None; mesh.vertex_count()];
    for v in 0..mesh.vertex_count() {
        if let Some(h) = geom.mean_curvature[v] {
            let uv = u.values[v];
            let d = flux[v].unwrap_or(dn[v]);
            h_new[v] = Some(uv.powf(-p / 2.0) * ((p - 2.0) / 2.0 * d + h * uv));
        }
    }
    let faces = tet_faces();
    for (fi, f) in mesh.boundary_faces().iter().enumerate() {
        let local = faces[f.opposite];
        let tet = mesh.tets()[f.tet];
        for (q, tri) in TRI_POINTS.iter().enumerate() {
            let b = face_point_in_tet(local, *tri);
            let hv: f64 = (0..4).map(|i| b[i] * h_new[tet[i]].unwrap_or(0.0)).sum();
            let uv: f64 = (0..4).map(|i| b[i] * u.values[tet[i]]).sum();
            out.mean_curvature_qp[fi][q] = hv;
            out.face_density[fi][q] *= uv.powf((p - 2.0) * (n - 1.0) / 2.0);
        }
    }
    out.mean_curvature = h_new;
    out.conformal_flat_factor = geom
        .conformal_flat_factor
        .as_ref()
        .map(|psi| ScalarField {
            values: psi.values.iter().zip(&u.values).map(|(a, b)| a * b).collect(),
            mesh_id: psi.mesh_id,
        });
    out.model = None;
    out.marked_region = None;
    out.preset_id = format!("{}+conformal", geom.preset_id);
    Ok(out)
}

/// Euclidean chart geometry `g_flat = ψ^{2−p} g` of a locally conformally
/// flat `g = ψ^{p−2} g_flat`, with `R = 0` and the boundary law applied to
/// `ψ^{−1}`.
pub fn flat_companion(mesh: &Mesh, geom: &GeometrySpec, constants: DimensionConstants) -> Result<GeometrySpec> {
    flat_companion_on(mesh, geom, constants, &vec![true; mesh.vertex_count()])
}

/// [`flat_companion`] on the tetrahedra with every vertex in `support`;
/// the rest keep the original metric.
pub fn flat_companion_on(mesh: &Mesh, geom: &GeometrySpec, constants: DimensionConstants, support: &[bool]) -> Result<GeometrySpec> {
    let Some(psi) = geom.conformal_flat_factor.as_ref() else {
        return Err(CywError::invalid(Stage::Routing, "geometry not locally conformally flat"));
    };
    psi.check(mesh)?;
    if support.len() != mesh.vertex_count() {
        return Err(CywError::invalid(Stage::Routing, "support mask does not match the mesh"));
    }
    if let Some(v) = (0..psi.len()).find(|&v| support[v] && !(psi.values[v] > 0.0)) {
        return Err(CywError::precondition(
            Stage::Routing,
            format!("conformal flat factor vanishes at vertex {v}; no flat chart covers the mesh"),
        ));
    }
    let p = constants.p;
    let n = f64::from(constants.n);
    let dim = geom.chart.ambient_dim();
    let psi_at = |t: usize, b: &[f64; 4]| -> f64 {
        match &geom.model {
            Some(model) => model.conformal_flat_factor(&geom.chart.sample(mesh, t, b).point[..dim]),
            None => (0..4).map(|i| b[i] * psi.values[mesh.tets()[t][i]]).sum(),
        }
    };
    let mut out = geom.clone();
    for t in 0..mesh.tets().len() {
        if !mesh.tets()[t].iter().all(|&v| support[v]) {
            continue;
        }
        for (q, b) in TET_POINTS.iter().enumerate() {
            let s = psi_at(t, b);
            if !(s > 0.0) {
                return Err(CywError::precondition(Stage::Routing, format!("conformal flat factor vanishes in tetrahedron {t}")));
            }
            let f = s.powf(2.0 - p);
            for c in 0..6 {
                out.metric[t][q][c] *= f;
            }
            out.volume_density[t][q] = sym_det(&out.metric[t][q]).sqrt();
        }
        out.curvature_qp[t] = [0.0; 4];
    }
    out.scalar_curvature = ScalarField::constant(mesh, 0.0);

    let inv: Vec<f64> = psi.values.iter().zip(support).map(|(x, &on)| if on { 1.0 / x } else { 1.0 }).collect();
    let dn = boundary_normal_derivative(mesh, geom, &inv);
    let mut h_new = vec![None; mesh.vertex_count()];
    for v in 0..mesh.vertex_count() {
        if let Some(h) = geom.mean_curvature[v] {
            let uv = inv[v];
            h_new[v] = Some(uv.powf(-p / 2.0) * ((p - 2.0) / 2.0 * dn[v] + h * uv));
        }
    }
    let faces = tet_faces();
    for (fi, f) in mesh.boundary_faces().iter().enumerate() {
        let local = faces[f.opposite];
        let tet = mesh.tets()[f.tet];
        for (q, tri) in TRI_POINTS.iter().enumerate() {
            let b = face_point_in_tet(local, *tri);
            out.mean_curvature_qp[fi][q] = (0..4).map(|i| b[i] * h_new[tet[i]].unwrap_or(0.0)).sum();
            out.face_density[fi][q] *= psi_at(f.tet, &b).powf(-(p - 2.0) * (n - 1.0) / 2.0);
        }
    }
    out.mean_curvature = h_new;
    out.conformal_flat_factor = Some(ScalarField::constant(mesh, 1.0));
    out.model = None;
    out.marked_region = None;
    out.warnings.clear();
    out.preset_id = format!("{}+flat", geom.preset_id);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::build_preset;

    #[test]
    fn flat_torus_stiffness_rows_sum_to_zero() {
        let (mesh, geom) = build_preset("flat-t3", 1).unwrap();
        let ops = assemble(&mesh, &geom, DimensionConstants::three(), BcMode::Closed).unwrap();
        let worst = ops.stiffness.row_sums().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(worst < 1e-12, "{worst}");
        assert_eq!(ops.stiffness.symmetry_defect(), 0.0);
    }

    #[test]
    fn constant_quotient_on_round_sphere() {
        let (mesh, geom) = build_preset("round-s3", 1).unwrap();
        let ops = assemble(&mesh, &geom, DimensionConstants::three(), BcMode::Closed).unwrap();
        let one = vec![1.0; mesh.vertex_count()];
        let rq = ops.conformal_matrix().quadratic_form(&one) / ops.mass.quadratic_form(&one);
        assert!((rq - 6.0).abs() < 1e-10);
        let q = yamabe_quotient(&ops, &ScalarField::constant(&mesh, 1.0)).unwrap();
        let vol = geom.total_volume();
        assert!((q - 6.0 * vol.powf(2.0 / 3.0)).abs() < 1e-10 * q);
    }

    #[test]
    fn dirichlet_restriction_dimension() {
        let (mesh, geom) = build_preset("ball-negR", 2).unwrap();
        let dom = Domain::whole(&mesh).unwrap();
        let n = dom.interior_set.len();
        let ops = assemble(&mesh, &geom, DimensionConstants::three(), BcMode::Dirichlet(dom)).unwrap();
        assert_eq!(ops.restrict(&ops.conformal_matrix()).dim(), n);
    }

    #[test]
    fn li_yau_reference_values() {
        let b = li_yau_bound(&LiYauInputs { r_inj: 1.0, ricci_lower: 0.0, h_min: 0.0, n: 3 }).unwrap();
        assert!((b - 1.0 / (2.0 * std::f64::consts::E.powi(2))).abs() < 1e-15);
        let b = li_yau_bound(&LiYauInputs { r_inj: 0.1, ricci_lower: 0.0, h_min: 0.0, n: 3 }).unwrap();
        assert!((b - 100.0 / (2.0 * std::f64::consts::E.powi(2))).abs() < 1e-12);
        assert!(li_yau_bound(&LiYauInputs { r_inj: 0.0, ricci_lower: 0.0, h_min: 0.0, n: 3 }).is_err());
    }

    #[test]
    fn identity_conformal_change() {
        let (mesh, geom) = build_preset("ball-negR", 1).unwrap();
        let ops = assemble(&mesh, &geom, DimensionConstants::three(), BcMode::Robin).unwrap();
        let g2 = conformal_change(&mesh, &geom, &ops, &ScalarField::constant(&mesh, 1.0)).unwrap();
        for (a, b) in g2.metric.iter().flatten().flatten().zip(geom.metric.iter().flatten().flatten()) {
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
        }
        for v in 0..mesh.vertex_count() {
            if let (Some(a), Some(b)) = (g2.mean_curvature[v], geom.mean_curvature[v]) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn flat_companion_of_ball_is_euclidean() {
        let (mesh, geom) = build_preset("ball-negR", 1).unwrap();
        let flat = flat_companion(&mesh, &geom, DimensionConstants::three()).unwrap();
        let (_, euclid) = crate::geometry::build_preset_with(
            crate::geometry::PresetId::BallNegR,
            1,
            &crate::geometry::PresetParams { ball_amplitude: 0.0, ..Default::default() },
        )
        .unwrap();
        for (a, b) in flat.metric.iter().flatten().flatten().zip(euclid.metric.iter().flatten().flatten()) {
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
        }
        assert!(flat.scalar_curvature.values.iter().all(|&r| r == 0.0));
    }
}
