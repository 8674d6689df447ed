//! Integral obstructions on the round sphere: `∫⟨∇H, ∇S⟩ u^p dVol` and
//! `∫ X_a(R) dVol` with the conformal fields `X_a = a − (a·z)z`.

use crate::error::{CywError, Result, Stage};
use crate::geometry::quadrature::{BARY_GRADIENTS, TET_POINTS, TET_WEIGHT};
use crate::geometry::{sym_form, sym_inverse, Chart, GeometrySpec, Mesh, ScalarField, Sym3};
use std::fmt::Write as _;

fn reference_gradient(tet: &[usize; 4], f: &[f64]) -> [f64; 3] {
    let mut g = [0.0; 3];
    for i in 0..4 {
        for c in 0..3 {
            g[c] += f[tet[i]] * BARY_GRADIENTS[i][c];
        }
    }
    g
}

fn check(mesh: &Mesh, geom: &GeometrySpec, fields: &[&ScalarField]) -> Result<()> {
    if geom.mesh_id != mesh.id() {
        return Err(CywError::invalid(Stage::Obstruction, "geometry does not belong to this mesh"));
    }
    for f in fields {
        f.check(mesh)?;
    }
    Ok(())
}

/// `∫⟨∇H, ∇S⟩_g u^p dVol_g` by the tetrahedron rule on P1 interpolants.
pub fn kw_obstruction(mesh: &Mesh, geom: &GeometrySpec, s: &ScalarField, u: &ScalarField, h: &ScalarField, p: f64) -> Result<f64> {
    check(mesh, geom, &[s, u, h])?;
    let mut total = 0.0;
    for (t, tet) in mesh.tets().iter().enumerate() {
        let gh = reference_gradient(tet, &h.values);
        let gs = reference_gradient(tet, &s.values);
        for (q, b) in TET_POINTS.iter().enumerate() {
            let uq: f64 = (0..4).map(|i| b[i] * u.values[tet[i]]).sum();
            let inner = sym_form(&sym_inverse(&geom.metric[t][q]), &gh, &gs);
            total += TET_WEIGHT * geom.volume_density[t][q] * inner * uq.abs().powf(p);
        }
    }
    Ok(total)
}

/// `X_a = a − (a·z)z` at a unit vector `z`.
pub fn conformal_killing_field(a: &[f64], z: &[f64]) -> Vec<f64> {
    let d: f64 = a.iter().zip(z).map(|(x, y)| x * y).sum();
    a.iter().zip(z).map(|(ai, zi)| ai - d * zi).collect()
}

/// `∫ dR(X_a) dVol_g` over a mesh of the sphere.
pub fn be_obstruction(mesh: &Mesh, geom: &GeometrySpec, r_field: &ScalarField, a: &[f64]) -> Result<f64> {
    check(mesh, geom, &[r_field])?;
    if geom.chart != Chart::RadialSphere || a.len() != 4 {
        return Err(CywError::invalid(Stage::Obstruction, "needs a sphere mesh and a direction in R^4"));
    }
    if a.iter().all(|&x| x == 0.0) {
        return Err(CywError::invalid(Stage::Obstruction, "direction must be nonzero"));
    }
    let mut total = 0.0;
    for (t, tet) in mesh.tets().iter().enumerate() {
        let gr = reference_gradient(tet, &r_field.values);
        for (q, b) in TET_POINTS.iter().enumerate() {
            let sample = geom.chart.sample(mesh, t, b);
            let x = conformal_killing_field(a, &sample.point);
            // Reference components of X: (JᵀJ)⁻¹ Jᵀ X.
            let j = &sample.jac;
            let mut jtj: Sym3 = [0.0; 6];
            let idx = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)];
            for (k, &(r, c)) in idx.iter().enumerate() {
                jtj[k] = (0..4).map(|m| j[m][r] * j[m][c]).sum();
            }
            let jtx = [0, 1, 2].map(|c| (0..4).map(|m| j[m][c] * x[m]).sum::<f64>());
            let inv = sym_inverse(&jtj);
            let xi = [0, 1, 2].map(|r| {
                let e = [(r == 0) as u8 as f64, (r == 1) as u8 as f64, (r == 2) as u8 as f64];
                sym_form(&inv, &e, &jtx)
            });
            let dr: f64 = (0..3).map(|c| gr[c] * xi[c]).sum();
            total += TET_WEIGHT * geom.volume_density[t][q] * dr;
        }
    }
    Ok(total)
}

/// Obstruction integrals for the coordinate test functions and directions.
#[derive(Clone, Debug, PartialEq)]
pub struct ObstructionReport {
    /// `(coordinate index of H, value)`.
    pub kw_values: Vec<(usize, f64)>,
    /// `(coordinate index of a, value)`.
    pub be_values: Vec<(usize, f64)>,
    /// `‖∇S‖∞ · Σ m u^p`, the scale of the Kazdan–Warner values.
    pub kw_scale: f64,
    /// `max(‖∇R‖∞, ‖R‖∞) · vol`, the scale of the Bourguignon–Ezin values.
    pub be_scale: f64,
    pub tolerance: f64,
}

impl ObstructionReport {
    pub fn kw_max(&self) -> f64 {
        self.kw_values.iter().fold(0.0f64, |m, (_, v)| m.max(v.abs()))
    }

    pub fn be_max(&self) -> f64 {
        self.be_values.iter().fold(0.0f64, |m, (_, v)| m.max(v.abs()))
    }

    pub fn csv(&self) -> String {
        let mut s = String::from("kind,index,value\n");
        for (i, v) in &self.kw_values {
            let _ = writeln!(s, "kw,{i},{v:.17e}");
        }
        for (i, v) in &self.be_values {
            let _ = writeln!(s, "be,{i},{v:.17e}");
        }
        s
    }
}

fn max_reference_gradient(mesh: &Mesh, geom: &GeometrySpec, f: &ScalarField) -> f64 {
    let mut m = 0.0f64;
    for (t, tet) in mesh.tets().iter().enumerate() {
        let g = reference_gradient(tet, &f.values);
        for q in 0..4 {
            m = m.max(sym_form(&sym_inverse(&geom.metric[t][q]), &g, &g).max(0.0).sqrt());
        }
    }
    m
}

/// Evaluates both obstructions on a sphere mesh for `H = z_i` and `a = e_i`.
/// The first integral runs over the round metric `geom` with factor `u`;
/// the second over `deformed` with its own scalar curvature.
pub fn obstruction_report(
    mesh: &Mesh,
    geom: &GeometrySpec,
    deformed: &GeometrySpec,
    s: &ScalarField,
    u: &ScalarField,
    p: f64,
    tolerance: f64,
) -> Result<ObstructionReport> {
    let r_field = &deformed.scalar_curvature;
    let mut kw_values = Vec::new();
    let mut be_values = Vec::new();
    for i in 0..4 {
        let h = ScalarField::from_fn(mesh, |x| {
            let n = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            x[i] / n
        });
        kw_values.push((i, kw_obstruction(mesh, geom, s, u, &h, p)?));
        let mut a = [0.0; 4];
        a[i] = 1.0;
        be_values.push((i, be_obstruction(mesh, deformed, r_field, &a)?));
    }
    let lp: f64 = geom
        .lumped_volume_weights(mesh)
        .iter()
        .zip(&u.values)
        .map(|(m, x)| m * x.abs().powf(p))
        .sum();
    Ok(ObstructionReport {
        kw_values,
        be_values,
        kw_scale: max_reference_gradient(mesh, geom, s) * lp,
        be_scale: max_reference_gradient(mesh, deformed, r_field).max(r_field.values.iter().fold(0.0f64, |m, x| m.max(x.abs())))
            * deformed.total_volume(),
        tolerance,
    })
}
