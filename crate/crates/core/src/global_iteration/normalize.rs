//! First-order conformal pre-normalizations, accepted by recomputing the
//! curvature of the deformed metric.

use crate::error::{CywError, Result, Stage};
use crate::geometry::{GeometrySpec, Mesh, ScalarField};
use crate::operators::solvers::pcg;
use crate::operators::{conformal_change, AssembledOperators};

#[derive(Clone, Debug)]
pub struct Normalization {
    /// Positive factor `v`; the new metric is `v^{p−2} g`.
    pub factor: ScalarField,
    pub geometry: GeometrySpec,
    pub applied: bool,
    pub t: f64,
    /// Bump radius (interior) or profile amplitude (boundary).
    pub size: f64,
    pub value_before: f64,
    pub value_after: f64,
    /// `(positive, nonpositive)` counts of boundary mean curvature.
    pub boundary_signs_before: Option<(usize, usize)>,
    pub boundary_signs_after: Option<(usize, usize)>,
}

fn boundary_signs(geom: &GeometrySpec) -> Option<(usize, usize)> {
    let hs: Vec<f64> = geom.mean_curvature.iter().flatten().copied().collect();
    if hs.is_empty() {
        None
    } else {
        let pos = hs.iter().filter(|&&h| h > 0.0).count();
        Some((pos, hs.len() - pos))
    }
}

fn solve(ops: &AssembledOperators, rhs_full: &[f64], stage: Stage) -> Result<Vec<f64>> {
    let a = ops.restrict(&ops.lumped_conformal_matrix());
    let rhs = ops.gather(rhs_full);
    let mut w = vec![0.0; rhs.len()];
    let st = pcg(&a, &rhs, &mut w, 1e-13, 20 * rhs.len() + 2000)
        .map_err(|_| CywError::precondition(stage, "conformal Laplacian is not positive definite"))?;
    if !st.converged {
        return Err(CywError::NonConvergence {
            stage,
            iterations: st.iterations,
            achieved: st.relative_residual,
        });
    }
    Ok(ops.scatter(&w))
}

fn identity(mesh: &Mesh, geom: &GeometrySpec, value: f64) -> Normalization {
    Normalization {
        factor: ScalarField::constant(mesh, 1.0),
        geometry: geom.clone(),
        applied: false,
        t: 0.0,
        size: 0.0,
        value_before: value,
        value_after: value,
        boundary_signs_before: boundary_signs(geom),
        boundary_signs_after: boundary_signs(geom),
    }
}

/// Conformal factor making the scalar curvature negative at `vertex`.
///
/// With `□w = f` for a bump `f ≤ 0`, `f(P) = −C`, the factor `v = 1 + tw`
/// has `R̃(P) = v(P)^{1−p}(R(P) + t f(P))` at the lumped level.
pub fn negative_scalar_normalization(
    mesh: &Mesh,
    geom: &GeometrySpec,
    ops: &AssembledOperators,
    vertex: usize,
) -> Result<Normalization> {
    if vertex >= mesh.vertex_count() {
        return Err(CywError::invalid(Stage::Normalization, "vertex out of range"));
    }
    let r_p = geom.scalar_curvature.values[vertex];
    if r_p < 0.0 {
        return Ok(identity(mesh, geom, r_p));
    }
    let c = 2.0 * (r_p.max(0.0) + 1.0);
    let center = mesh.vertex(vertex).to_vec();
    let max_edge = mesh
        .edges()
        .iter()
        .map(|&(a, b)| geom.chart.distance(mesh.vertex(a), mesh.vertex(b)))
        .fold(0.0f64, f64::max);
    let mut radius = 6.0 * max_edge;
    for _ in 0..4 {
        let f: Vec<f64> = (0..mesh.vertex_count())
            .map(|v| {
                let q = geom.chart.distance(&center, mesh.vertex(v)) / radius;
                if q < 1.0 {
                    -c * (1.0 - q * q).powi(2)
                } else {
                    0.0
                }
            })
            .collect();
        let rhs: Vec<f64> = f.iter().zip(&ops.lumped_mass).map(|(f, m)| f * m).collect();
        let w = solve(ops, &rhs, Stage::Normalization)?;
        let mut t = 1.0;
        for _ in 0..30 {
            let values: Vec<f64> = w.iter().map(|x| 1.0 + t * x).collect();
            let min_v = values.iter().copied().fold(f64::INFINITY, f64::min);
            if min_v > 0.0 {
                let factor = ScalarField::new(mesh, values)?;
                let changed = conformal_change(mesh, geom, ops, &factor)?;
                let after = changed.scalar_curvature.values[vertex];
                if after < 0.0 {
                    return Ok(Normalization {
                        factor,
                        boundary_signs_before: boundary_signs(geom),
                        boundary_signs_after: boundary_signs(&changed),
                        geometry: changed,
                        applied: true,
                        t,
                        size: radius,
                        value_before: r_p,
                        value_after: after,
                    });
                }
            }
            t *= 0.5;
        }
        radius *= 0.5;
    }
    Err(CywError::failure(
        Stage::Normalization,
        format!("t-halving exhausted without making the scalar curvature negative at vertex {vertex}"),
    ))
}

/// Conformal factor making the boundary mean curvature positive, driven by
/// the Robin data `∂_ν w + (2/(p−2))h w = g` with constant `g > 0`.
pub fn positive_mean_curvature_normalization(mesh: &Mesh, geom: &GeometrySpec, ops: &AssembledOperators) -> Result<Normalization> {
    if !ops.is_robin() {
        return Err(CywError::invalid(Stage::Normalization, "mean curvature normalization needs robin operators"));
    }
    let hs: Vec<f64> = geom.mean_curvature.iter().flatten().copied().collect();
    let h_min = hs.iter().copied().fold(f64::INFINITY, f64::min);
    if h_min > 0.0 {
        return Ok(identity(mesh, geom, h_min));
    }
    let h_abs = hs.iter().fold(0.0f64, |m, h| m.max(h.abs()));
    let coef = ops.constants.robin_coefficient();
    let a = ops.constants.a;
    let mut amplitude = coef * (2.0 * h_abs + 1.0);
    for _ in 0..5 {
        let rhs: Vec<f64> = ops.boundary_weights.iter().map(|bw| a * bw * amplitude).collect();
        let w = solve(ops, &rhs, Stage::Normalization)?;
        let mut t = 1.0;
        for _ in 0..12 {
            let values: Vec<f64> = w.iter().map(|x| 1.0 + t * x).collect();
            if values.iter().all(|&x| x > 0.0) {
                let factor = ScalarField::new(mesh, values)?;
                let changed = conformal_change(mesh, geom, ops, &factor)?;
                let after = changed.mean_curvature.iter().flatten().copied().fold(f64::INFINITY, f64::min);
                if after > 0.0 {
                    return Ok(Normalization {
                        factor,
                        boundary_signs_before: boundary_signs(geom),
                        boundary_signs_after: boundary_signs(&changed),
                        geometry: changed,
                        applied: true,
                        t,
                        size: amplitude,
                        value_before: h_min,
                        value_after: after,
                    });
                }
            }
            t *= 0.5;
        }
        amplitude *= 2.0;
    }
    Err(CywError::failure(
        Stage::Normalization,
        "t-halving exhausted without making the boundary mean curvature positive",
    ))
}
