//! Euclidean local solve on a punctured (or annular) domain of a locally
//! conformally flat geometry, pulled back by `u = ψ^{−1}u₀`.

use super::engine::{relative_residual, solve_critical};
use crate::error::{CywError, Result, Stage};
use crate::geometry::{Chart, DimensionConstants, Domain, GeometrySpec, Mesh, ScalarField};
use crate::operators::{assemble, flat_companion_on, BcMode};
use std::collections::VecDeque;

/// Which nondegeneracy condition the flat solve checks.
#[derive(Clone, Debug, PartialEq)]
pub enum FlatProblem {
    /// Domain punctured around `center` (chart coordinates); requires
    /// `∇Q(center) ≠ 0`.
    Punctured { center: Vec<f64> },
    /// Annular domain with no puncture; no gradient condition.
    Annular,
}

#[derive(Clone, Debug)]
pub struct FlatSolution {
    /// `ψ^{−1}u₀`.
    pub field: ScalarField,
    /// Euclidean solution `u₀`.
    pub flat_field: ScalarField,
    pub flat_residual: f64,
    /// Residual of `u` in the curved equation `□_g u = Q u^{p−1}`.
    pub curved_residual: f64,
    pub quotient: f64,
    pub clamp_events: usize,
    /// `‖∇Q‖` at the puncture center.
    pub gradient_norm: Option<f64>,
    pub min_interior: f64,
}

/// Position of `x` in the Euclidean coordinates of the chart.
fn flat_coordinates(chart: &Chart, x: &[f64]) -> [f64; 3] {
    match chart {
        Chart::RadialSphere => {
            let n = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            let d = 1.0 - x[3] / n;
            [x[0] / n / d, x[1] / n / d, x[2] / n / d]
        }
        _ => [x[0], x[1], x[2]],
    }
}

fn flat_delta(chart: &Chart, from: &[f64], to: &[f64]) -> [f64; 3] {
    let a = flat_coordinates(chart, from);
    let b = flat_coordinates(chart, to);
    let mut d = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
    if let Chart::Periodic { period } = chart {
        for x in d.iter_mut() {
            *x -= period * (*x / period).round();
        }
    }
    d
}

/// Dense solve with partial pivoting; `None` when singular.
fn solve_dense(mut m: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for k in 0..n {
        let piv = (k..n).max_by(|&i, &j| m[i][k].abs().total_cmp(&m[j][k].abs()))?;
        if m[piv][k].abs() < 1e-13 {
            return None;
        }
        m.swap(k, piv);
        b.swap(k, piv);
        for i in (k + 1)..n {
            let f = m[i][k] / m[k][k];
            for j in k..n {
                m[i][j] -= f * m[k][j];
            }
            b[i] -= f * b[k];
        }
    }
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let s: f64 = ((k + 1)..n).map(|j| m[k][j] * x[j]).sum();
        x[k] = (b[k] - s) / m[k][k];
    }
    Some(x)
}

/// Value and Euclidean gradient of `field` at `center` from a least-squares
/// quadratic fit over the vertex rings around the nearest vertex. Exact for
/// quadratic fields.
pub fn chart_gradient(mesh: &Mesh, geom: &GeometrySpec, field: &ScalarField, center: &[f64]) -> Result<(f64, [f64; 3])> {
    field.check(mesh)?;
    if center.len() != mesh.dim() {
        return Err(CywError::invalid(Stage::LocalSolve, "center dimension differs from the mesh"));
    }
    let nearest = (0..mesh.vertex_count())
        .min_by(|&a, &b| {
            geom.chart
                .distance(center, mesh.vertex(a))
                .total_cmp(&geom.chart.distance(center, mesh.vertex(b)))
        })
        .ok_or_else(|| CywError::invalid(Stage::LocalSolve, "empty mesh"))?;

    let mut depth = vec![usize::MAX; mesh.vertex_count()];
    let mut stencil = vec![nearest];
    depth[nearest] = 0;
    let mut queue = VecDeque::from([nearest]);
    let mut rings = 2;
    loop {
        while let Some(v) = queue.pop_front() {
            if depth[v] >= rings {
                continue;
            }
            for &w in mesh.neighbors(v) {
                if depth[w] == usize::MAX {
                    depth[w] = depth[v] + 1;
                    stencil.push(w);
                    queue.push_back(w);
                }
            }
        }
        if stencil.len() >= 20 || rings >= 4 {
            break;
        }
        rings += 1;
        queue.extend(stencil.iter().copied().filter(|&v| depth[v] == rings - 1));
    }

    let deltas: Vec<[f64; 3]> = stencil.iter().map(|&v| flat_delta(&geom.chart, center, mesh.vertex(v))).collect();
    let scale = deltas
        .iter()
        .map(|d| d.iter().map(|x| x * x).sum::<f64>().sqrt())
        .fold(0.0f64, f64::max)
        .max(f64::MIN_POSITIVE);
    let basis = |d: &[f64; 3]| -> [f64; 10] {
        let (x, y, z) = (d[0] / scale, d[1] / scale, d[2] / scale);
        [1.0, x, y, z, x * x, y * y, z * z, x * y, x * z, y * z]
    };
    let mut ata = vec![vec![0.0; 10]; 10];
    let mut atb = vec![0.0; 10];
    for (d, &v) in deltas.iter().zip(&stencil) {
        let phi = basis(d);
        for i in 0..10 {
            atb[i] += phi[i] * field.values[v];
            for j in 0..10 {
                ata[i][j] += phi[i] * phi[j];
            }
        }
    }
    let coef = solve_dense(ata, atb).ok_or_else(|| CywError::failure(Stage::LocalSolve, "degenerate gradient stencil"))?;
    Ok((coef[0], [coef[1] / scale, coef[2] / scale, coef[3] / scale]))
}

/// Solves `−aΔ_e u₀ = Q u₀^{p−1}` on the domain with zero frontier data in
/// the flat chart metric and returns `u = ψ^{−1}u₀`.
pub fn solve_flat_punctured(
    mesh: &Mesh,
    domain: &Domain,
    q_field: &ScalarField,
    geom: &GeometrySpec,
    constants: DimensionConstants,
    problem: &FlatProblem,
) -> Result<FlatSolution> {
    let Some(psi) = geom.conformal_flat_factor.as_ref() else {
        return Err(CywError::invalid(Stage::Routing, "geometry not locally conformally flat"));
    };
    q_field.check(mesh)?;
    let q_min = domain.vertex_set.iter().map(|&v| q_field.values[v]).fold(f64::INFINITY, f64::min);
    if !(q_min > 0.0) {
        return Err(CywError::precondition(Stage::LocalSolve, format!("Q must be positive on the domain closure (min {q_min:.3e})")));
    }
    let gradient_norm = match problem {
        FlatProblem::Punctured { center } => {
            let (value, g) = chart_gradient(mesh, geom, q_field, center)?;
            let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm < 1e-6 * (1.0 + value.abs()) {
                return Err(CywError::precondition(
                    Stage::LocalSolve,
                    format!("grad Q vanishes at the puncture center (|grad Q| = {norm:.3e}); the nondegeneracy hypothesis of the punctured solve fails"),
                ));
            }
            Some(norm)
        }
        FlatProblem::Annular => None,
    };

    let flat = flat_companion_on(mesh, geom, constants, &domain.member)?;
    let ops = assemble(mesh, &flat, constants, BcMode::Dirichlet(domain.clone()))?;
    let a = ops.restrict(&ops.stiffness).scaled(constants.a);
    let mass = ops.gather(&ops.lumped_mass);
    let q = ops.gather(&q_field.values);
    let weights: Vec<f64> = mass.iter().zip(&q).map(|(m, q)| m * q).collect();
    let init = vec![1.0; mass.len()];
    let p = constants.p;
    let solved = solve_critical(&a, &weights, &mass, p, &init, Stage::LocalSolve)?;

    let u0 = ops.scatter(&solved.u);
    let values: Vec<f64> = u0.iter().zip(&psi.values).map(|(x, s)| if *x == 0.0 { 0.0 } else { x / s }).collect();
    let field = ScalarField {
        values,
        mesh_id: mesh.id(),
    };
    let min_interior = domain.interior_set.iter().map(|&v| field.values[v]).fold(f64::INFINITY, f64::min);
    if !(min_interior > 0.0) {
        return Err(CywError::failure(
            Stage::LocalSolve,
            format!("flat solution is not positive on the interior (min {min_interior:.3e})"),
        ));
    }

    let curved = assemble(mesh, geom, constants, BcMode::Dirichlet(domain.clone()))?;
    let ac = curved.restrict(&curved.lumped_conformal_matrix());
    let mc = curved.gather(&curved.lumped_mass);
    let wc: Vec<f64> = mc.iter().zip(&q).map(|(m, q)| m * q).collect();
    let curved_residual = relative_residual(&ac, &wc, &mc, p, &curved.gather(&field.values));

    Ok(FlatSolution {
        field,
        flat_field: ScalarField {
            values: u0,
            mesh_id: mesh.id(),
        },
        flat_residual: solved.newton.residual,
        curved_residual,
        quotient: solved.quotient,
        clamp_events: solved.newton.clamp_events,
        gradient_norm,
        min_interior,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::build_preset;

    #[test]
    fn quadratic_fit_recovers_gradient() {
        let (mesh, geom) = build_preset("ball-negR", 1).unwrap();
        let f = ScalarField::from_fn(&mesh, |x| 1.0 + 0.3 * x[0] - 0.2 * x[2] + x[1] * x[1] + 0.5 * x[0] * x[2]);
        let (v, g) = chart_gradient(&mesh, &geom, &f, &[0.1, 0.05, -0.1]).unwrap();
        let x = [0.1, 0.05, -0.1];
        assert!((v - (1.0 + 0.3 * x[0] - 0.2 * x[2] + x[1] * x[1] + 0.5 * x[0] * x[2])).abs() < 1e-10);
        assert!((g[0] - (0.3 + 0.5 * x[2])).abs() < 1e-10);
        assert!((g[1] - 2.0 * x[1]).abs() < 1e-10);
        assert!((g[2] - (-0.2 + 0.5 * x[0])).abs() < 1e-10);
    }
}
