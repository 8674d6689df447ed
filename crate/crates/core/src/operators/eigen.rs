//! Smallest eigenpair of the generalized problem `Lφ = η Mφ` by shifted
//! inverse iteration.

use super::solvers::pcg;
use super::sparse::{dot, CsrMatrix};
use super::AssembledOperators;
use crate::error::{CywError, Result, Stage};
use crate::geometry::ScalarField;

#[derive(Clone, Debug)]
pub struct EigenResult {
    pub eigenvalue: f64,
    /// Unit consistent-mass norm, nonnegative lumped mean.
    pub eigenfunction: ScalarField,
    /// `‖Lφ − ηMφ‖ / ‖Mφ‖` in the lumped dual norm.
    pub residual: f64,
    pub iterations: usize,
    pub shift: f64,
    /// Whether the eigenfunction keeps one sign on the free vertices.
    pub one_signed: bool,
}

pub const EIGEN_TOLERANCE: f64 = 1e-9;
const MAX_ITERATIONS: usize = 4000;

/// First eigenpair of `aK + M_R` (plus `M_h` under Robin, restricted under
/// Dirichlet).
pub fn first_eigenpair(ops: &AssembledOperators) -> Result<EigenResult> {
    let coefficient_min = ops
        .lumped_curvature
        .iter()
        .zip(&ops.lumped_mass)
        .map(|(r, m)| r / m)
        .fold(f64::INFINITY, f64::min);
    smallest(ops, &ops.conformal_matrix(), &ops.mass, coefficient_min - 1.0)
}

/// First eigenpair of the lumped pencil `(aK + diag m_R) φ = η diag(m) φ`
/// (plus lumped `M_h` under Robin). Vertex rows then read `□φ = ηφ`
/// exactly, which the pointwise super-solution checks rely on.
pub fn first_lumped_eigenpair(ops: &AssembledOperators) -> Result<EigenResult> {
    let mut d = ops.lumped_curvature.clone();
    if ops.is_robin() {
        for (di, bi) in d.iter_mut().zip(&ops.lumped_boundary) {
            *di += bi;
        }
    }
    let coefficient_min = d.iter().zip(&ops.lumped_mass).map(|(r, m)| r / m).fold(f64::INFINITY, f64::min);
    let mass = CsrMatrix::diagonal_matrix(&ops.lumped_mass);
    smallest(ops, &ops.lumped_conformal_matrix(), &mass, coefficient_min - 1.0)
}

/// First eigenpair of the weak Laplacian `K` alone.
pub fn first_laplacian_eigenpair(ops: &AssembledOperators) -> Result<EigenResult> {
    smallest(ops, &ops.stiffness, &ops.mass, -1.0)
}

fn dual_norm(v: &[f64], m: &[f64]) -> f64 {
    v.iter().zip(m).map(|(x, w)| x * x / w).sum::<f64>().sqrt()
}

fn smallest(ops: &AssembledOperators, l_full: &CsrMatrix, b_full: &CsrMatrix, initial_shift: f64) -> Result<EigenResult> {
    let l = ops.restrict(l_full);
    let b = ops.restrict(b_full);
    let m_lumped = ops.gather(&ops.lumped_mass);
    let n = l.dim();
    if n == 0 {
        return Err(CywError::invalid(Stage::Eigen, "no free vertices"));
    }

    let mut shift = initial_shift;
    'shift: for _attempt in 0..30 {
        let a = l.linear_combination(1.0, &b, -shift);
        let mut x = vec![1.0; n];
        let bn = dot(&x, &b.mul(&x)).sqrt();
        x.iter_mut().for_each(|v| *v /= bn);
        let mut y = vec![0.0; n];
        let mut residual = f64::INFINITY;
        for it in 1..=MAX_ITERATIONS {
            let rhs = b.mul(&x);
            y.copy_from_slice(&x);
            match pcg(&a, &rhs, &mut y, 1e-13, 20 * n + 1000) {
                Ok(_) => {}
                Err(_) => {
                    shift -= 4.0 * shift.abs().max(1.0);
                    continue 'shift;
                }
            }
            let by = b.mul(&y);
            let norm = dot(&y, &by).sqrt();
            if !(norm > 0.0) || !norm.is_finite() {
                return Err(CywError::failure(Stage::Eigen, "inverse iteration produced a degenerate vector"));
            }
            y.iter_mut().for_each(|v| *v /= norm);
            let ly = l.mul(&y);
            let my: Vec<f64> = by.iter().map(|v| v / norm).collect();
            let rho = dot(&y, &ly);
            if rho < shift {
                // A mode below the shift exists; the system was indefinite.
                shift = rho - 1.0 - 0.5 * (rho.abs());
                continue 'shift;
            }
            let r: Vec<f64> = ly.iter().zip(&my).map(|(a, c)| a - rho * c).collect();
            residual = dual_norm(&r, &m_lumped) / dual_norm(&my, &m_lumped);
            std::mem::swap(&mut x, &mut y);
            if residual <= EIGEN_TOLERANCE {
                return Ok(finish(ops, x, rho, residual, it, shift));
            }
        }
        return Err(CywError::NonConvergence {
            stage: Stage::Eigen,
            iterations: MAX_ITERATIONS,
            achieved: residual,
        });
    }
    Err(CywError::failure(Stage::Eigen, "could not find a positive definite shift"))
}

fn finish(ops: &AssembledOperators, mut x: Vec<f64>, rho: f64, residual: f64, iterations: usize, shift: f64) -> EigenResult {
    let m_lumped = ops.gather(&ops.lumped_mass);
    if dot(&x, &m_lumped) < 0.0 {
        x.iter_mut().for_each(|v| *v = -*v);
    }
    let scale = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let one_signed = x.iter().all(|&v| v >= -1e-8 * scale);
    let full = ops.scatter(&x);
    EigenResult {
        eigenvalue: rho,
        eigenfunction: ScalarField {
            values: full,
            mesh_id: ops.mesh_id,
        },
        residual,
        iterations,
        shift,
        one_signed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_preset, DimensionConstants};
    use crate::operators::{assemble, BcMode};

    #[test]
    fn flat_torus_first_eigenvalue_is_zero() {
        let (mesh, geom) = build_preset("flat-t3", 1).unwrap();
        let ops = assemble(&mesh, &geom, DimensionConstants::three(), BcMode::Closed).unwrap();
        let e = first_eigenpair(&ops).unwrap();
        assert!(e.eigenvalue.abs() < 1e-8, "{}", e.eigenvalue);
        assert!(e.residual <= 1e-8);
        let f = &e.eigenfunction.values;
        let spread = f.iter().fold(0.0f64, |m, v| m.max((v - f[0]).abs()));
        assert!(spread < 1e-8);
    }
}
