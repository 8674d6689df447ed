//! Zero-extended sub-solutions and scaled eigenfunction super-solutions.

use crate::error::{CywError, Result, Stage};
use crate::geometry::{DimensionConstants, Domain, Mesh, ScalarField};
use crate::operators::{AssembledOperators, EigenResult};

/// Extends a local solution by zero off the domain interior.
pub fn make_subsolution(mesh: &Mesh, domain: &Domain, local_u: &ScalarField) -> Result<ScalarField> {
    local_u.check(mesh)?;
    if domain.mesh_id != mesh.id() {
        return Err(CywError::invalid(Stage::Subsolution, "domain does not belong to this mesh"));
    }
    let mut values = vec![0.0; mesh.vertex_count()];
    for &v in &domain.interior_set {
        let x = local_u.values[v];
        if !(x >= 0.0) {
            return Err(CywError::invalid(
                Stage::Subsolution,
                format!("local solution is negative at interior vertex {v} ({x:.3e})"),
            ));
        }
        values[v] = x;
    }
    if values.iter().all(|&x| x == 0.0) {
        return Err(CywError::invalid(Stage::Subsolution, "local solution vanishes on the domain interior"));
    }
    Ok(ScalarField {
        values,
        mesh_id: mesh.id(),
    })
}

/// `θφ` with its defining data.
#[derive(Clone, Debug)]
pub struct ScaledEigenfunction {
    pub theta: f64,
    pub eigenvalue: f64,
    /// Unscaled eigenfunction.
    pub base: ScalarField,
    /// `θφ`.
    pub field: ScalarField,
    /// `min_v ((□φ_s)_v − S_v φ_s,v^{p−1})`, positive on success.
    pub pointwise_margin: f64,
}

/// Largest dyadic `θ = 2^{−m}` with
/// `η₁ min φ ≥ 2·2^{p−2} θ^{p−2} max S max φ^{p−1}`.
pub fn dyadic_theta(eta: f64, phi_min: f64, phi_max: f64, s_max: f64, p: f64) -> f64 {
    let bound = eta * phi_min / (2.0 * 2f64.powf(p - 2.0) * s_max * phi_max.powf(p - 1.0));
    let mut theta = 2f64.powf((bound.log2() / (p - 2.0)).floor());
    let holds = |t: f64| eta * phi_min >= 2.0 * 2f64.powf(p - 2.0) * t.powf(p - 2.0) * s_max * phi_max.powf(p - 1.0);
    while !holds(theta) {
        theta *= 0.5;
    }
    while holds(2.0 * theta) {
        theta *= 2.0;
    }
    theta
}

/// Scales the first eigenfunction into a strict pointwise super-solution.
/// `eig` must come from the lumped pencil of `ops`.
pub fn scale_eigenfunction(
    ops: &AssembledOperators,
    eig: &EigenResult,
    s: &ScalarField,
    constants: DimensionConstants,
) -> Result<ScaledEigenfunction> {
    let eta = eig.eigenvalue;
    if !(eta > 0.0) {
        return Err(CywError::precondition(Stage::Supersolution, format!("first eigenvalue {eta:.6e} is not positive")));
    }
    let phi = &eig.eigenfunction;
    let phi_min = phi.min();
    if !(phi_min > 0.0) {
        return Err(CywError::precondition(
            Stage::Supersolution,
            format!("first eigenfunction is not positive (min {phi_min:.3e})"),
        ));
    }
    let s_max = s.max();
    if !(s_max > 0.0) {
        return Err(CywError::precondition(Stage::Supersolution, "max S is not positive"));
    }
    let p = constants.p;
    let theta = dyadic_theta(eta, phi_min, phi.max(), s_max, p);
    let field = ScalarField {
        values: phi.values.iter().map(|x| theta * x).collect(),
        mesh_id: phi.mesh_id,
    };
    let au = ops.lumped_conformal_matrix().mul(&field.values);
    let pointwise_margin = ops
        .free
        .iter()
        .map(|&v| au[v] / ops.lumped_mass[v] - s.values[v] * field.values[v].powf(p - 1.0))
        .fold(f64::INFINITY, f64::min);
    if !(pointwise_margin > 0.0) {
        return Err(CywError::failure(
            Stage::Supersolution,
            format!("scaled eigenfunction fails the pointwise super-solution check (margin {pointwise_margin:.3e})"),
        ));
    }
    Ok(ScaledEigenfunction {
        theta,
        eigenvalue: eta,
        base: phi.clone(),
        field,
        pointwise_margin,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn theta_is_largest_dyadic() {
        let t = dyadic_theta(6.0, 1.0, 1.0, 6.0, 6.0);
        // 1 ≥ 32 θ⁴ gives θ ≤ 0.42, so 0.25.
        assert_eq!(t, 0.25);
        let t2 = dyadic_theta(6.0, 1.0, 1.0, 12.0, 6.0);
        assert!(t2 <= t);
    }
}
