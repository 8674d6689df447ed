//! Degree-2 quadrature rules on the reference tetrahedron and triangle.
//!
//! Weights are normalised to sum to the reference measure (1/6 for the
//! tetrahedron, 1/2 for the triangle).

const TET_A: f64 = 0.585_410_196_624_968_5;
const TET_B: f64 = 0.138_196_601_125_010_5;

/// Barycentric coordinates of the four tetrahedron points.
pub const TET_POINTS: [[f64; 4]; 4] = [
    [TET_A, TET_B, TET_B, TET_B],
    [TET_B, TET_A, TET_B, TET_B],
    [TET_B, TET_B, TET_A, TET_B],
    [TET_B, TET_B, TET_B, TET_A],
];

pub const TET_WEIGHT: f64 = 1.0 / 24.0;

/// Barycentric coordinates of the three triangle points.
pub const TRI_POINTS: [[f64; 3]; 3] = [
    [2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0],
    [1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0],
    [1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0],
];

pub const TRI_WEIGHT: f64 = 1.0 / 6.0;

/// Reference-coordinate gradients of the four barycentric functions.
pub const BARY_GRADIENTS: [[f64; 3]; 4] = [
    [-1.0, -1.0, -1.0],
    [1.0, 0.0, 0.0],
    [0.0, 1.0, 0.0],
    [0.0, 0.0, 1.0],
];

/// Tetrahedron barycentric point of the triangle point `tri` on the face
/// whose local vertices are `face`.
pub fn face_point_in_tet(face: [usize; 3], tri: [f64; 3]) -> [f64; 4] {
    let mut b = [0.0; 4];
    for (k, &lv) in face.iter().enumerate() {
        b[lv] = tri[k];
    }
    b
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tet_rule_is_exact_for_quadratics() {
        // ∫ λ0 λ1 over the reference tetrahedron equals 1/120.
        let v: f64 = TET_POINTS.iter().map(|b| TET_WEIGHT * b[0] * b[1]).sum();
        assert!((v - 1.0 / 120.0).abs() < 1e-15);
        // ∫ λ0² equals 2/120.
        let v: f64 = TET_POINTS.iter().map(|b| TET_WEIGHT * b[0] * b[0]).sum();
        assert!((v - 2.0 / 120.0).abs() < 1e-15);
        let w: f64 = TET_POINTS.iter().map(|_| TET_WEIGHT).sum();
        assert!((w - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn triangle_rule_is_exact_for_quadratics() {
        // ∫ λ0 λ1 over the reference triangle equals 1/24, ∫ λ0² equals 1/12.
        let v: f64 = TRI_POINTS.iter().map(|b| TRI_WEIGHT * b[0] * b[1]).sum();
        assert!((v - 1.0 / 24.0).abs() < 1e-15);
        let v: f64 = TRI_POINTS.iter().map(|b| TRI_WEIGHT * b[0] * b[0]).sum();
        assert!((v - 1.0 / 12.0).abs() < 1e-15);
    }
}
