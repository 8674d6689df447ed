//! Stereographic charts of the unit sphere in `R^{n+1}`.

use crate::error::{CywError, Result, Stage};

/// Unit vector `(ξ₁, …, ξ_n, τ)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpherePoint {
    ambient: Vec<f64>,
}

impl SpherePoint {
    pub const UNIT_TOLERANCE: f64 = 1e-12;

    pub fn new(ambient: Vec<f64>) -> Result<Self> {
        if ambient.len() < 2 {
            return Err(CywError::invalid(Stage::Obstruction, "sphere point needs at least two coordinates"));
        }
        let norm = ambient.iter().map(|x| x * x).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > Self::UNIT_TOLERANCE {
            return Err(CywError::invalid(Stage::Obstruction, format!("point is not on the unit sphere (|x| = {norm:.15})")));
        }
        Ok(SpherePoint { ambient })
    }

    /// Projects a nonzero vector to the sphere.
    pub fn normalized(x: &[f64]) -> Result<Self> {
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(CywError::invalid(Stage::Obstruction, "cannot normalize a zero vector"));
        }
        Ok(SpherePoint {
            ambient: x.iter().map(|v| v / norm).collect(),
        })
    }

    pub fn ambient(&self) -> &[f64] {
        &self.ambient
    }

    /// `n` for a point of `S^n`.
    pub fn sphere_dim(&self) -> usize {
        self.ambient.len() - 1
    }

    pub fn tau(&self) -> f64 {
        self.ambient[self.ambient.len() - 1]
    }

    pub fn xi(&self) -> &[f64] {
        &self.ambient[..self.ambient.len() - 1]
    }

    pub fn antipode(&self) -> SpherePoint {
        SpherePoint {
            ambient: self.ambient.iter().map(|x| -x).collect(),
        }
    }
}

/// Projection center of a stereographic chart.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Pole {
    /// `σ₁ = ξ/(1 − τ)`, sends the south pole to the origin.
    North,
    /// `σ₂ = ξ/(1 + τ)`, sends the north pole to the origin.
    South,
}

impl Pole {
    fn sign(self) -> f64 {
        match self {
            Pole::North => 1.0,
            Pole::South => -1.0,
        }
    }
}

pub fn stereo_forward(point: &SpherePoint, pole: Pole) -> Result<Vec<f64>> {
    let denom = 1.0 - pole.sign() * point.tau();
    if denom.abs() < 1e-12 {
        return Err(CywError::invalid(Stage::Obstruction, "point is the excluded pole of the chart"));
    }
    Ok(point.xi().iter().map(|x| x / denom).collect())
}

/// `σ₁⁻¹(x) = (2x, |x|² − 1)/(1 + |x|²)`, `σ₂⁻¹(x) = (2x, 1 − |x|²)/(1 + |x|²)`.
pub fn stereo_inverse(x: &[f64], pole: Pole) -> SpherePoint {
    let r2: f64 = x.iter().map(|v| v * v).sum();
    let d = 1.0 + r2;
    let mut ambient: Vec<f64> = x.iter().map(|v| 2.0 * v / d).collect();
    ambient.push(pole.sign() * (r2 - 1.0) / d);
    SpherePoint { ambient }
}

/// `Φ(x) = (2/(1 + |x|²))^{(n−2)/2}`, so that the round metric pulls back to
/// `Φ^{4/(n−2)} g_e = (2/(1 + |x|²))² g_e`.
pub fn conformal_factor_phi(x: &[f64], n: u32) -> f64 {
    let r2: f64 = x.iter().map(|v| v * v).sum();
    (2.0 / (1.0 + r2)).powf((f64::from(n) - 2.0) / 2.0)
}

/// Jacobian `∂σ⁻¹/∂x` as `n + 1` rows of length `n`.
pub fn inverse_jacobian(x: &[f64], pole: Pole) -> Vec<Vec<f64>> {
    let n = x.len();
    let r2: f64 = x.iter().map(|v| v * v).sum();
    let d = 1.0 + r2;
    let mut jac = vec![vec![0.0; n]; n + 1];
    for i in 0..n {
        for j in 0..n {
            let delta = if i == j { 1.0 } else { 0.0 };
            jac[i][j] = 2.0 * delta / d - 4.0 * x[i] * x[j] / (d * d);
        }
    }
    for j in 0..n {
        jac[n][j] = pole.sign() * 4.0 * x[j] / (d * d);
    }
    jac
}

/// Pullback of the round metric by `σ⁻¹` at `x`, `JᵀJ`.
pub fn pullback_metric(x: &[f64], pole: Pole) -> Vec<Vec<f64>> {
    let jac = inverse_jacobian(x, pole);
    let n = x.len();
    let mut g = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            g[i][j] = jac.iter().map(|row| row[i] * row[j]).sum();
        }
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn poles_map_to_origin() {
        let south = SpherePoint::new(vec![0.0, 0.0, 0.0, -1.0]).unwrap();
        assert_eq!(stereo_forward(&south, Pole::North).unwrap(), vec![0.0; 3]);
        assert_eq!(stereo_inverse(&[0.0; 3], Pole::North), south);
        assert_eq!(stereo_inverse(&[0.0; 3], Pole::South), south.antipode());
        assert!(stereo_forward(&south.antipode(), Pole::North).is_err());
    }

    #[test]
    fn equator_is_fixed() {
        let e = SpherePoint::new(vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(stereo_forward(&e, Pole::North).unwrap(), vec![1.0, 0.0, 0.0]);
        assert_eq!(stereo_forward(&e, Pole::South).unwrap(), vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn factor_at_origin() {
        assert!((conformal_factor_phi(&[0.0; 3], 3) - 2f64.sqrt()).abs() < 1e-15);
        let p = 6.0;
        assert!((conformal_factor_phi(&[0.0; 3], 3).powf(p - 2.0) - 4.0).abs() < 1e-14);
        assert!(conformal_factor_phi(&[1e4, 0.0, 0.0], 3) < 1e-3);
    }
}
