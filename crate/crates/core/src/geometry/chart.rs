//! Maps from the reference tetrahedron into chart coordinates.
//!
//! Every tetrahedron is parametrised by barycentric coordinates. The chart
//! determines the image point and the Jacobian with respect to the three
//! reference directions `λ1, λ2, λ3` (vertex 0 as origin).

use super::mesh::Mesh;

/// Smooth maps from a cube grid onto curved domains.
#[derive(Clone, Debug, PartialEq)]
pub enum CubeMap {
    /// Elliptical grid map of `[-1, 1]^3` onto the closed unit ball.
    EllipticBall,
    /// Map of the cube shell `1 ≤ |y|_∞ ≤ 2` onto the spherical shell
    /// `inner ≤ |x| ≤ outer`.
    Shell { inner: f64, outer: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub enum Chart {
    /// Tetrahedra are affine in the stored coordinates.
    Affine,
    /// Affine tetrahedra on the torus `R^3 / (period Z)^3`.
    Periodic { period: f64 },
    /// Tetrahedra are affine in `base` coordinates and mapped through `map`;
    /// the mesh stores the mapped vertex positions.
    Mapped { map: CubeMap, base: Vec<[f64; 3]> },
    /// Secant tetrahedra in `R^4` projected radially onto the unit sphere.
    RadialSphere,
}

/// Image point (first `dim` entries used) and Jacobian rows per ambient
/// coordinate.
#[derive(Clone, Copy, Debug)]
pub struct ChartSample {
    pub point: [f64; 4],
    pub jac: [[f64; 3]; 4],
}

impl Chart {
    pub fn ambient_dim(&self) -> usize {
        match self {
            Chart::RadialSphere => 4,
            _ => 3,
        }
    }

    pub fn sample(&self, mesh: &Mesh, tet: usize, bary: &[f64; 4]) -> ChartSample {
        let t = mesh.tets()[tet];
        let mut out = ChartSample {
            point: [0.0; 4],
            jac: [[0.0; 3]; 4],
        };
        match self {
            Chart::Affine | Chart::Periodic { .. } => {
                let x0 = mesh.vertex(t[0]);
                let d: Vec<Vec<f64>> = (1..4).map(|i| mesh.delta(t[0], t[i])).collect();
                for r in 0..3 {
                    out.point[r] = x0[r] + (0..3).map(|i| bary[i + 1] * d[i][r]).sum::<f64>();
                    for c in 0..3 {
                        out.jac[r][c] = d[c][r];
                    }
                }
            }
            Chart::Mapped { map, base } => {
                let y0 = base[t[0]];
                let mut e = [[0.0; 3]; 3];
                let mut y = [0.0; 3];
                for r in 0..3 {
                    for c in 0..3 {
                        e[r][c] = base[t[c + 1]][r] - y0[r];
                    }
                    y[r] = (0..4).map(|i| bary[i] * base[t[i]][r]).sum();
                }
                let (x, df) = map.eval(y);
                for r in 0..3 {
                    out.point[r] = x[r];
                    for c in 0..3 {
                        out.jac[r][c] = (0..3).map(|k| df[r][k] * e[k][c]).sum();
                    }
                }
            }
            Chart::RadialSphere => {
                let mut y = [0.0; 4];
                let mut e = [[0.0; 3]; 4];
                let x0 = mesh.vertex(t[0]);
                for r in 0..4 {
                    y[r] = (0..4).map(|i| bary[i] * mesh.vertex(t[i])[r]).sum();
                    for c in 0..3 {
                        e[r][c] = mesh.vertex(t[c + 1])[r] - x0[r];
                    }
                }
                let ny = y.iter().map(|v| v * v).sum::<f64>().sqrt();
                let z = [y[0] / ny, y[1] / ny, y[2] / ny, y[3] / ny];
                for c in 0..3 {
                    let dot: f64 = (0..4).map(|r| z[r] * e[r][c]).sum();
                    for r in 0..4 {
                        out.jac[r][c] = (e[r][c] - z[r] * dot) / ny;
                    }
                }
                out.point = z;
            }
        }
        out
    }

    /// Chart distance between two points (geodesic angle on the sphere,
    /// minimum image on the torus, Euclidean otherwise).
    pub fn distance(&self, x: &[f64], y: &[f64]) -> f64 {
        match self {
            Chart::RadialSphere => {
                let nx = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                let ny = y.iter().map(|v| v * v).sum::<f64>().sqrt();
                let dot: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>() / (nx * ny);
                let cross2 = 1.0 - dot * dot;
                cross2.max(0.0).sqrt().atan2(dot)
            }
            Chart::Periodic { period } => x
                .iter()
                .zip(y)
                .map(|(a, b)| {
                    let d = b - a;
                    let d = d - period * (d / period).round();
                    d * d
                })
                .sum::<f64>()
                .sqrt(),
            _ => x.iter().zip(y).map(|(a, b)| (b - a) * (b - a)).sum::<f64>().sqrt(),
        }
    }
}

impl CubeMap {
    /// Image point and Jacobian `∂x/∂y`.
    pub fn eval(&self, y: [f64; 3]) -> ([f64; 3], [[f64; 3]; 3]) {
        match *self {
            CubeMap::EllipticBall => elliptic_ball(y),
            CubeMap::Shell { inner, outer } => shell(y, inner, outer),
        }
    }
}

fn elliptic_ball(y: [f64; 3]) -> ([f64; 3], [[f64; 3]; 3]) {
    let mut x = [0.0; 3];
    let mut j = [[0.0; 3]; 3];
    for i in 0..3 {
        let (a, b) = (y[(i + 1) % 3], y[(i + 2) % 3]);
        let q = 1.0 - 0.5 * a * a - 0.5 * b * b + a * a * b * b / 3.0;
        let s = q.sqrt();
        x[i] = y[i] * s;
        j[i][i] = s;
        j[i][(i + 1) % 3] = y[i] * (-a + 2.0 * a * b * b / 3.0) / (2.0 * s);
        j[i][(i + 2) % 3] = y[i] * (-b + 2.0 * a * a * b / 3.0) / (2.0 * s);
    }
    (x, j)
}

fn shell(y: [f64; 3], inner: f64, outer: f64) -> ([f64; 3], [[f64; 3]; 3]) {
    let norm = (y[0] * y[0] + y[1] * y[1] + y[2] * y[2]).sqrt();
    let mut k = 0;
    for i in 1..3 {
        if y[i].abs() > y[k].abs() {
            k = i;
        }
    }
    let m = y[k].abs();
    let rho = inner + (m - 1.0) * (outer - inner);
    let drho = outer - inner;
    let yh = [y[0] / norm, y[1] / norm, y[2] / norm];
    let mut x = [0.0; 3];
    let mut j = [[0.0; 3]; 3];
    for r in 0..3 {
        x[r] = yh[r] * rho;
        for c in 0..3 {
            let proj = if r == c { 1.0 } else { 0.0 } - yh[r] * yh[c];
            j[r][c] = rho * proj / norm;
        }
        j[r][k] += yh[r] * drho * y[k].signum();
    }
    (x, j)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_check(map: &CubeMap, y: [f64; 3]) {
        let (_, j) = map.eval(y);
        let h = 1e-6;
        for c in 0..3 {
            let mut yp = y;
            let mut ym = y;
            yp[c] += h;
            ym[c] -= h;
            let (xp, _) = map.eval(yp);
            let (xm, _) = map.eval(ym);
            for r in 0..3 {
                let fd = (xp[r] - xm[r]) / (2.0 * h);
                assert!((fd - j[r][c]).abs() < 1e-6, "r={r} c={c} fd={fd} j={}", j[r][c]);
            }
        }
    }

    #[test]
    fn elliptic_map_jacobian_matches_finite_differences() {
        fd_check(&CubeMap::EllipticBall, [0.3, -0.7, 0.45]);
        fd_check(&CubeMap::EllipticBall, [0.9, 0.8, -0.1]);
    }

    #[test]
    fn elliptic_map_sends_cube_faces_to_unit_sphere() {
        for y in [[1.0, 0.3, -0.2], [0.5, -1.0, 0.9], [1.0, 1.0, 1.0], [-0.2, 0.1, -1.0]] {
            let (x, _) = elliptic_ball(y);
            let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
            assert!((r - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn shell_map_jacobian_matches_finite_differences() {
        let m = CubeMap::Shell { inner: 0.5, outer: 1.0 };
        fd_check(&m, [1.5, 0.3, -0.2]);
        fd_check(&m, [-0.4, -1.7, 0.9]);
    }

    #[test]
    fn shell_map_hits_both_radii() {
        let (x, _) = shell([1.0, 0.2, 0.3], 0.5, 1.0);
        assert!(((x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt() - 0.5).abs() < 1e-14);
        let (x, _) = shell([2.0, -1.2, 0.3], 0.5, 1.0);
        assert!(((x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn sphere_distance_is_angle() {
        let c = Chart::RadialSphere;
        let d = c.distance(&[1.0, 0.0, 0.0, 0.0], &[0.0, 1.0, 0.0, 0.0]);
        assert!((d - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
    }
}
