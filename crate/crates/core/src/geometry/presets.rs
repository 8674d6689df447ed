//! Closed-form geometry presets and their mesh generators.
//!
//! Cube grids use the reflected Kuhn subdivision: each cell is cut into six
//! tetrahedra along the diagonal starting at the cell corner nearest to the
//! origin. The triangulation is then symmetric under coordinate reflections
//! and conforming across every shared face.

use super::chart::{Chart, CubeMap};
use super::mesh::Mesh;
use crate::error::{CywError, Result, Stage};
use std::collections::HashMap;
use std::f64::consts::PI;

/// Largest vertex count a preset may produce.
pub const VERTEX_BUDGET: u128 = 1_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PresetId {
    RoundS3,
    FlatT3,
    BallNegR,
    Annulus,
    BumpT3,
}

impl PresetId {
    pub const ALL: [PresetId; 5] = [
        PresetId::RoundS3,
        PresetId::FlatT3,
        PresetId::BallNegR,
        PresetId::Annulus,
        PresetId::BumpT3,
    ];

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "round-s3" => Ok(PresetId::RoundS3),
            "flat-t3" => Ok(PresetId::FlatT3),
            "ball-negR" => Ok(PresetId::BallNegR),
            "annulus" => Ok(PresetId::Annulus),
            "bump-t3" => Ok(PresetId::BumpT3),
            other => Err(CywError::invalid(Stage::Geometry, format!("unknown preset '{other}'"))),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PresetId::RoundS3 => "round-s3",
            PresetId::FlatT3 => "flat-t3",
            PresetId::BallNegR => "ball-negR",
            PresetId::Annulus => "annulus",
            PresetId::BumpT3 => "bump-t3",
        }
    }

    /// Closed manifolds have no boundary faces.
    pub fn is_closed(self) -> bool {
        matches!(self, PresetId::RoundS3 | PresetId::FlatT3 | PresetId::BumpT3)
    }

    /// Number of vertices produced at `refinement`.
    pub fn vertex_count(self, refinement: u32) -> u128 {
        if refinement > 24 {
            return u128::MAX;
        }
        let s = 1u128 << refinement;
        match self {
            PresetId::RoundS3 => (2 * s + 1).pow(4) - (2 * s - 1).pow(4),
            PresetId::FlatT3 | PresetId::BumpT3 => (4 * s).pow(3),
            PresetId::BallNegR => (4 * s + 1).pow(3),
            PresetId::Annulus => (4 * s + 1).pow(3) - (2 * s - 1).pow(3),
        }
    }
}

/// Tunable shape parameters of the presets.
#[derive(Clone, Debug, PartialEq)]
pub struct PresetParams {
    /// `A` in the ball conformal factor `w = 1 + A|x|²`.
    pub ball_amplitude: f64,
    /// `A` in the torus bump `w = 1 + A(cos 2πx + cos 2πy + cos 2πz)`.
    pub bump_amplitude: f64,
    pub annulus_inner: f64,
    pub annulus_outer: f64,
}

impl Default for PresetParams {
    fn default() -> Self {
        PresetParams {
            ball_amplitude: 0.25,
            bump_amplitude: 0.05,
            annulus_inner: 0.5,
            annulus_outer: 1.0,
        }
    }
}

/// Pointwise closed-form data of a preset, evaluated in chart coordinates.
#[derive(Clone, Debug, PartialEq)]
pub enum Model {
    RoundSphere,
    FlatTorus,
    BumpTorus { amplitude: f64 },
    Ball { amplitude: f64 },
    Annulus { inner: f64, outer: f64 },
}

impl Model {
    /// Factor `c` with chart metric `c·δ`.
    pub fn metric_factor(&self, x: &[f64]) -> f64 {
        match *self {
            Model::BumpTorus { amplitude } => bump_weight(amplitude, x).powi(4),
            Model::Ball { amplitude } => (1.0 + amplitude * norm2(x)).powi(4),
            _ => 1.0,
        }
    }

    pub fn scalar_curvature(&self, x: &[f64]) -> f64 {
        match *self {
            Model::RoundSphere => 6.0,
            Model::FlatTorus | Model::Annulus { .. } => 0.0,
            Model::BumpTorus { amplitude } => {
                32.0 * PI * PI * amplitude * cos_sum(x) / bump_weight(amplitude, x).powi(5)
            }
            Model::Ball { amplitude } => -48.0 * amplitude / (1.0 + amplitude * norm2(x)).powi(5),
        }
    }

    /// Boundary mean curvature (average of principal curvatures, outward
    /// normal) at a boundary point.
    pub fn mean_curvature(&self, x: &[f64]) -> f64 {
        match *self {
            Model::Ball { amplitude } => (1.0 + 5.0 * amplitude) / (1.0 + amplitude).powi(3),
            Model::Annulus { inner, outer } => {
                if norm2(x).sqrt() < 0.5 * (inner + outer) {
                    -1.0 / inner
                } else {
                    1.0 / outer
                }
            }
            _ => 0.0,
        }
    }

    /// Factor `ψ` with `g = ψ^{p−2}·g_flat` on the conformally flat chart.
    pub fn conformal_flat_factor(&self, x: &[f64]) -> f64 {
        match *self {
            Model::RoundSphere => (1.0 - x[3]).max(0.0).sqrt(),
            Model::BumpTorus { amplitude } => bump_weight(amplitude, x),
            Model::Ball { amplitude } => 1.0 + amplitude * norm2(x),
            _ => 1.0,
        }
    }

    /// Closed-form total volume.
    pub fn volume(&self) -> f64 {
        match *self {
            Model::RoundSphere => 2.0 * PI * PI,
            Model::FlatTorus => 1.0,
            Model::BumpTorus { amplitude } => (0..=6)
                .map(|k| binomial(6, k) * amplitude.powi(k as i32) * cos_sum_moment(k))
                .sum(),
            Model::Ball { amplitude } => {
                4.0 * PI
                    * (0..=6)
                        .map(|k| binomial(6, k) * amplitude.powi(k as i32) / (2 * k + 3) as f64)
                        .sum::<f64>()
            }
            Model::Annulus { inner, outer } => 4.0 * PI / 3.0 * (outer.powi(3) - inner.powi(3)),
        }
    }

    /// Vertices where the preset declares `R_g < 0`.
    pub fn in_marked_region(&self, x: &[f64]) -> bool {
        match *self {
            Model::BumpTorus { .. } => cos_sum(x) < 0.0,
            Model::Ball { amplitude } => amplitude > 0.0,
            _ => false,
        }
    }

    pub fn has_marked_region(&self) -> bool {
        matches!(self, Model::BumpTorus { .. } | Model::Ball { .. })
    }
}

fn norm2(x: &[f64]) -> f64 {
    x.iter().take(3).map(|v| v * v).sum()
}

fn cos_sum(x: &[f64]) -> f64 {
    x.iter().take(3).map(|v| (2.0 * PI * v).cos()).sum()
}

fn bump_weight(amplitude: f64, x: &[f64]) -> f64 {
    1.0 + amplitude * cos_sum(x)
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Torus average of `(cos 2πx + cos 2πy + cos 2πz)^k`.
fn cos_sum_moment(k: usize) -> f64 {
    let single = |j: usize| if j % 2 == 1 { 0.0 } else { binomial(j, j / 2) / 2f64.powi(j as i32) };
    let mut total = 0.0;
    for a in 0..=k {
        for b in 0..=(k - a) {
            let c = k - a - b;
            let multinomial = binomial(k, a) * binomial(k - a, b);
            total += multinomial * single(a) * single(b) * single(c);
        }
    }
    total
}

/// Mesh, chart and model for a preset.
pub struct PresetMesh {
    pub mesh: Mesh,
    pub chart: Chart,
    pub model: Model,
}

pub fn generate(id: PresetId, refinement: u32, params: &PresetParams) -> Result<PresetMesh> {
    let count = id.vertex_count(refinement);
    if count > VERTEX_BUDGET {
        return Err(CywError::invalid(
            Stage::Geometry,
            format!("refinement {refinement} of {} needs {count} vertices (budget {VERTEX_BUDGET})", id.as_str()),
        ));
    }
    if params.ball_amplitude < 0.0 || params.bump_amplitude < 0.0 || params.bump_amplitude >= 1.0 / 3.0 {
        return Err(CywError::invalid(Stage::Geometry, "preset amplitude out of range"));
    }
    if !(params.annulus_inner > 0.0 && params.annulus_outer > params.annulus_inner) {
        return Err(CywError::invalid(Stage::Geometry, "annulus radii must satisfy 0 < inner < outer"));
    }
    let s = 1usize << refinement;
    let out = match id {
        PresetId::RoundS3 => {
            let (coords, tets) = tesseract_sphere(s as i64);
            PresetMesh {
                mesh: Mesh::new(4, coords, tets, None)?,
                chart: Chart::RadialSphere,
                model: Model::RoundSphere,
            }
        }
        PresetId::FlatT3 | PresetId::BumpT3 => {
            let (coords, tets) = periodic_grid(4 * s);
            let model = if id == PresetId::FlatT3 {
                Model::FlatTorus
            } else {
                Model::BumpTorus {
                    amplitude: params.bump_amplitude,
                }
            };
            PresetMesh {
                mesh: Mesh::new(3, coords, tets, Some(1.0))?,
                chart: Chart::Periodic { period: 1.0 },
                model,
            }
        }
        PresetId::BallNegR => {
            let (base, tets) = reflected_cube_grid(4 * s, -1.0, |_| true);
            mapped(base, tets, CubeMap::EllipticBall, Model::Ball {
                amplitude: params.ball_amplitude,
            })?
        }
        PresetId::Annulus => {
            let (inner, outer) = (params.annulus_inner, params.annulus_outer);
            let n = 4 * s;
            let (base, tets) = reflected_cube_grid(n, -2.0, |c| {
                // Keep the cell unless it lies inside the open cube (−1, 1)³.
                let h = 4.0 / n as f64;
                (0..3).any(|i| {
                    let lo = -2.0 + c[i] as f64 * h;
                    lo + h <= -1.0 + 1e-12 || lo >= 1.0 - 1e-12
                })
            });
            mapped(base, tets, CubeMap::Shell { inner, outer }, Model::Annulus { inner, outer })?
        }
    };
    Ok(out)
}

fn mapped(base: Vec<[f64; 3]>, tets: Vec<[usize; 4]>, map: CubeMap, model: Model) -> Result<PresetMesh> {
    let mut coords = Vec::with_capacity(base.len() * 3);
    for y in &base {
        coords.extend_from_slice(&map.eval(*y).0);
    }
    Ok(PresetMesh {
        mesh: Mesh::new(3, coords, tets, None)?,
        chart: Chart::Mapped { map, base },
        model,
    })
}

const PERMUTATIONS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];

/// Lattice offsets (relative to `corner`) of the six Kuhn tetrahedra of a
/// cell whose diagonal runs from `corner` in the directions `signs`.
fn kuhn_paths(signs: [i64; 3]) -> Vec<[[i64; 3]; 4]> {
    let mut out = Vec::with_capacity(6);
    for perm in PERMUTATIONS {
        let mut path = [[0i64; 3]; 4];
        for step in 0..3 {
            path[step + 1] = path[step];
            path[step + 1][perm[step]] += signs[perm[step]];
        }
        let det = det3i(path[1], path[2], path[3]);
        if det < 0 {
            path.swap(2, 3);
        }
        out.push(path);
    }
    out
}

fn det3i(a: [i64; 3], b: [i64; 3], c: [i64; 3]) -> i64 {
    a[0] * (b[1] * c[2] - b[2] * c[1]) - a[1] * (b[0] * c[2] - b[2] * c[0]) + a[2] * (b[0] * c[1] - b[1] * c[0])
}

/// Reflected Kuhn grid of `n` cells per axis on `[lo, −lo]³`. Returns base
/// coordinates and tetrahedra of the kept cells.
fn reflected_cube_grid(n: usize, lo: f64, keep: impl Fn([usize; 3]) -> bool) -> (Vec<[f64; 3]>, Vec<[usize; 4]>) {
    let h = -2.0 * lo / n as f64;
    let mut index: HashMap<[i64; 3], usize> = HashMap::new();
    let mut base = Vec::new();
    let mut tets = Vec::new();
    let half = n as i64;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let cell = [i, j, k];
                if !keep(cell) {
                    continue;
                }
                // Lattice coordinates doubled about the centre so that the
                // origin is lattice point 0.
                let mut corner = [0i64; 3];
                let mut signs = [0i64; 3];
                for a in 0..3 {
                    let l = 2 * cell[a] as i64 - half;
                    let u = l + 2;
                    if l.abs() <= u.abs() {
                        corner[a] = l;
                        signs[a] = 2;
                    } else {
                        corner[a] = u;
                        signs[a] = -2;
                    }
                }
                for path in kuhn_paths(signs) {
                    let mut tet = [0usize; 4];
                    for (slot, off) in path.iter().enumerate() {
                        let key = [corner[0] + off[0], corner[1] + off[1], corner[2] + off[2]];
                        let next = base.len();
                        let v = *index.entry(key).or_insert_with(|| {
                            base.push([
                                key[0] as f64 * h / 2.0,
                                key[1] as f64 * h / 2.0,
                                key[2] as f64 * h / 2.0,
                            ]);
                            next
                        });
                        tet[slot] = v;
                    }
                    tets.push(tet);
                }
            }
        }
    }
    (base, tets)
}

/// Standard Kuhn grid of the unit torus with `n` cells per axis.
fn periodic_grid(n: usize) -> (Vec<f64>, Vec<[usize; 4]>) {
    let mut coords = Vec::with_capacity(3 * n * n * n);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                coords.extend_from_slice(&[i as f64 / n as f64, j as f64 / n as f64, k as f64 / n as f64]);
            }
        }
    }
    let id = |a: i64, b: i64, c: i64| {
        let w = |x: i64| x.rem_euclid(n as i64) as usize;
        (w(a) * n + w(b)) * n + w(c)
    };
    let mut tets = Vec::with_capacity(6 * n * n * n);
    let paths = kuhn_paths([1, 1, 1]);
    for i in 0..n as i64 {
        for j in 0..n as i64 {
            for k in 0..n as i64 {
                for path in &paths {
                    let mut tet = [0usize; 4];
                    for (slot, off) in path.iter().enumerate() {
                        tet[slot] = id(i + off[0], j + off[1], k + off[2]);
                    }
                    tets.push(tet);
                }
            }
        }
    }
    (coords, tets)
}

/// Boundary of the 4-cube `[−m, m]⁴` with each facet cut by the reflected
/// Kuhn grid, vertices projected to the unit sphere.
fn tesseract_sphere(m: i64) -> (Vec<f64>, Vec<[usize; 4]>) {
    let mut index: HashMap<[i64; 4], usize> = HashMap::new();
    let mut lattice: Vec<[i64; 4]> = Vec::new();
    let mut tets = Vec::new();
    for axis in 0..4 {
        for side in [-m, m] {
            let free: Vec<usize> = (0..4).filter(|&a| a != axis).collect();
            for i in -m..m {
                for j in -m..m {
                    for k in -m..m {
                        let cell = [i, j, k];
                        let mut corner = [0i64; 3];
                        let mut signs = [0i64; 3];
                        for a in 0..3 {
                            let (l, u) = (cell[a], cell[a] + 1);
                            if l.abs() <= u.abs() {
                                corner[a] = l;
                                signs[a] = 1;
                            } else {
                                corner[a] = u;
                                signs[a] = -1;
                            }
                        }
                        for path in kuhn_paths(signs) {
                            let mut tet = [0usize; 4];
                            let mut pts = [[0i64; 4]; 4];
                            for (slot, off) in path.iter().enumerate() {
                                let mut key = [0i64; 4];
                                key[axis] = side;
                                for a in 0..3 {
                                    key[free[a]] = corner[a] + off[a];
                                }
                                pts[slot] = key;
                                let next = lattice.len();
                                tet[slot] = *index.entry(key).or_insert_with(|| {
                                    lattice.push(key);
                                    next
                                });
                            }
                            if det4_oriented(&pts) < 0 {
                                tet.swap(2, 3);
                            }
                            tets.push(tet);
                        }
                    }
                }
            }
        }
    }
    let mut coords = Vec::with_capacity(4 * lattice.len());
    for key in &lattice {
        let n = key.iter().map(|&v| (v * v) as f64).sum::<f64>().sqrt();
        coords.extend(key.iter().map(|&v| v as f64 / n));
    }
    (coords, tets)
}

/// Sign of `det[c, p1 − p0, p2 − p0, p3 − p0]` with `c` the centroid; the
/// outward radial direction fixes the orientation of the sphere.
fn det4_oriented(p: &[[i64; 4]; 4]) -> i64 {
    let mut rows = [[0i64; 4]; 4];
    for r in 0..4 {
        rows[0][r] = p[0][r] + p[1][r] + p[2][r] + p[3][r];
        for e in 1..4 {
            rows[e][r] = p[e][r] - p[0][r];
        }
    }
    det4i(&rows)
}

fn det4i(m: &[[i64; 4]; 4]) -> i64 {
    let mut total = 0;
    for c in 0..4 {
        let mut minor = [[0i64; 3]; 3];
        for r in 1..4 {
            let mut cc = 0;
            for k in 0..4 {
                if k != c {
                    minor[r - 1][cc] = m[r][k];
                    cc += 1;
                }
            }
        }
        let sign = if c % 2 == 0 { 1 } else { -1 };
        total += sign * m[0][c] * det3i(minor[0], minor[1], minor[2]);
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vertex_counts_match_generated_meshes() {
        let p = PresetParams::default();
        for id in PresetId::ALL {
            for r in 0..2 {
                let g = generate(id, r, &p).unwrap();
                assert_eq!(g.mesh.vertex_count() as u128, id.vertex_count(r), "{:?} r={r}", id);
                assert_eq!(g.mesh.is_closed(), id.is_closed(), "{:?}", id);
            }
        }
    }

    #[test]
    fn budget_is_enforced() {
        assert!(generate(PresetId::RoundS3, 9, &PresetParams::default()).is_err());
    }

    #[test]
    fn torus_moments_are_exact() {
        // E[s] = 0, E[s²] = 3/2 for the sum of three independent cosines.
        assert!(cos_sum_moment(1).abs() < 1e-15);
        assert!((cos_sum_moment(2) - 1.5).abs() < 1e-15);
        assert!(cos_sum_moment(3).abs() < 1e-15);
    }

    #[test]
    fn unknown_preset_is_rejected() {
        assert!(PresetId::parse("hyperbolic").is_err());
        assert_eq!(PresetId::parse("ball-negR").unwrap(), PresetId::BallNegR);
    }
}
