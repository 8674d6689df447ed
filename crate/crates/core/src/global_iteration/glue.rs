//! Super-solution by blending the local solution with the scaled
//! eigenfunction through a partition of unity built on level sets of
//! `d = u₁ − φ`.
//!
//! Zones on the domain, for the current `γ`:
//!
//! | zone        | condition          | blend                         |
//! |-------------|--------------------|-------------------------------|
//! | upper core  | `d ≥ γ`            | `u₁`                          |
//! | upper ramp  | `γ/2 < d < γ`      | `χ₁u₁ + (1 − χ₁)(φ + γ)`      |
//! | middle      | `|d| ≤ γ/2`        | `φ + γ`                       |
//! | lower ramp  | `−γ < d < −γ/2`    | `χ₂φ + (1 − χ₂)(φ + γ)`       |
//! | lower core  | `d ≤ −γ`, off-domain | `φ`                         |
//!
//! On the upper ramp `χ₁` comes from the drift equation
//! `Σ_j K_ij w_j (v_j − v_i) = 0` with `w = u₁ − φ − γ`, which makes the
//! discrete product rule `K(w v) = v·Kw` exact on the unknowns. The lower
//! ramp uses the discrete harmonic equation. Both are clamped to `[0, 1]` and
//! mollified.

use super::inequalities::{check_side, Side, ORDER_SLACK};
use super::ScaledEigenfunction;
use crate::error::{CywError, Result, Stage};
use crate::geometry::{mollify, Domain, GeometrySpec, Mesh, ScalarField};
use crate::operators::AssembledOperators;
use std::cmp::Ordering;
use std::collections::BinaryHeap;

#[derive(Clone, Debug, PartialEq)]
pub struct GluingConfig {
    pub gamma: f64,
    pub theta: f64,
    pub mollifier_width: f64,
    pub transition_eps: f64,
    /// `max_Ω (η₁φ − 2^{p−2} S φ^{p−1})`.
    pub beta_margin: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct GlueOptions {
    pub gamma: Option<f64>,
    pub mollifier_width: Option<f64>,
    pub transition_eps: Option<f64>,
    /// Auto-tune rounds; 8 when zero.
    pub max_rounds: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GlueBranch {
    /// `φ ≥ u₁` on the domain, so `φ` itself is returned.
    Eigenfunction,
    Blended,
}

#[derive(Clone, Debug)]
pub struct GlueOutcome {
    pub field: ScalarField,
    pub config: GluingConfig,
    pub branch: GlueBranch,
    pub rounds: usize,
    /// Smallest strong super-solution residual.
    pub strong_margin: f64,
    /// `min_Ω (ū − u₁)`.
    pub dominance_gap: f64,
    /// `min (ū − φ)`.
    pub eigenfunction_gap: f64,
    /// Smallest `|d_i − d_j|/|e|` over edges where `d` changes sign.
    pub transversality: f64,
    /// `(u₁ᵀAu₁ − (p−1)Σ m S u₁^p) / Σ m u₁²`.
    pub linearized_rayleigh: f64,
}

/// Rayleigh quotient of `u₁` for the linearization `□ − (p−1)S u₁^{p−2}`.
/// A negative value rules out any super-solution `≥ u₁` on the support.
pub fn linearized_rayleigh(ops: &AssembledOperators, s: &[f64], u1: &[f64]) -> f64 {
    let p = ops.constants.p;
    let form = ops.lumped_conformal_matrix().quadratic_form(u1);
    let mut pw = 0.0;
    let mut l2 = 0.0;
    for v in 0..u1.len() {
        pw += ops.lumped_mass[v] * s[v] * u1[v].abs().powf(p);
        l2 += ops.lumped_mass[v] * u1[v] * u1[v];
    }
    (form - (p - 1.0) * pw) / l2
}

fn chart_edge_extremes(mesh: &Mesh, geom: &GeometrySpec) -> (f64, f64) {
    mesh.edges()
        .iter()
        .map(|&(a, b)| geom.chart.distance(mesh.vertex(a), mesh.vertex(b)))
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), d| (lo.min(d), hi.max(d)))
}

#[derive(PartialEq)]
struct Item(f64, usize);
impl Eq for Item {}
impl PartialOrd for Item {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Item {
    fn cmp(&self, o: &Self) -> Ordering {
        o.0.total_cmp(&self.0).then(o.1.cmp(&self.1))
    }
}

/// Edge-path distance to the source set, `∞` beyond `radius`.
fn collar_distance(mesh: &Mesh, geom: &GeometrySpec, source: &[bool], radius: f64) -> Vec<f64> {
    let mut dist = vec![f64::INFINITY; mesh.vertex_count()];
    let mut heap = BinaryHeap::new();
    for (v, &s) in source.iter().enumerate() {
        if s {
            dist[v] = 0.0;
            heap.push(Item(0.0, v));
        }
    }
    while let Some(Item(d, v)) = heap.pop() {
        if d > dist[v] {
            continue;
        }
        for &w in mesh.neighbors(v) {
            let nd = d + geom.chart.distance(mesh.vertex(v), mesh.vertex(w));
            if nd <= radius && nd < dist[w] {
                dist[w] = nd;
                heap.push(Item(nd, w));
            }
        }
    }
    dist
}

/// Solves `Σ_j c_ij (v_j − v_i) = 0` on the unknowns by Gauss–Seidel with
/// `c_ij = −K_ij·weight(j)`; other entries of `v` are held fixed.
fn transition_solve(ops: &AssembledOperators, unknown: &[bool], v: &mut [f64], weight: impl Fn(usize) -> f64) {
    let list: Vec<usize> = (0..v.len()).filter(|&i| unknown[i]).collect();
    for _ in 0..20_000 {
        let mut change = 0.0f64;
        for &i in &list {
            let mut num = 0.0;
            let mut den = 0.0;
            for (j, k) in ops.stiffness.row(i) {
                if j == i {
                    continue;
                }
                let c = -k * weight(j);
                num += c * v[j];
                den += c;
            }
            if den > 0.0 {
                let nv = num / den;
                change = change.max((nv - v[i]).abs());
                v[i] = nv;
            }
        }
        if change <= 1e-13 {
            break;
        }
    }
}

struct Blend {
    field: Vec<f64>,
    transversality: f64,
}

#[allow(clippy::too_many_arguments)]
fn blend(
    mesh: &Mesh,
    geom: &GeometrySpec,
    ops: &AssembledOperators,
    domain: &Domain,
    u1: &[f64],
    phi: &[f64],
    gamma: f64,
    eps: f64,
    width: f64,
) -> Result<Blend> {
    let n = mesh.vertex_count();
    let d: Vec<f64> = (0..n).map(|v| if domain.member[v] { u1[v] - phi[v] } else { f64::NEG_INFINITY }).collect();

    let mut transversality = f64::INFINITY;
    for (a, b) in mesh.edges() {
        if domain.member[a] && domain.member[b] && d[a] * d[b] <= 0.0 && (d[a] != 0.0 || d[b] != 0.0) {
            let len = geom.chart.distance(mesh.vertex(a), mesh.vertex(b));
            transversality = transversality.min((d[a] - d[b]).abs() / len);
        }
    }

    let upper_core: Vec<bool> = d.iter().map(|&x| x >= gamma).collect();
    let upper_ramp: Vec<bool> = d.iter().map(|&x| x > 0.5 * gamma && x < gamma).collect();
    let below_upper: Vec<bool> = d.iter().map(|&x| x <= 0.5 * gamma).collect();
    let lower_core: Vec<bool> = d.iter().map(|&x| x <= -gamma).collect();
    let lower_ramp: Vec<bool> = d.iter().map(|&x| x > -gamma && x < -0.5 * gamma).collect();
    let above_lower: Vec<bool> = d.iter().map(|&x| x >= -0.5 * gamma).collect();

    let ramp = |ramp: &[bool], one_side: &[bool], zero_side: &[bool], drift: bool| -> Vec<f64> {
        let to_one = collar_distance(mesh, geom, one_side, eps);
        let to_zero = collar_distance(mesh, geom, zero_side, eps);
        let mut v = vec![0.0; n];
        let mut unknown = vec![false; n];
        for i in 0..n {
            if one_side[i] {
                v[i] = 1.0;
            } else if ramp[i] {
                if to_one[i].is_finite() || to_zero[i].is_finite() {
                    v[i] = if to_one[i] <= to_zero[i] { 1.0 } else { 0.0 };
                } else {
                    unknown[i] = true;
                    // Linear profile in d as the starting guess.
                    let t = (d[i].abs() - 0.5 * gamma) / (0.5 * gamma);
                    v[i] = t.clamp(0.0, 1.0);
                }
            }
        }
        if drift {
            transition_solve(ops, &unknown, &mut v, |j| -(u1[j] - phi[j] - gamma));
        } else {
            transition_solve(ops, &unknown, &mut v, |_| 1.0);
        }
        v.iter_mut().for_each(|x| *x = x.clamp(0.0, 1.0));
        v
    };

    let v1 = ramp(&upper_ramp, &upper_core, &below_upper, true);
    let v2 = ramp(&lower_ramp, &lower_core, &above_lower, false);
    let m1 = mollify(mesh, geom, &ScalarField { values: v1, mesh_id: mesh.id() }, width)?;
    let m2 = mollify(mesh, geom, &ScalarField { values: v2, mesh_id: mesh.id() }, width)?;

    let mut field = vec![0.0; n];
    for v in 0..n {
        if !domain.member[v] {
            field[v] = phi[v];
            continue;
        }
        let chi1 = if upper_core[v] {
            1.0
        } else if upper_ramp[v] {
            m1.values[v]
        } else {
            0.0
        };
        let chi2 = if lower_core[v] {
            1.0
        } else if lower_ramp[v] {
            m2.values[v]
        } else {
            0.0
        };
        let chi3 = 1.0 - chi1 - chi2;
        field[v] = chi1 * u1[v] + chi2 * phi[v] + chi3 * (phi[v] + gamma);
    }
    Ok(Blend { field, transversality })
}

/// Largest dyadic `γ` with `20λγ + 2γ²·sup|R| < β/2`,
/// `31λ(max φ + γ)^{p−2}γ < β/2` and `γ < min_frontier φ / 2`.
pub fn admissible_gamma(lambda: f64, sup_r: f64, phi_max: f64, beta: f64, frontier_phi_min: f64, p: f64) -> Option<f64> {
    if !(beta > 0.0) || !(frontier_phi_min > 0.0) {
        return None;
    }
    let mut g = 1.0f64;
    for _ in 0..1100 {
        let c1 = 20.0 * lambda * g + 2.0 * g * g * sup_r < 0.5 * beta;
        let c2 = 31.0 * lambda * (phi_max + g).powf(p - 2.0) * g < 0.5 * beta;
        if c1 && c2 && g < 0.5 * frontier_phi_min {
            return Some(g);
        }
        g *= 0.5;
    }
    None
}

/// Builds and certifies a super-solution dominating `u1` (supported on the
/// domain) and the scaled eigenfunction.
#[allow(clippy::too_many_arguments)]
pub fn glue_supersolution(
    mesh: &Mesh,
    geom: &GeometrySpec,
    ops: &AssembledOperators,
    s: &ScalarField,
    u1: &ScalarField,
    domain: &Domain,
    scaled: &ScaledEigenfunction,
    opts: &GlueOptions,
) -> Result<GlueOutcome> {
    u1.check(mesh)?;
    s.check(mesh)?;
    let p = ops.constants.p;
    let (min_edge, max_edge) = chart_edge_extremes(mesh, geom);
    let width = opts.mollifier_width.unwrap_or(2.0 * min_edge * (1.0 + 1e-9));
    let eps = opts.transition_eps.unwrap_or(max_edge);
    if !(eps > 0.0) || !(width > 0.0) {
        return Err(CywError::invalid(Stage::Supersolution, "mollifier width and transition eps must be positive"));
    }
    let rounds = if opts.max_rounds == 0 { 8 } else { opts.max_rounds };
    let rayleigh = linearized_rayleigh(ops, &s.values, &u1.values);
    let lambda = domain.vertex_set.iter().map(|&v| s.values[v]).fold(f64::NEG_INFINITY, f64::max);
    let sup_r = geom.scalar_curvature.values.iter().fold(0.0f64, |m, x| m.max(x.abs()));

    let mut theta = scaled.theta;
    let mut gamma_factor = 1.0;
    let mut worst: Option<(usize, f64, f64)> = None;
    for round in 0..rounds {
        let phi: Vec<f64> = scaled.base.values.iter().map(|x| theta * x).collect();
        let beta = domain
            .vertex_set
            .iter()
            .map(|&v| scaled.eigenvalue * phi[v] - 2f64.powf(p - 2.0) * s.values[v] * phi[v].powf(p - 1.0))
            .fold(f64::NEG_INFINITY, f64::max);
        let phi_max = domain.vertex_set.iter().map(|&v| phi[v]).fold(0.0f64, f64::max);
        let frontier_min = domain.frontier_set.iter().map(|&v| phi[v]).fold(f64::INFINITY, f64::min);
        let gamma = match opts.gamma {
            Some(g) => g * gamma_factor,
            None => match admissible_gamma(lambda, sup_r, phi_max, beta, frontier_min, p) {
                Some(g) => g * gamma_factor,
                None => {
                    return Err(CywError::failure(
                        Stage::Supersolution,
                        format!("no admissible gamma (beta margin {beta:.3e})"),
                    ))
                }
            },
        };
        let config = GluingConfig {
            gamma,
            theta,
            mollifier_width: width,
            transition_eps: eps,
            beta_margin: beta,
        };

        let dominated = domain.vertex_set.iter().all(|&v| u1.values[v] <= phi[v]);
        let (field, branch, transversality) = if dominated {
            (phi.clone(), GlueBranch::Eigenfunction, f64::INFINITY)
        } else {
            let b = blend(mesh, geom, ops, domain, &u1.values, &phi, gamma, eps, width)?;
            (b.field, GlueBranch::Blended, b.transversality)
        };
        let side = check_side(ops, &s.values, &field, Side::Super);
        let dominance_gap = domain.vertex_set.iter().map(|&v| field[v] - u1.values[v]).fold(f64::INFINITY, f64::min);
        let eigenfunction_gap = field.iter().zip(&phi).map(|(a, b)| a - b).fold(f64::INFINITY, f64::min);
        let ok = side.pass && dominance_gap >= -ORDER_SLACK && eigenfunction_gap >= -ORDER_SLACK && beta > 0.0;
        if ok {
            return Ok(GlueOutcome {
                field: ScalarField {
                    values: field,
                    mesh_id: mesh.id(),
                },
                config,
                branch,
                rounds: round + 1,
                strong_margin: side.strong_extreme,
                dominance_gap,
                eigenfunction_gap,
                transversality,
                linearized_rayleigh: rayleigh,
            });
        }
        if let Some(v) = side.worst_vertex {
            worst = Some((v, side.strong_extreme, side.scale));
        }
        if round % 2 == 0 {
            gamma_factor *= 0.5;
        } else {
            theta *= 0.5;
        }
    }
    let (v, r, scale) = worst.unwrap_or((0, f64::NAN, f64::NAN));
    let mut msg = format!(
        "no super-solution accepted after {rounds} rounds; worst vertex {v} has strong residual {r:.6e} (scale {scale:.3e}); linearized Rayleigh quotient of the local solution {rayleigh:.6e}"
    );
    if rayleigh < 0.0 {
        msg.push_str(", negative, so no super-solution dominating the local solution exists");
    }
    Err(CywError::failure(Stage::Supersolution, msg))
}
