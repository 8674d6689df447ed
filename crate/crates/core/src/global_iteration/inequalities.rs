//! Discrete sub/super-solution certificates.
//!
//! The residual row of `u` at vertex `v` is
//! `r_v = (A u)_v − m_v S_v |u_v|^{p−2} u_v` with `A` the lumped conformal
//! matrix. Nonnegative combinations of hat functions span the test cone, so
//! the weak inequality `□u ≤ S u^{p−1}` holds iff every row is `≤ 0`.

use crate::geometry::ScalarField;
use crate::operators::AssembledOperators;

/// Pass tolerance on the strong residual, relative to [`SideReport::scale`].
pub const INEQUALITY_TOLERANCE: f64 = 1e-10;
/// Absolute slack of ordering checks.
pub const ORDER_SLACK: f64 = 1e-12;

/// Weak rows `(A u)_v − m_v S_v |u_v|^{p−2}u_v` on every vertex (zero on
/// non-free vertices).
pub fn residual_rows(ops: &AssembledOperators, s: &[f64], u: &[f64]) -> Vec<f64> {
    let p = ops.constants.p;
    let au = ops.lumped_conformal_matrix().mul(u);
    let mut rows = vec![0.0; u.len()];
    for &v in &ops.free {
        rows[v] = au[v] - ops.lumped_mass[v] * s[v] * u[v].abs().powf(p - 2.0) * u[v];
    }
    rows
}

/// `max(1, max|□u|, max|S u^{p−1}|)` over the free vertices.
pub fn residual_scale(ops: &AssembledOperators, s: &[f64], u: &[f64]) -> f64 {
    let p = ops.constants.p;
    let au = ops.lumped_conformal_matrix().mul(u);
    ops.free.iter().fold(1.0f64, |acc, &v| {
        let lap = (au[v] / ops.lumped_mass[v]).abs();
        let nl = (s[v] * u[v].abs().powf(p - 1.0)).abs();
        acc.max(lap).max(nl)
    })
}

/// Certificate of one side of the bracket.
#[derive(Clone, Debug, PartialEq)]
pub struct SideReport {
    /// Worst weak row: the max for a sub-solution, the min for a
    /// super-solution.
    pub weak_extreme: f64,
    /// Worst row divided by its lumped mass.
    pub strong_extreme: f64,
    pub worst_vertex: Option<usize>,
    pub scale: f64,
    /// Worst row over boundary vertices divided by `a·∫_∂λ_v`, under Robin.
    pub robin_extreme: Option<f64>,
    pub pass: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Sub,
    Super,
}

pub fn check_side(ops: &AssembledOperators, s: &[f64], u: &[f64], side: Side) -> SideReport {
    let rows = residual_rows(ops, s, u);
    let scale = residual_scale(ops, s, u);
    // Orient so that a violation is positive.
    let sign = match side {
        Side::Sub => 1.0,
        Side::Super => -1.0,
    };
    let mut weak = f64::NEG_INFINITY;
    let mut strong = f64::NEG_INFINITY;
    let mut worst = None;
    for &v in &ops.free {
        let r = sign * rows[v];
        weak = weak.max(r);
        let q = r / ops.lumped_mass[v];
        if q > strong {
            strong = q;
            worst = Some(v);
        }
    }
    let robin_extreme = if ops.is_robin() {
        let a = ops.constants.a;
        let mut e = f64::NEG_INFINITY;
        for &v in &ops.free {
            let bw = ops.boundary_weights[v];
            if bw > 0.0 {
                e = e.max(sign * rows[v] / (a * bw));
            }
        }
        Some(sign * e)
    } else {
        None
    };
    if worst.is_none() {
        weak = 0.0;
        strong = 0.0;
    }
    SideReport {
        weak_extreme: sign * weak,
        strong_extreme: sign * strong,
        worst_vertex: worst,
        scale,
        robin_extreme,
        pass: strong <= INEQUALITY_TOLERANCE * scale,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct InequalityReport {
    pub sub: SideReport,
    pub sup: SideReport,
    /// `0 ≤ u₋ ≤ u₊` within [`ORDER_SLACK`].
    pub ordered: bool,
    /// `min(u₊ − u₋)`.
    pub ordering_gap: f64,
    pub sub_nonzero: bool,
    pub sub_nonnegative: bool,
}

impl InequalityReport {
    pub fn pass(&self) -> bool {
        self.sub.pass && self.sup.pass && self.ordered && self.sub_nonnegative
    }
}

/// Pure report on the bracket hypotheses of the monotone iteration.
pub fn verify_inequalities(
    ops: &AssembledOperators,
    s: &ScalarField,
    u_minus: &ScalarField,
    u_plus: &ScalarField,
) -> InequalityReport {
    let sub = check_side(ops, &s.values, &u_minus.values, Side::Sub);
    let sup = check_side(ops, &s.values, &u_plus.values, Side::Super);
    let ordering_gap = u_minus
        .values
        .iter()
        .zip(&u_plus.values)
        .map(|(a, b)| b - a)
        .fold(f64::INFINITY, f64::min);
    let sub_nonnegative = u_minus.values.iter().all(|&x| x >= -ORDER_SLACK);
    InequalityReport {
        sub,
        sup,
        ordered: ordering_gap >= -ORDER_SLACK && sub_nonnegative,
        ordering_gap,
        sub_nonzero: u_minus.values.iter().any(|&x| x > 0.0),
        sub_nonnegative,
    }
}
