//! Shifted monotone iteration between an ordered sub/super-solution pair.
//!
//! Each step solves `(A + kM) u_{j+1} = M(S u_j^{p−1} + k u_j)` in the
//! defect-correction form `(A + kM) δ = −F(u_j)`, `u_{j+1} = u_j + δ`, with
//! `F(u) = Au − M S |u|^{p−2}u`. `A + kM` is a symmetric M-matrix, so its
//! inverse is nonnegative and the step is order-preserving once the
//! right-hand side is monotone in `u` on the bracket.

use super::inequalities::ORDER_SLACK;
use crate::error::{CywError, Result, Stage};
use crate::geometry::ScalarField;
use crate::local_yamabe::engine::relative_residual;
use crate::operators::solvers::pcg;
use crate::operators::AssembledOperators;

#[derive(Clone, Debug, PartialEq)]
pub struct IterationOptions {
    /// Stop once the max-norm step is at most this.
    pub step_tolerance: f64,
    pub max_steps: usize,
    /// Keep every iterate (otherwise only the first and last).
    pub record_iterates: bool,
    /// Explicit shift instead of [`order_preserving_shift`].
    pub shift: Option<f64>,
}

impl Default for IterationOptions {
    fn default() -> Self {
        IterationOptions {
            step_tolerance: 1e-10,
            max_steps: 20_000,
            record_iterates: false,
            shift: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct IterationState {
    pub shift_k: f64,
    /// `u₀ = u₋, …` (first and last only unless recorded).
    pub iterates: Vec<ScalarField>,
    /// Relative residual of each iterate.
    pub residuals: Vec<f64>,
    pub min_u: Vec<f64>,
    pub max_u: Vec<f64>,
    pub bracket_violations: usize,
    /// Largest downward move `max(u_j − u_{j+1})` over all steps.
    pub worst_decrease: f64,
    pub steps: usize,
    pub converged: bool,
    /// Shift doublings after a bracket violation.
    pub restarts: usize,
}

impl IterationState {
    pub fn solution(&self) -> &ScalarField {
        self.iterates.last().expect("iteration state holds at least one iterate")
    }

    pub fn final_residual(&self) -> f64 {
        self.residuals.last().copied().unwrap_or(f64::INFINITY)
    }

    /// `iteration,residual,min_u,max_u` rows.
    pub fn trace_csv(&self) -> String {
        let mut s = String::from("iteration,residual,min_u,max_u\n");
        for j in 0..self.residuals.len() {
            s.push_str(&format!("{j},{:.6e},{:.17e},{:.17e}\n", self.residuals[j], self.min_u[j], self.max_u[j]));
        }
        s
    }
}

/// `max(0, max_v((p−1)S_v u₊^{p−2} − R_v), max_v((p−1)(−S_v)⁺ u₊^{p−2}))`.
pub fn order_preserving_shift(ops: &AssembledOperators, s: &[f64], u_plus: &[f64]) -> f64 {
    let p = ops.constants.p;
    let mut k = 0.0f64;
    for &v in &ops.free {
        let up = u_plus[v].max(0.0).powf(p - 2.0);
        let r = ops.lumped_curvature[v] / ops.lumped_mass[v];
        k = k.max((p - 1.0) * s[v] * up - r);
        k = k.max((p - 1.0) * (-s[v]).max(0.0) * up);
    }
    k
}

fn defect(ops: &AssembledOperators, a: &crate::operators::CsrMatrix, s: &[f64], u: &[f64]) -> Vec<f64> {
    let p = ops.constants.p;
    let au = a.mul(u);
    (0..u.len())
        .map(|i| {
            let v = ops.free[i];
            au[i] - ops.lumped_mass[v] * s[v] * u[i].abs().powf(p - 2.0) * u[i]
        })
        .collect()
}

enum Attempt {
    Done(IterationState),
    Violation(IterationState),
}

fn run(
    ops: &AssembledOperators,
    s: &[f64],
    u_minus: &[f64],
    u_plus: &[f64],
    k: f64,
    opts: &IterationOptions,
) -> Result<Attempt> {
    let a = ops.restrict(&ops.lumped_conformal_matrix());
    let mass = ops.gather(&ops.lumped_mass);
    let sr = ops.gather(s);
    let weights: Vec<f64> = mass.iter().zip(&sr).map(|(m, x)| m * x).collect();
    let lo = ops.gather(u_minus);
    let hi = ops.gather(u_plus);
    let shift: Vec<f64> = mass.iter().map(|m| k * m).collect();
    let system = a.add_diagonal(&shift);
    let p = ops.constants.p;

    let field = |u: &[f64]| ScalarField {
        values: ops.scatter(u),
        mesh_id: ops.mesh_id,
    };
    let mut state = IterationState {
        shift_k: k,
        iterates: vec![field(&lo)],
        residuals: vec![relative_residual(&a, &weights, &mass, p, &lo)],
        min_u: vec![lo.iter().copied().fold(f64::INFINITY, f64::min)],
        max_u: vec![lo.iter().copied().fold(f64::NEG_INFINITY, f64::max)],
        bracket_violations: 0,
        worst_decrease: 0.0,
        steps: 0,
        converged: false,
        restarts: 0,
    };
    let mut u = lo.clone();
    let mut delta = vec![0.0; u.len()];
    for _ in 0..opts.max_steps {
        let rhs: Vec<f64> = defect(ops, &a, s, &u).iter().map(|x| -x).collect();
        delta.iter_mut().for_each(|x| *x = 0.0);
        let st = pcg(&system, &rhs, &mut delta, 1e-14, 20 * u.len() + 2000).map_err(|e| e.at(Stage::Iteration))?;
        if !st.converged && st.relative_residual > 1e-10 {
            return Err(CywError::NonConvergence {
                stage: Stage::Iteration,
                iterations: st.iterations,
                achieved: st.relative_residual,
            });
        }
        let next: Vec<f64> = u.iter().zip(&delta).map(|(x, d)| x + d).collect();
        let mut violations = 0;
        for i in 0..u.len() {
            if next[i] < u[i] - ORDER_SLACK || next[i] > hi[i] + ORDER_SLACK || next[i] < lo[i] - ORDER_SLACK {
                violations += 1;
            }
            state.worst_decrease = state.worst_decrease.max(u[i] - next[i]);
        }
        let step = delta.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        u = next;
        state.steps += 1;
        state.residuals.push(relative_residual(&a, &weights, &mass, p, &u));
        state.min_u.push(u.iter().copied().fold(f64::INFINITY, f64::min));
        state.max_u.push(u.iter().copied().fold(f64::NEG_INFINITY, f64::max));
        if opts.record_iterates {
            state.iterates.push(field(&u));
        }
        if violations > 0 {
            state.bracket_violations += violations;
            if !opts.record_iterates {
                state.iterates.push(field(&u));
            }
            return Ok(Attempt::Violation(state));
        }
        if !u.iter().all(|x| x.is_finite()) {
            return Err(CywError::failure(Stage::Iteration, "iterate is not finite"));
        }
        if step <= opts.step_tolerance {
            state.converged = true;
            break;
        }
    }
    if !opts.record_iterates {
        state.iterates.push(field(&u));
    }
    Ok(Attempt::Done(state))
}

/// Iterates from `u₋` inside the bracket `[u₋, u₊]`. A bracket or
/// monotonicity violation doubles the shift once and restarts.
pub fn monotone_iterate(
    ops: &AssembledOperators,
    s: &ScalarField,
    u_minus: &ScalarField,
    u_plus: &ScalarField,
    opts: &IterationOptions,
) -> Result<IterationState> {
    let n = ops.vertex_count();
    if s.len() != n || u_minus.len() != n || u_plus.len() != n {
        return Err(CywError::invalid(Stage::Iteration, "fields do not match the operators"));
    }
    if let Some(v) = (0..n).find(|&v| u_minus.values[v] > u_plus.values[v] + ORDER_SLACK) {
        return Err(CywError::precondition(Stage::Iteration, format!("bracket is not ordered at vertex {v}")));
    }
    let mut k = opts.shift.unwrap_or_else(|| order_preserving_shift(ops, &s.values, &u_plus.values));
    if !(k >= 0.0) {
        return Err(CywError::invalid(Stage::Iteration, "shift must be nonnegative"));
    }
    let mut total_violations = 0;
    for restart in 0..2 {
        match run(ops, &s.values, &u_minus.values, &u_plus.values, k, opts)? {
            Attempt::Done(mut state) => {
                state.bracket_violations += total_violations;
                state.restarts = restart;
                if !state.converged {
                    return Err(CywError::NonConvergence {
                        stage: Stage::Iteration,
                        iterations: state.steps,
                        achieved: state.final_residual(),
                    });
                }
                let min_free = ops.free.iter().map(|&v| state.solution().values[v]).fold(f64::INFINITY, f64::min);
                if !(min_free > 0.0) {
                    return Err(CywError::failure(
                        Stage::Iteration,
                        format!("limit is not positive (min {min_free:.3e})"),
                    ));
                }
                return Ok(state);
            }
            Attempt::Violation(state) => {
                total_violations += state.bracket_violations;
                if restart == 0 {
                    k = if k > 0.0 { 2.0 * k } else { 1.0 };
                }
            }
        }
    }
    Err(CywError::failure(
        Stage::Iteration,
        format!("bracket violated at {total_violations} vertices even after doubling the shift to {k:.6e}"),
    ))
}
