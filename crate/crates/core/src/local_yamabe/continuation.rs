//! Warm-started continuation `β_k = β₀·ratio^k → 0⁻` of the perturbed local
//! solutions, with the uniform `L^p` monitor.

use super::{solve_perturbed, test_function, EnergyThresholds, GateCheck, LocalProblem, LocalSolution, TestFunctionParams};
use crate::error::{CywError, Result, Stage};
use crate::geometry::ScalarField;
use crate::operators::solvers::pcg;
use std::fmt::Write as _;

#[derive(Clone, Debug, PartialEq)]
pub struct ContinuationOptions {
    pub lambda: f64,
    pub beta0: f64,
    /// Geometric ratio in `(0, 1)`.
    pub ratio: f64,
    /// Stop once `|β| <` this and the step tolerance is met.
    pub beta_floor: f64,
    /// Max-norm difference of successive solutions at termination.
    pub step_tolerance: f64,
    pub max_steps: usize,
    /// Continue when the gate at `β₀` failed.
    pub override_gate: bool,
}

impl ContinuationOptions {
    pub fn new(lambda: f64, beta0: f64, ratio: f64) -> Self {
        ContinuationOptions {
            lambda,
            beta0,
            ratio,
            beta_floor: 1e-6,
            step_tolerance: 1e-8,
            max_steps: 60,
            override_gate: false,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ContinuationTrace {
    pub lambda: f64,
    pub ratio: f64,
    pub betas: Vec<f64>,
    pub solutions: Vec<ScalarField>,
    pub residuals: Vec<f64>,
    /// `Σ m_v u_v^p` per step.
    pub lp_norms: Vec<f64>,
    /// `max|u| + (uᵀKu)^{1/2}` per step.
    pub c2a_proxy: Vec<f64>,
    /// Max-norm change from the previous step (`∞` for the first).
    pub steps: Vec<f64>,
    pub clamp_events: usize,
    /// Monitor bound on `lp_norms` derived from the gate.
    pub lp_bound: f64,
    pub converged: bool,
}

impl ContinuationTrace {
    /// Max-norm difference of the last two solutions.
    pub fn cauchy_tail(&self) -> f64 {
        self.steps.last().copied().unwrap_or(f64::INFINITY)
    }

    /// The β → 0⁻ limit candidate.
    pub fn final_solution(&self) -> Option<&ScalarField> {
        self.solutions.last()
    }

    /// Versioned text report, one row per step.
    pub fn to_report(&self) -> String {
        let mut s = String::from("CYWTRACE 1\n");
        let _ = writeln!(s, "lambda {:.17e}", self.lambda);
        let _ = writeln!(s, "ratio {:.17e}", self.ratio);
        let _ = writeln!(s, "lp_bound {:.17e}", self.lp_bound);
        let _ = writeln!(s, "converged {}", self.converged);
        let _ = writeln!(s, "clamp_events {}", self.clamp_events);
        let _ = writeln!(s, "steps {}", self.betas.len());
        s.push_str("step,beta,residual,lp_norm,c2a_proxy,change\n");
        for k in 0..self.betas.len() {
            let _ = writeln!(
                s,
                "{k},{:.17e},{:.6e},{:.17e},{:.17e},{:.6e}",
                self.betas[k], self.residuals[k], self.lp_norms[k], self.c2a_proxy[k], self.steps[k]
            );
        }
        s
    }
}

fn lp_sum(problem: &LocalProblem, u: &ScalarField) -> f64 {
    let p = problem.constants.p;
    problem.ops.free.iter().zip(problem.lumped_mass()).map(|(&v, m)| m * u.values[v].abs().powf(p)).sum()
}

/// Runs the continuation from the test function at the gate's best `ε`.
pub fn beta_continuation(problem: &LocalProblem, opts: &ContinuationOptions, gate: &EnergyThresholds) -> Result<ContinuationTrace> {
    if !(opts.beta0 < 0.0) {
        return Err(CywError::invalid(Stage::Continuation, "beta0 must be negative"));
    }
    if !(opts.ratio > 0.0 && opts.ratio < 1.0) {
        return Err(CywError::invalid(Stage::Continuation, "ratio must lie in (0, 1)"));
    }
    if opts.max_steps == 0 {
        return Err(CywError::invalid(Stage::Continuation, "max_steps must be positive"));
    }
    let check = if opts.override_gate {
        GateCheck::Override
    } else {
        GateCheck::Require(gate)
    };
    let c = problem.constants;
    let lp_bound = gate.lp_bound(c.n, c.a);
    let params = TestFunctionParams::new(gate.best_epsilon, opts.beta0, gate.center, gate.radius, c.n)?;
    let mut seed = test_function(problem.mesh, &problem.domain, problem.geom, c, &params)?;

    let mut trace = ContinuationTrace {
        lambda: opts.lambda,
        ratio: opts.ratio,
        betas: Vec::new(),
        solutions: Vec::new(),
        residuals: Vec::new(),
        lp_norms: Vec::new(),
        c2a_proxy: Vec::new(),
        steps: Vec::new(),
        clamp_events: 0,
        lp_bound,
        converged: false,
    };
    let mut beta = opts.beta0;
    for _ in 0..opts.max_steps {
        let sol: LocalSolution = solve_perturbed(problem, opts.lambda, beta, &seed, check).map_err(|e| e.at(Stage::Continuation))?;
        let u = sol.field;
        let lp = lp_sum(problem, &u);
        if lp > 10.0 * lp_bound {
            return Err(CywError::failure(
                Stage::Continuation,
                format!("concentration: sum m u^p = {lp:.6e} exceeds ten times the monitor bound {lp_bound:.6e} at beta = {beta:.3e}"),
            ));
        }
        let sup = u.values.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let grad = problem.ops.stiffness.quadratic_form(&u.values).max(0.0).sqrt();
        let change = match trace.solutions.last() {
            Some(prev) => prev.values.iter().zip(&u.values).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())),
            None => f64::INFINITY,
        };
        trace.betas.push(beta);
        trace.residuals.push(sol.residual);
        trace.lp_norms.push(lp);
        trace.c2a_proxy.push(sup + grad);
        trace.steps.push(change);
        trace.clamp_events += sol.clamp_events;
        trace.solutions.push(u.clone());
        if beta.abs() < opts.beta_floor && change <= opts.step_tolerance {
            trace.converged = true;
            break;
        }
        seed = u;
        beta *= opts.ratio;
    }
    Ok(trace)
}

/// Auxiliary potential `v` with `−aΔv = −2R_g u` on the domain and the
/// ratios `Γ₁ = Σm(u+v)^p / Σm u^p`,
/// `Γ₂ = E_β(u + v) / E_{β₀}(u)` with `E_β(w) = wᵀ(aK + M_{R+β})w`.
#[derive(Clone, Debug)]
pub struct AuxiliaryDiagnostics {
    pub potential: ScalarField,
    pub gamma1: f64,
    pub gamma2: f64,
}

pub fn auxiliary_diagnostics(problem: &LocalProblem, solution: &LocalSolution, beta0: f64) -> Result<AuxiliaryDiagnostics> {
    let ops = &problem.ops;
    let a = ops.restrict(&ops.stiffness).scaled(problem.constants.a);
    let u = ops.gather(&solution.field.values);
    let r = ops.gather(&ops.lumped_curvature);
    let rhs: Vec<f64> = u.iter().zip(&r).map(|(ui, ri)| -2.0 * ri * ui).collect();
    let mut v = vec![0.0; u.len()];
    let st = pcg(&a, &rhs, &mut v, 1e-12, 20 * u.len() + 1000).map_err(|e| e.at(Stage::Continuation))?;
    if !st.converged {
        return Err(CywError::NonConvergence {
            stage: Stage::Continuation,
            iterations: st.iterations,
            achieved: st.relative_residual,
        });
    }
    let p = problem.constants.p;
    let m = problem.lumped_mass();
    let sum: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a + b).collect();
    let lp = |w: &[f64]| -> f64 { w.iter().zip(m).map(|(x, mi)| mi * x.abs().powf(p)).sum() };
    let gamma1 = lp(&sum) / lp(&u);
    let gamma2 = problem.operator(solution.beta).quadratic_form(&sum) / problem.operator(beta0).quadratic_form(&u);
    Ok(AuxiliaryDiagnostics {
        potential: ScalarField {
            values: ops.scatter(&v),
            mesh_id: solution.field.mesh_id,
        },
        gamma1,
        gamma2,
    })
}
