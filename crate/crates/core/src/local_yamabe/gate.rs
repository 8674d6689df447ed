//! Energy thresholds and the test-function sweep deciding local solvability.

use super::engine::{minimize_quotient, PNorm};
use super::{deepest_vertex, test_function, LocalProblem, TestFunctionParams};
use crate::error::{CywError, Result, Stage};
use std::f64::consts::PI;
use std::fmt::Write as _;

/// `Γ(k/2)` for a positive integer `k`.
fn gamma_half(k: u32) -> f64 {
    let mut g = if k % 2 == 0 { 1.0 } else { PI.sqrt() };
    let mut m = if k % 2 == 0 { 2 } else { 1 };
    while m < k {
        g *= f64::from(m) / 2.0;
        m += 2;
    }
    g
}

/// Best constant of `‖∇u‖₂² ≥ T‖u‖_p²` on `Rⁿ`:
/// `πn(n−2)(Γ(n/2)/Γ(n))^{2/n}`.
pub fn t_sharp(n: u32) -> f64 {
    let nf = f64::from(n);
    PI * nf * (nf - 2.0) * (gamma_half(n) / gamma_half(2 * n)).powf(2.0 / nf)
}

/// `λ^{2−n} aⁿ`.
pub fn a_omega(n: u32, a: f64, lambda: f64) -> f64 {
    let nf = f64::from(n);
    lambda.powf(2.0 - nf) * a.powf(nf)
}

/// `(1/n) λ^{(2−n)/2} a^{n/2} T^{n/2}`.
pub fn k0(n: u32, a: f64, lambda: f64, t: f64) -> f64 {
    let nf = f64::from(n);
    lambda.powf((2.0 - nf) / 2.0) * a.powf(nf / 2.0) * t.powf(nf / 2.0) / nf
}

/// `sup_t J*(t·u)` for a test function of quotient `q`:
/// `(1/n) λ^{(2−n)/2} (a q)^{n/2}`, zero when `q ≤ 0`.
pub(crate) fn mountain_level(n: u32, a: f64, lambda: f64, q: f64) -> f64 {
    if q <= 0.0 {
        0.0
    } else {
        let nf = f64::from(n);
        lambda.powf((2.0 - nf) / 2.0) * (a * q).powf(nf / 2.0) / nf
    }
}

/// The `ε` values at which test-function quotients are evaluated.
#[derive(Clone, Debug, PartialEq)]
pub enum EpsSweep {
    List(Vec<f64>),
    /// `ε_k = start·ratio^k`, refined while the quotient keeps decreasing.
    /// The first point that fails to decrease marks the mesh resolution
    /// limit; it is kept and ends the sweep.
    Adaptive { start: f64, ratio: f64, floor: f64 },
}

impl EpsSweep {
    pub fn adaptive() -> Self {
        EpsSweep::Adaptive {
            start: 1.0,
            ratio: 0.75,
            floor: 1e-8,
        }
    }

    fn check(&self) -> Result<()> {
        match self {
            EpsSweep::List(v) if v.is_empty() || v.iter().any(|&e| !(e > 0.0)) => {
                Err(CywError::invalid(Stage::Gate, "epsilon sweep must be a nonempty list of positive values"))
            }
            EpsSweep::Adaptive { start, ratio, floor } if !(*start > 0.0 && *ratio > 0.0 && *ratio < 1.0 && *floor > 0.0 && floor < start) => {
                Err(CywError::invalid(Stage::Gate, "adaptive sweep needs start > floor > 0 and ratio in (0, 1)"))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GateOptions {
    pub lambda: f64,
    pub beta: f64,
    pub eps_sweep: EpsSweep,
    /// Test-function center; the deepest interior vertex when absent.
    pub center: Option<usize>,
    /// Cutoff radius; the center's distance to the frontier when absent.
    pub radius: Option<f64>,
    /// `T_used = safety_factor · T_est`.
    pub safety_factor: f64,
}

impl GateOptions {
    pub fn new(lambda: f64, beta: f64, eps_sweep: EpsSweep) -> Self {
        GateOptions {
            lambda,
            beta,
            eps_sweep,
            center: None,
            radius: None,
            safety_factor: 0.99,
        }
    }
}

/// One sweep entry: `quotient = gradient_part + β·mass_part`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepPoint {
    pub epsilon: f64,
    pub quotient: f64,
    /// `(uᵀKu + a⁻¹uᵀM_R u) / ‖u‖_p²`.
    pub gradient_part: f64,
    /// `a⁻¹uᵀMu / ‖u‖_p²`.
    pub mass_part: f64,
}

#[derive(Clone, Debug)]
pub struct EnergyThresholds {
    /// Discrete Sobolev quotient minimum on the domain.
    pub t_est: f64,
    pub t_sharp: f64,
    pub t_used: f64,
    pub a_omega: f64,
    pub k0: f64,
    /// Minimum of the sweep.
    pub q_eps: f64,
    /// Smallest swept `ε`.
    pub smallest_eps: f64,
    /// Quotient at the smallest swept `ε`.
    pub q_smallest_eps: f64,
    /// `sup_t J*_β(t·u_ε)` at the minimizing `ε`.
    pub t1: f64,
    pub gate_pass: bool,
    /// Set when the sign hypothesis on `R_g` fails; the verdict is then
    /// informational.
    pub advisory_only: bool,
    pub lambda: f64,
    pub beta: f64,
    pub center: usize,
    pub radius: f64,
    /// `ε` of the sweep minimum.
    pub best_epsilon: f64,
    /// In decreasing `ε`.
    pub sweep: Vec<SweepPoint>,
    pub warnings: Vec<String>,
}

impl EnergyThresholds {
    /// Plot data of the sweep.
    pub fn sweep_csv(&self) -> String {
        let mut s = String::from("epsilon,quotient,gradient_part,mass_part,t_used\n");
        for pt in &self.sweep {
            let _ = writeln!(
                s,
                "{:.10e},{:.12e},{:.12e},{:.12e},{:.12e}",
                pt.epsilon, pt.quotient, pt.gradient_part, pt.mass_part, self.t_used
            );
        }
        s
    }

    /// `(T₁/K₀) λ^{−n/2} a^{n/2} T^{n/2}`, the bound on `Σ m u^p` along
    /// the continuation.
    pub fn lp_bound(&self, n: u32, a: f64) -> f64 {
        let nf = f64::from(n);
        (self.t1 / self.k0) * self.lambda.powf(-nf / 2.0) * a.powf(nf / 2.0) * self.t_used.powf(nf / 2.0)
    }
}

/// Discrete minimum of `uᵀKu / ‖u‖_p²` over fields vanishing on the
/// frontier, with `K` the stiffness of the domain metric and the `L^p` norm
/// by quadrature. The smallest value reached from the given seeds.
pub fn sobolev_estimate(problem: &LocalProblem, seeds: &[Vec<f64>]) -> Result<f64> {
    let k = problem.ops.restrict(&problem.ops.stiffness);
    let norm = PNorm::Quadrature(&problem.ops);
    let mut best = f64::INFINITY;
    for seed in seeds {
        let x = problem.ops.gather(seed);
        let m = minimize_quotient(&k, &norm, problem.constants.p, &x, 1e-7, 4000, Stage::Gate)?;
        best = best.min(m.quotient);
    }
    if !best.is_finite() {
        return Err(CywError::invalid(Stage::Gate, "no seeds for the Sobolev estimate"));
    }
    Ok(best)
}

/// Test-function quotients with the `(R_g + β)` weight over the sweep,
/// compared against the discrete Sobolev threshold.
pub fn energy_gate(problem: &LocalProblem, opts: &GateOptions) -> Result<EnergyThresholds> {
    if !(opts.lambda > 0.0) {
        return Err(CywError::invalid(Stage::Gate, "lambda must be positive"));
    }
    if !(opts.beta <= 0.0) {
        return Err(CywError::invalid(Stage::Gate, "beta must be nonpositive"));
    }
    opts.eps_sweep.check()?;
    if !(opts.safety_factor > 0.0 && opts.safety_factor <= 1.0) {
        return Err(CywError::invalid(Stage::Gate, "safety factor must lie in (0, 1]"));
    }
    let (mesh, geom, c) = (problem.mesh, problem.geom, problem.constants);
    let (center, radius) = match (opts.center, opts.radius) {
        (Some(v), Some(r)) => (v, r),
        (center, radius) => {
            let (v, r) = deepest_vertex(mesh, geom, &problem.domain);
            (center.unwrap_or(v), radius.unwrap_or(r))
        }
    };

    let mut warnings = Vec::new();
    let mut advisory_only = false;
    if opts.beta == 0.0 {
        let nonneg = problem
            .domain
            .vertex_set
            .iter()
            .filter(|&&v| geom.scalar_curvature.values[v] >= 0.0)
            .count();
        if nonneg > 0 {
            warnings.push(format!(
                "sign hypothesis violated: R_g >= 0 at {nonneg} domain vertices with beta = 0; gate is advisory only"
            ));
            advisory_only = true;
        }
    }

    let ops = &problem.ops;
    let p = c.p;
    let evaluate = |e: f64| -> Result<(SweepPoint, Vec<f64>)> {
        let params = TestFunctionParams::new(e, opts.beta, center, radius, c.n)?;
        let u = test_function(mesh, &problem.domain, geom, c, &params)?;
        let norm2 = ops.lp_integral(&u.values, p).powf(2.0 / p);
        let gradient_part = (ops.stiffness.quadratic_form(&u.values) + ops.curvature_mass.quadratic_form(&u.values) / c.a) / norm2;
        let mass_part = ops.mass.quadratic_form(&u.values) / c.a / norm2;
        let point = SweepPoint {
            epsilon: e,
            quotient: gradient_part + opts.beta * mass_part,
            gradient_part,
            mass_part,
        };
        Ok((point, u.values))
    };
    // Points in decreasing ε.
    let mut sweep: Vec<SweepPoint> = Vec::new();
    let mut fields: Vec<Vec<f64>> = Vec::new();
    match &opts.eps_sweep {
        EpsSweep::List(list) => {
            let mut eps = list.clone();
            eps.sort_by(|a, b| b.total_cmp(a));
            eps.dedup();
            for e in eps {
                let (pt, u) = evaluate(e)?;
                sweep.push(pt);
                fields.push(u);
            }
        }
        EpsSweep::Adaptive { start, ratio, floor } => {
            let mut e = *start;
            while e >= *floor {
                let (pt, u) = evaluate(e)?;
                let stop = sweep.last().is_some_and(|prev| pt.quotient >= prev.quotient);
                sweep.push(pt);
                fields.push(u);
                if stop {
                    break;
                }
                e *= ratio;
            }
        }
    }
    let best = sweep
        .iter()
        .min_by(|a, b| a.quotient.total_cmp(&b.quotient))
        .copied()
        .expect("sweep is nonempty");

    let seeds = vec![fields[fields.len() - 1].clone(), fields[0].clone()];
    let t_est = sobolev_estimate(problem, &seeds)?;
    let t_used = opts.safety_factor * t_est;
    Ok(EnergyThresholds {
        t_est,
        t_sharp: t_sharp(c.n),
        t_used,
        a_omega: a_omega(c.n, c.a, opts.lambda),
        k0: k0(c.n, c.a, opts.lambda, t_used),
        q_eps: best.quotient,
        smallest_eps: sweep[sweep.len() - 1].epsilon,
        q_smallest_eps: sweep[sweep.len() - 1].quotient,
        t1: mountain_level(c.n, c.a, opts.lambda, best.quotient),
        gate_pass: best.quotient < t_used,
        advisory_only,
        lambda: opts.lambda,
        beta: opts.beta,
        center,
        radius,
        best_epsilon: best.epsilon,
        sweep,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_thresholds() {
        assert_eq!(a_omega(3, 8.0, 1.0), 512.0);
        assert!((k0(3, 1.0, 1.0, 1.0) - 1.0 / 3.0).abs() < 1e-15);
        let ts = 3.0 * (PI / 2.0).powf(4.0 / 3.0);
        assert!((t_sharp(3) - ts).abs() < 1e-12, "{} {}", t_sharp(3), ts);
        assert!((t_sharp(4) - 8.0 * PI / 6.0f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn mountain_level_matches_k0_at_threshold() {
        let (n, a, l, t) = (3, 8.0, 1.7, 5.2);
        assert!((mountain_level(n, a, l, t) - k0(n, a, l, t)).abs() < 1e-12);
    }
}
