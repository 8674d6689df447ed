//! Discrete critical-exponent solver shared by the local problems.
//!
//! Minimizes `uᵀAu / N(u)^{2/p}` by nonlinear inverse iteration, where `N`
//! is a discrete `∫|u|^p`, then polishes `Au = W|u|^{p−2}u` with Newton
//! steps solved by MINRES.

use crate::error::{CywError, Result, Stage};
use crate::geometry::quadrature::TET_POINTS;
use crate::operators::solvers::{minres, pcg};
use crate::operators::sparse::CsrMatrix;
use crate::operators::AssembledOperators;

/// Discrete `∫|u|^p` on free-vertex vectors.
pub(crate) enum PNorm<'a> {
    /// `Σ w_v |u_v|^p`.
    Lumped(&'a [f64]),
    /// Tetrahedron-rule quadrature of the P1 interpolant.
    Quadrature(&'a AssembledOperators),
}

impl PNorm<'_> {
    pub(crate) fn value(&self, u: &[f64], p: f64) -> f64 {
        match self {
            PNorm::Lumped(w) => w.iter().zip(u).map(|(w, x)| w * x.abs().powf(p)).sum(),
            PNorm::Quadrature(ops) => ops.lp_integral(&ops.scatter(u), p),
        }
    }

    /// `∇N / p`, so that `⟨∇N/p, u⟩ = N(u)`.
    pub(crate) fn half_gradient(&self, u: &[f64], p: f64) -> Vec<f64> {
        match self {
            PNorm::Lumped(w) => w.iter().zip(u).map(|(w, x)| w * x.abs().powf(p - 2.0) * x).collect(),
            PNorm::Quadrature(ops) => {
                let full = ops.scatter(u);
                let mut g = vec![0.0; full.len()];
                for (tet, wq) in ops.qp_pairs() {
                    for (q, b) in TET_POINTS.iter().enumerate() {
                        let val: f64 = (0..4).map(|i| b[i] * full[tet[i]]).sum();
                        let s = wq[q] * val.abs().powf(p - 2.0) * val;
                        for i in 0..4 {
                            g[tet[i]] += s * b[i];
                        }
                    }
                }
                ops.gather(&g)
            }
        }
    }
}

#[derive(Clone, Debug)]
pub(crate) struct Minimum {
    /// Normalized to `N(u) = 1`.
    pub u: Vec<f64>,
    pub quotient: f64,
    pub iterations: usize,
    /// `‖u − Q·A⁻¹∇N/p‖_A / ‖u‖_A`.
    pub stationarity: f64,
}

fn solve_spd(a: &CsrMatrix, b: &[f64], x: &mut [f64], stage: Stage) -> Result<()> {
    let st = pcg(a, b, x, 1e-12, 20 * a.dim() + 1000).map_err(|_| {
        CywError::precondition(stage, "operator is not positive definite on the domain")
    })?;
    if !st.converged {
        return Err(CywError::NonConvergence {
            stage,
            iterations: st.iterations,
            achieved: st.relative_residual,
        });
    }
    Ok(())
}

fn normalize(u: &mut [f64], norm: &PNorm, p: f64) -> Result<()> {
    let n = norm.value(u, p);
    if !(n > 0.0) || !n.is_finite() {
        return Err(CywError::invalid(Stage::LocalSolve, "iterate has zero p-norm"));
    }
    let s = n.powf(-1.0 / p);
    u.iter_mut().for_each(|x| *x *= s);
    Ok(())
}

/// Nonlinear inverse iteration `u ← A⁻¹∇N(u)/p`, renormalized, with step
/// halving along `u + τ(Q·A⁻¹∇N/p − u)` whenever the full step fails to
/// lower the quotient.
pub(crate) fn minimize_quotient(
    a: &CsrMatrix,
    norm: &PNorm,
    p: f64,
    init: &[f64],
    tol: f64,
    max_iter: usize,
    stage: Stage,
) -> Result<Minimum> {
    let mut u = init.to_vec();
    normalize(&mut u, norm, p)?;
    let mut q = a.quadratic_form(&u);
    let mut w = vec![0.0; u.len()];
    let mut stationarity = f64::INFINITY;
    let mut iterations = 0;
    while iterations < max_iter {
        let g = norm.half_gradient(&u, p);
        solve_spd(a, &g, &mut w, stage)?;
        let step: Vec<f64> = w.iter().zip(&u).map(|(wi, ui)| q * wi - ui).collect();
        stationarity = (a.quadratic_form(&step) / q.abs().max(f64::MIN_POSITIVE)).abs().sqrt();
        if stationarity <= tol {
            break;
        }
        iterations += 1;
        let mut tau = 1.0;
        let mut decreased = false;
        for _ in 0..30 {
            let mut v: Vec<f64> = u.iter().zip(&step).map(|(ui, si)| ui + tau * si).collect();
            if normalize(&mut v, norm, p).is_ok() {
                let qv = a.quadratic_form(&v);
                if qv < q {
                    u = v;
                    q = qv;
                    decreased = true;
                    break;
                }
            }
            tau *= 0.5;
        }
        if !decreased {
            break;
        }
    }
    Ok(Minimum {
        u,
        quotient: q,
        iterations,
        stationarity,
    })
}

#[derive(Clone, Debug)]
pub(crate) struct Polished {
    pub u: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
    pub clamp_events: usize,
}

/// `‖Au − W|u|^{p−2}u‖_{D⁻¹} / ‖W|u|^{p−2}u‖_{D⁻¹}` with `D` the lumped mass.
pub(crate) fn relative_residual(a: &CsrMatrix, weights: &[f64], mass: &[f64], p: f64, u: &[f64]) -> f64 {
    let au = a.mul(u);
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..u.len() {
        let nl = weights[i] * u[i].abs().powf(p - 2.0) * u[i];
        num += (au[i] - nl).powi(2) / mass[i];
        den += nl * nl / mass[i];
    }
    if den == 0.0 {
        f64::INFINITY
    } else {
        (num / den).sqrt()
    }
}

/// Newton iteration on `F(u) = Au − W|u|^{p−2}u` with backtracking on the
/// residual and a floor clamp `u ≥ 0` after each step.
pub(crate) fn newton_polish(
    a: &CsrMatrix,
    weights: &[f64],
    mass: &[f64],
    p: f64,
    init: &[f64],
    tol: f64,
    stage: Stage,
) -> Result<Polished> {
    let n = init.len();
    let mut u = init.to_vec();
    let mut r = relative_residual(a, weights, mass, p, &u);
    let mut clamp_events = 0;
    let mut iterations = 0;
    // Polish past the target until progress stalls.
    let floor = (tol * 1e-4).max(1e-15);
    while r > floor && iterations < 60 {
        iterations += 1;
        let au = a.mul(&u);
        let f: Vec<f64> = (0..n).map(|i| au[i] - weights[i] * u[i].abs().powf(p - 2.0) * u[i]).collect();
        let jd: Vec<f64> = (0..n).map(|i| -(p - 1.0) * weights[i] * u[i].abs().powf(p - 2.0)).collect();
        let jac = a.add_diagonal(&jd);
        let rhs: Vec<f64> = f.iter().map(|x| -x).collect();
        let mut delta = vec![0.0; n];
        minres(&jac, &rhs, &mut delta, 1e-13, 20 * n + 2000)?;
        let mut tau = 1.0;
        let mut improved = false;
        for _ in 0..25 {
            let mut v: Vec<f64> = u.iter().zip(&delta).map(|(ui, di)| ui + tau * di).collect();
            let mut clamped = false;
            for x in v.iter_mut() {
                if *x < 0.0 {
                    *x = 0.0;
                    clamped = true;
                }
            }
            let rv = relative_residual(a, weights, mass, p, &v);
            if rv < r {
                if clamped {
                    clamp_events += 1;
                }
                u = v;
                r = rv;
                improved = true;
                break;
            }
            tau *= 0.5;
        }
        if !improved {
            break;
        }
    }
    if !(r <= tol) {
        return Err(CywError::NonConvergence {
            stage,
            iterations,
            achieved: r,
        });
    }
    Ok(Polished {
        u,
        residual: r,
        iterations,
        clamp_events,
    })
}

/// Minimization, rescaling by `c^{p−2} = Q_min` and Newton polish for
/// `Au = W|u|^{p−2}u`.
pub(crate) struct CriticalSolve {
    pub u: Vec<f64>,
    pub quotient: f64,
    pub minimization_iterations: usize,
    pub stationarity: f64,
    pub newton: Polished,
}

pub(crate) fn solve_critical(
    a: &CsrMatrix,
    weights: &[f64],
    mass: &[f64],
    p: f64,
    init: &[f64],
    stage: Stage,
) -> Result<CriticalSolve> {
    let min = minimize_quotient(a, &PNorm::Lumped(weights), p, init, 1e-6, 3000, stage)?;
    if !(min.quotient > 0.0) {
        return Err(CywError::precondition(
            stage,
            format!("minimal quotient {:.6e} is not positive, no positive rescaling exists", min.quotient),
        ));
    }
    let c = min.quotient.powf(1.0 / (p - 2.0));
    let scaled: Vec<f64> = min.u.iter().map(|x| c * x).collect();
    let newton = newton_polish(a, weights, mass, p, &scaled, 1e-8, stage)?;
    Ok(CriticalSolve {
        u: newton.u.clone(),
        quotient: min.quotient,
        minimization_iterations: min.iterations,
        stationarity: min.stationarity,
        newton,
    })
}

/// `uᵀAu` against `Σ W|u|^p`, relative.
pub(crate) fn pairing_defect(a: &CsrMatrix, weights: &[f64], p: f64, u: &[f64]) -> f64 {
    let lhs = a.quadratic_form(u);
    let rhs: f64 = weights.iter().zip(u).map(|(w, x)| w * x.abs().powf(p)).sum();
    (lhs - rhs).abs() / lhs.abs().max(rhs.abs()).max(f64::MIN_POSITIVE)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain(n: usize) -> CsrMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0 + 0.1));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -1.0));
            }
        }
        CsrMatrix::from_triplets(n, t)
    }

    #[test]
    fn power_iteration_lowers_quotient() {
        let a = chain(30);
        let w = vec![1.0; 30];
        let init: Vec<f64> = (0..30).map(|i| 1.0 + (i as f64 * 0.2).sin().abs()).collect();
        let mut u0 = init.clone();
        normalize(&mut u0, &PNorm::Lumped(&w), 6.0).unwrap();
        let q0 = a.quadratic_form(&u0);
        let m = minimize_quotient(&a, &PNorm::Lumped(&w), 6.0, &init, 1e-8, 5000, Stage::LocalSolve).unwrap();
        assert!(m.quotient <= q0);
    }

    #[test]
    fn critical_solve_meets_residual() {
        let a = chain(40);
        let w = vec![0.5; 40];
        let m = vec![1.0; 40];
        let init = vec![1.0; 40];
        let s = solve_critical(&a, &w, &m, 6.0, &init, Stage::LocalSolve).unwrap();
        assert!(s.newton.residual <= 1e-8);
        assert!(s.u.iter().all(|&x| x > 0.0));
        assert!(pairing_defect(&a, &w, 6.0, &s.u) < 1e-8);
    }
}
