//! Local Dirichlet problems for the perturbed Yamabe equation
//! `−aΔ_g u + (R_g + β)u = λu^{p−1}` on a vertex domain, the concentrating
//! test functions, the energy gate and the `β → 0⁻` continuation.
//!
//! Solutions are discrete minimizers of the lumped quotient followed by a
//! Newton polish, so the pairing identity
//! `uᵀ(aK + M_{R+β})u = λ Σ m_v u_v^p` holds to the solver residual.

mod continuation;
pub(crate) mod engine;
mod flat;
mod gate;

pub use continuation::{auxiliary_diagnostics, beta_continuation, AuxiliaryDiagnostics, ContinuationOptions, ContinuationTrace};
pub use flat::{chart_gradient, solve_flat_punctured, FlatProblem, FlatSolution};
pub use gate::{a_omega, energy_gate, k0, sobolev_estimate, t_sharp, EnergyThresholds, EpsSweep, GateOptions, SweepPoint};

use crate::error::{CywError, Result, Stage};
use crate::geometry::{DimensionConstants, Domain, GeometrySpec, Mesh, ScalarField};
use crate::operators::{assemble, AssembledOperators, BcMode, CsrMatrix};

/// Cutoff profile of the test function.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CutoffKind {
    /// `cos(πs/2)`, used in dimension three.
    Cosine,
    /// `exp(1 − 1/(1 − s²))`, used in dimension four and above.
    RadialBump,
}

impl CutoffKind {
    pub fn for_dimension(n: u32) -> Self {
        if n == 3 {
            CutoffKind::Cosine
        } else {
            CutoffKind::RadialBump
        }
    }

    fn eval(self, s: f64) -> f64 {
        if s >= 1.0 {
            return 0.0;
        }
        match self {
            CutoffKind::Cosine => (std::f64::consts::FRAC_PI_2 * s).cos(),
            CutoffKind::RadialBump => (1.0 - 1.0 / (1.0 - s * s)).exp(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TestFunctionParams {
    pub epsilon: f64,
    pub beta: f64,
    pub cutoff: CutoffKind,
    pub center: usize,
    pub radius: f64,
}

impl TestFunctionParams {
    pub fn new(epsilon: f64, beta: f64, center: usize, radius: f64, n: u32) -> Result<Self> {
        let p = TestFunctionParams {
            epsilon,
            beta,
            cutoff: CutoffKind::for_dimension(n),
            center,
            radius,
        };
        p.check()?;
        Ok(p)
    }

    fn check(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(CywError::invalid(Stage::Gate, "epsilon must be positive"));
        }
        if !(self.beta <= 0.0) {
            return Err(CywError::invalid(Stage::Gate, "beta must be nonpositive"));
        }
        if !(self.radius > 0.0) {
            return Err(CywError::invalid(Stage::Gate, "radius must be positive"));
        }
        Ok(())
    }
}

/// `φ(s)/(ε + s²)^{(n−2)/2}` with `s` the chart distance to the center over
/// the radius, zero on the frontier and outside the domain.
pub fn test_function(
    mesh: &Mesh,
    domain: &Domain,
    geom: &GeometrySpec,
    constants: DimensionConstants,
    params: &TestFunctionParams,
) -> Result<ScalarField> {
    params.check()?;
    if domain.mesh_id != mesh.id() || geom.mesh_id != mesh.id() {
        return Err(CywError::invalid(Stage::Gate, "domain or geometry does not belong to this mesh"));
    }
    if params.center >= mesh.vertex_count() || !domain.is_interior(params.center) {
        return Err(CywError::invalid(Stage::Gate, "test function center must be an interior vertex of the domain"));
    }
    let x0 = mesh.vertex(params.center);
    let half = (f64::from(constants.n) - 2.0) / 2.0;
    let mut values = vec![0.0; mesh.vertex_count()];
    for v in 0..mesh.vertex_count() {
        let s = geom.chart.distance(x0, mesh.vertex(v)) / params.radius;
        if !domain.member[v] {
            if s < 1.0 - 1e-9 {
                return Err(CywError::invalid(Stage::Gate, "test function support leaves the domain"));
            }
            continue;
        }
        if !domain.is_interior(v) {
            continue;
        }
        let d = params.epsilon + s * s;
        let denom = if constants.n == 3 { d.sqrt() } else { d.powf(half) };
        values[v] = params.cutoff.eval(s) / denom;
    }
    ScalarField::new(mesh, values)
}

/// Interior vertex farthest from the frontier and its chart distance.
pub fn deepest_vertex(mesh: &Mesh, geom: &GeometrySpec, domain: &Domain) -> (usize, f64) {
    let mut best = (domain.interior_set[0], 0.0);
    for &v in &domain.interior_set {
        let x = mesh.vertex(v);
        let mut d = f64::INFINITY;
        for &f in &domain.frontier_set {
            d = d.min(geom.chart.distance(x, mesh.vertex(f)));
            if d <= best.1 {
                break;
            }
        }
        if d > best.1 {
            best = (v, d);
        }
    }
    best
}

/// Dirichlet operators of a local problem with the unknowns on the domain
/// interior.
#[derive(Clone, Debug)]
pub struct LocalProblem<'a> {
    pub mesh: &'a Mesh,
    pub geom: &'a GeometrySpec,
    pub domain: Domain,
    pub constants: DimensionConstants,
    pub ops: AssembledOperators,
    /// Restricted `aK + diag(m_R)`.
    base: CsrMatrix,
    /// Lumped mass on the free vertices.
    mass: Vec<f64>,
}

impl<'a> LocalProblem<'a> {
    pub fn new(mesh: &'a Mesh, geom: &'a GeometrySpec, domain: &Domain, constants: DimensionConstants) -> Result<Self> {
        let ops = assemble(mesh, geom, constants, BcMode::Dirichlet(domain.clone()))?;
        let base = ops.restrict(&ops.lumped_conformal_matrix());
        let mass = ops.gather(&ops.lumped_mass);
        Ok(LocalProblem {
            mesh,
            geom,
            domain: domain.clone(),
            constants,
            ops,
            base,
            mass,
        })
    }

    /// Restricted `aK + diag(m_R) + β·diag(m)`.
    pub fn operator(&self, beta: f64) -> CsrMatrix {
        let shift: Vec<f64> = self.mass.iter().map(|m| beta * m).collect();
        self.base.add_diagonal(&shift)
    }

    pub fn lumped_mass(&self) -> &[f64] {
        &self.mass
    }

    fn weights(&self, lambda: f64) -> Vec<f64> {
        self.mass.iter().map(|m| lambda * m).collect()
    }

    /// Smallest value over the domain interior.
    pub fn interior_min(&self, u: &ScalarField) -> f64 {
        self.domain.interior_set.iter().map(|&v| u.values[v]).fold(f64::INFINITY, f64::min)
    }

    fn field(&self, reduced: &[f64]) -> ScalarField {
        ScalarField {
            values: self.ops.scatter(reduced),
            mesh_id: self.mesh.id(),
        }
    }

    fn check_field(&self, u: &ScalarField) -> Result<()> {
        u.check(self.mesh)?;
        for v in 0..u.len() {
            if self.ops.free_index[v].is_none() && u.values[v] != 0.0 {
                return Err(CywError::invalid(Stage::LocalSolve, format!("field is nonzero at frontier or exterior vertex {v}")));
            }
        }
        Ok(())
    }
}

/// A converged local solution with its certificates.
#[derive(Clone, Debug)]
pub struct LocalSolution {
    pub field: ScalarField,
    pub lambda: f64,
    pub beta: f64,
    /// Minimal lumped quotient before rescaling.
    pub quotient: f64,
    /// `‖F‖_{M⁻¹} / ‖λMu^{p−1}‖_{M⁻¹}`.
    pub residual: f64,
    /// Relative defect of `uᵀ(aK + M_{R+β})u = λΣ m u^p`.
    pub pairing_defect: f64,
    pub minimization_iterations: usize,
    /// Stationarity of the minimizer handed to Newton.
    pub stationarity: f64,
    pub newton_iterations: usize,
    pub clamp_events: usize,
    pub min_interior: f64,
}

/// Whether a local solve requires a passed gate.
#[derive(Clone, Copy, Debug)]
pub enum GateCheck<'a> {
    Require(&'a EnergyThresholds),
    /// Proceed without a passed gate (advisory mode).
    Override,
}

impl GateCheck<'_> {
    fn enforce(&self) -> Result<()> {
        if let GateCheck::Require(g) = self {
            if !g.gate_pass {
                return Err(CywError::precondition(
                    Stage::Gate,
                    format!("energy gate failed: Q_eps = {:.6} is not below T_used = {:.6}", g.q_eps, g.t_used),
                ));
            }
        }
        Ok(())
    }
}

pub const LOCAL_RESIDUAL_TOLERANCE: f64 = 1e-8;

/// Relative residual of `−aΔu + (R + β)u = λu^{p−1}` on the domain.
pub fn local_residual(problem: &LocalProblem, lambda: f64, beta: f64, u: &ScalarField) -> Result<f64> {
    problem.check_field(u)?;
    let x = problem.ops.gather(&u.values);
    Ok(engine::relative_residual(
        &problem.operator(beta),
        &problem.weights(lambda),
        &problem.mass,
        problem.constants.p,
        &x,
    ))
}

/// Solves the perturbed local problem from a nonnegative seed vanishing on
/// the frontier.
pub fn solve_perturbed(
    problem: &LocalProblem,
    lambda: f64,
    beta: f64,
    init: &ScalarField,
    gate: GateCheck,
) -> Result<LocalSolution> {
    gate.enforce()?;
    if !(lambda > 0.0) {
        return Err(CywError::invalid(Stage::LocalSolve, "lambda must be positive"));
    }
    if !(beta < 0.0) {
        return Err(CywError::invalid(Stage::LocalSolve, "beta must be negative"));
    }
    problem.check_field(init)?;
    if init.values.iter().any(|&x| x < 0.0) {
        return Err(CywError::invalid(Stage::LocalSolve, "initial field must be nonnegative"));
    }
    let x0 = problem.ops.gather(&init.values);
    if x0.iter().all(|&x| x == 0.0) {
        return Err(CywError::invalid(Stage::LocalSolve, "initial field vanishes on the interior"));
    }
    let a = problem.operator(beta);
    let w = problem.weights(lambda);
    let p = problem.constants.p;
    let solved = engine::solve_critical(&a, &w, &problem.mass, p, &x0, Stage::LocalSolve)?;
    let pairing_defect = engine::pairing_defect(&a, &w, p, &solved.u);
    let field = problem.field(&solved.u);
    let min_interior = problem.interior_min(&field);
    if !(min_interior > 0.0) {
        return Err(CywError::failure(
            Stage::LocalSolve,
            format!("local solution is not positive on the interior (min {min_interior:.3e})"),
        ));
    }
    if !(pairing_defect <= LOCAL_RESIDUAL_TOLERANCE) {
        return Err(CywError::failure(
            Stage::LocalSolve,
            format!("pairing identity defect {pairing_defect:.3e} exceeds tolerance"),
        ));
    }
    Ok(LocalSolution {
        field,
        lambda,
        beta,
        quotient: solved.quotient,
        residual: solved.newton.residual,
        pairing_defect,
        minimization_iterations: solved.minimization_iterations,
        stationarity: solved.stationarity,
        newton_iterations: solved.newton.iterations,
        clamp_events: solved.newton.clamp_events,
        min_interior,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::build_preset;

    #[test]
    fn test_function_center_and_frontier() {
        let (mesh, geom) = build_preset("ball-negR", 1).unwrap();
        let dom = Domain::whole(&mesh).unwrap();
        let (c, r) = deepest_vertex(&mesh, &geom, &dom);
        let params = TestFunctionParams::new(0.04, -0.1, c, r, 3).unwrap();
        let u = test_function(&mesh, &dom, &geom, DimensionConstants::three(), &params).unwrap();
        assert_eq!(u.values[c], 1.0 / 0.04f64.sqrt());
        assert!(dom.frontier_set.iter().all(|&v| u.values[v] == 0.0));
        assert!(dom.interior_set.iter().all(|&v| u.values[v] >= 0.0));
    }

    #[test]
    fn frontier_center_is_rejected() {
        let (mesh, geom) = build_preset("ball-negR", 0).unwrap();
        let dom = Domain::whole(&mesh).unwrap();
        let params = TestFunctionParams::new(0.1, 0.0, dom.frontier_set[0], 0.5, 3).unwrap();
        assert!(test_function(&mesh, &dom, &geom, DimensionConstants::three(), &params).is_err());
    }
}
