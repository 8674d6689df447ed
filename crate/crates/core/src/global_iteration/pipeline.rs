//! Route selection and the end-to-end prescription run.
//!
//! Every route ends in the same global stage: a zero-extended local solution
//! as sub-solution, a glued super-solution, the monotone iteration and an
//! independent recomputation of the deformed curvature.

use super::bracket::{make_subsolution, scale_eigenfunction};
use super::glue::{glue_supersolution, GlueBranch, GlueOptions, GlueOutcome};
use super::inequalities::{check_side, verify_inequalities, InequalityReport, Side};
use super::iterate::{monotone_iterate, IterationOptions, IterationState};
use super::normalize::{negative_scalar_normalization, positive_mean_curvature_normalization, Normalization};
use crate::error::{CywError, Result, Stage};
use crate::geometry::{DimensionConstants, Domain, GeometrySpec, Mesh, Model, ScalarField};
use crate::local_yamabe::engine::{newton_polish, solve_critical};
use crate::local_yamabe::{
    beta_continuation, deepest_vertex, energy_gate, solve_flat_punctured, ContinuationOptions, EnergyThresholds, EpsSweep,
    FlatProblem, GateOptions, LocalProblem,
};
use crate::operators::eigen::{first_lumped_eigenpair, EigenResult};
use crate::operators::{assemble, conformal_change, AssembledOperators, BcMode};
use crate::sphere_tools::{
    check_condition_a, default_pair_tolerance, mesh_samples, obstruction_report, ConditionVerdict, Extension, ObstructionReport,
    SphereFunction,
};
use std::fmt::Write as _;
use std::sync::Arc;
use std::time::Instant;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Route {
    NotLcfInO,
    LcfInOManifoldNotLcf,
    LcfManifold,
    ScenarioASphere,
    TrivialConstant,
}

impl Route {
    pub fn as_str(self) -> &'static str {
        match self {
            Route::NotLcfInO => "not-lcf-in-O",
            Route::LcfInOManifoldNotLcf => "lcf-in-O-manifold-not-lcf",
            Route::LcfManifold => "lcf-manifold",
            Route::ScenarioASphere => "scenario-a-sphere",
            Route::TrivialConstant => "trivial-constant",
        }
    }

    pub fn parse(s: &str) -> Result<Route> {
        [
            Route::NotLcfInO,
            Route::LcfInOManifoldNotLcf,
            Route::LcfManifold,
            Route::ScenarioASphere,
            Route::TrivialConstant,
        ]
        .into_iter()
        .find(|r| r.as_str().eq_ignore_ascii_case(s))
        .ok_or_else(|| CywError::invalid(Stage::Config, format!("unknown route '{s}'")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GlobalBc {
    Closed,
    Robin,
}

impl GlobalBc {
    pub fn as_str(self) -> &'static str {
        match self {
            GlobalBc::Closed => "closed",
            GlobalBc::Robin => "robin",
        }
    }

    fn mode(self) -> BcMode {
        match self {
            GlobalBc::Closed => BcMode::Closed,
            GlobalBc::Robin => BcMode::Robin,
        }
    }
}

/// Ambient expression of the target, used by the sphere condition check.
pub type AmbientFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

#[derive(Clone, Debug, PartialEq)]
pub enum TargetKind {
    Constant(f64),
    /// Equal to `level` on `core` (vertex indices).
    Admissible { core: Vec<usize>, level: f64 },
    General,
}

#[derive(Clone)]
pub struct CurvatureTarget {
    pub field: ScalarField,
    pub kind: TargetKind,
    pub ambient: Option<AmbientFn>,
}

impl CurvatureTarget {
    pub fn constant(mesh: &Mesh, value: f64) -> Self {
        CurvatureTarget {
            field: ScalarField::constant(mesh, value),
            kind: TargetKind::Constant(value),
            ambient: Some(Arc::new(move |_| value)),
        }
    }

    pub fn general(field: ScalarField, ambient: Option<AmbientFn>) -> Self {
        CurvatureTarget {
            field,
            kind: TargetKind::General,
            ambient,
        }
    }

    fn constant_value(&self) -> Option<f64> {
        if let TargetKind::Constant(c) = self.kind {
            return Some(c);
        }
        let (lo, hi) = (self.field.min(), self.field.max());
        (hi - lo <= 1e-12 * hi.abs().max(lo.abs()).max(1.0)).then_some(0.5 * (lo + hi))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PrescribeConfig {
    pub bc: GlobalBc,
    pub route_override: Option<Route>,
    pub beta0: f64,
    pub ratio: f64,
    pub eps_sweep: EpsSweep,
    /// Chart radius of the local ball on routes without a marked region.
    pub local_radius: Option<f64>,
    /// Puncture radius for the flat solve (the nearest vertex at least).
    pub puncture_radius: f64,
    /// Center of the negative-curvature normalization.
    pub normalization_vertex: Option<usize>,
    pub glue: GlueOptions,
    pub iteration: IterationOptions,
    /// Bound on `max|R̃ − S| / max|S|` over interior vertices.
    pub curvature_tolerance: f64,
    /// Bound on the scaled Robin residual at boundary vertices.
    pub boundary_tolerance: f64,
    pub pair_tolerance: Option<f64>,
    pub condition_extension: Extension,
    pub obstruction_tolerance: f64,
    pub seed: u64,
}

impl Default for PrescribeConfig {
    fn default() -> Self {
        PrescribeConfig {
            bc: GlobalBc::Closed,
            route_override: None,
            beta0: -0.2,
            ratio: 0.5,
            eps_sweep: EpsSweep::adaptive(),
            local_radius: None,
            puncture_radius: 0.0,
            normalization_vertex: None,
            glue: GlueOptions::default(),
            iteration: IterationOptions::default(),
            curvature_tolerance: 1e-4,
            boundary_tolerance: 1e-6,
            pair_tolerance: None,
            condition_extension: Extension::Ambient,
            obstruction_tolerance: 1e-3,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NormalizationSummary {
    pub kind: &'static str,
    pub applied: bool,
    pub t: f64,
    pub size: f64,
    pub value_before: f64,
    pub value_after: f64,
    pub boundary_signs_before: Option<(usize, usize)>,
    pub boundary_signs_after: Option<(usize, usize)>,
}

impl NormalizationSummary {
    fn from(kind: &'static str, n: &Normalization) -> Self {
        NormalizationSummary {
            kind,
            applied: n.applied,
            t: n.t,
            size: n.size,
            value_before: n.value_before,
            value_after: n.value_after,
            boundary_signs_before: n.boundary_signs_before,
            boundary_signs_after: n.boundary_signs_after,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LocalSummary {
    pub method: &'static str,
    pub center: usize,
    pub outer_radius: f64,
    pub inner_radius: Option<f64>,
    pub domain_vertices: usize,
    pub interior_vertices: usize,
    pub raw_residual: f64,
    pub polished_residual: f64,
    pub polish_iterations: usize,
    pub min_interior: f64,
    pub frontier_min_dihedral: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ContinuationSummary {
    pub betas: Vec<f64>,
    pub cauchy_tail: f64,
    pub lp_bound: f64,
    pub converged: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IterationSummary {
    pub shift_k: f64,
    pub steps: usize,
    pub bracket_violations: usize,
    pub restarts: usize,
    pub worst_decrease: f64,
    pub final_residual: f64,
    pub min_u: f64,
    pub max_u: f64,
    pub converged: bool,
}

impl IterationSummary {
    fn from(state: &IterationState) -> Self {
        IterationSummary {
            shift_k: state.shift_k,
            steps: state.steps,
            bracket_violations: state.bracket_violations,
            restarts: state.restarts,
            worst_decrease: state.worst_decrease,
            final_residual: state.final_residual(),
            min_u: state.min_u.last().copied().unwrap_or(f64::NAN),
            max_u: state.max_u.last().copied().unwrap_or(f64::NAN),
            converged: state.converged,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Verification {
    /// `max|R̃ − S| / max|S|` over interior vertices.
    pub curvature_residual: f64,
    /// Robin residual at boundary vertices, scaled by `a·(boundary weight)`.
    pub boundary_residual: Option<f64>,
    pub min_u: f64,
    pub max_u: f64,
    /// Minimum of the composed factor (normalizations times `u`).
    pub factor_min: f64,
    pub accepted: bool,
}

#[derive(Clone, Debug, Default)]
pub struct ObstructionBlock {
    pub condition: Option<ConditionVerdict>,
    pub integrals: Option<ObstructionReport>,
}

#[derive(Clone, Debug)]
pub struct SolveReport {
    pub preset: String,
    pub vertices: usize,
    pub bc: GlobalBc,
    pub seed: u64,
    pub route: Option<Route>,
    pub failure: Option<(Stage, String)>,
    pub normalizations: Vec<NormalizationSummary>,
    pub local: Option<LocalSummary>,
    pub thresholds: Option<EnergyThresholds>,
    pub continuation: Option<ContinuationSummary>,
    pub eig: Option<EigenResult>,
    /// `(θ, pointwise margin)` of the scaled eigenfunction.
    pub scaled: Option<(f64, f64)>,
    pub subsolution: Option<(f64, bool)>,
    pub glue: Option<GlueOutcome>,
    pub inequalities: Option<InequalityReport>,
    pub iteration: Option<IterationSummary>,
    pub verification: Option<Verification>,
    pub obstructions: ObstructionBlock,
    pub warnings: Vec<String>,
    /// `u` relative to the (normalized) background.
    pub solution: Option<ScalarField>,
    /// Conformal factor relative to the input metric.
    pub factor: Option<ScalarField>,
    pub iteration_trace: Option<String>,
    pub gate_sweep: Option<String>,
    pub witness_csv: Option<String>,
    /// Wall-clock seconds per stage; never serialized.
    pub timings: Vec<(&'static str, f64)>,
}

/// A failed run together with everything recorded before the failure.
#[derive(Debug)]
pub struct PipelineFailure {
    pub error: CywError,
    pub report: SolveReport,
}

impl std::fmt::Display for PipelineFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.error.fmt(f)
    }
}

impl std::error::Error for PipelineFailure {}

fn num(x: f64) -> String {
    format!("{x:.17e}")
}

impl SolveReport {
    fn new(mesh: &Mesh, geom: &GeometrySpec, cfg: &PrescribeConfig) -> Self {
        SolveReport {
            preset: geom.preset_id.clone(),
            vertices: mesh.vertex_count(),
            bc: cfg.bc,
            seed: cfg.seed,
            route: None,
            failure: None,
            normalizations: Vec::new(),
            local: None,
            thresholds: None,
            continuation: None,
            eig: None,
            scaled: None,
            subsolution: None,
            glue: None,
            inequalities: None,
            iteration: None,
            verification: None,
            obstructions: ObstructionBlock::default(),
            warnings: geom.warnings.clone(),
            solution: None,
            factor: None,
            iteration_trace: None,
            gate_sweep: None,
            witness_csv: None,
            timings: Vec::new(),
        }
    }

    pub fn accepted(&self) -> bool {
        self.failure.is_none() && self.verification.as_ref().is_some_and(|v| v.accepted)
    }

    /// `CYWREPORT 1` text. A `timestamp` line follows the header when given.
    pub fn to_text(&self, timestamp: Option<&str>) -> String {
        let mut o = String::from("CYWREPORT 1\n");
        if let Some(t) = timestamp {
            let _ = writeln!(o, "timestamp {t}");
        }
        let _ = writeln!(o, "preset {}", self.preset);
        let _ = writeln!(o, "vertices {}", self.vertices);
        let _ = writeln!(o, "bc {}", self.bc.as_str());
        let _ = writeln!(o, "seed {}", self.seed);
        let _ = writeln!(o, "route {}", self.route.map_or("none", Route::as_str));
        let _ = writeln!(o, "status {}", if self.accepted() { "accepted" } else { "failed" });
        if let Some((stage, msg)) = &self.failure {
            let _ = writeln!(o, "failure_stage {stage}");
            let _ = writeln!(o, "failure_message {}", msg.replace('\n', " "));
        }
        for n in &self.normalizations {
            let _ = writeln!(o, "[normalization {}]", n.kind);
            let _ = writeln!(o, "applied {}", n.applied);
            let _ = writeln!(o, "t {}", num(n.t));
            let _ = writeln!(o, "size {}", num(n.size));
            let _ = writeln!(o, "value_before {}", num(n.value_before));
            let _ = writeln!(o, "value_after {}", num(n.value_after));
            if let (Some(b), Some(a)) = (n.boundary_signs_before, n.boundary_signs_after) {
                let _ = writeln!(o, "boundary_positive_before {} of {}", b.0, b.0 + b.1);
                let _ = writeln!(o, "boundary_positive_after {} of {}", a.0, a.0 + a.1);
            }
        }
        if let Some(l) = &self.local {
            o.push_str("[local]\n");
            let _ = writeln!(o, "method {}", l.method);
            let _ = writeln!(o, "center {}", l.center);
            let _ = writeln!(o, "outer_radius {}", num(l.outer_radius));
            if let Some(r) = l.inner_radius {
                let _ = writeln!(o, "inner_radius {}", num(r));
            }
            let _ = writeln!(o, "domain_vertices {}", l.domain_vertices);
            let _ = writeln!(o, "interior_vertices {}", l.interior_vertices);
            let _ = writeln!(o, "raw_residual {}", num(l.raw_residual));
            let _ = writeln!(o, "polished_residual {}", num(l.polished_residual));
            let _ = writeln!(o, "polish_iterations {}", l.polish_iterations);
            let _ = writeln!(o, "min_interior {}", num(l.min_interior));
            let _ = writeln!(o, "frontier_min_dihedral_deg {}", num(l.frontier_min_dihedral));
        }
        if let Some(t) = &self.thresholds {
            o.push_str("[thresholds]\n");
            let _ = writeln!(o, "t_est {}", num(t.t_est));
            let _ = writeln!(o, "t_sharp {}", num(t.t_sharp));
            let _ = writeln!(o, "t_used {}", num(t.t_used));
            let _ = writeln!(o, "a_omega {}", num(t.a_omega));
            let _ = writeln!(o, "q_eps {}", num(t.q_eps));
            let _ = writeln!(o, "k0 {}", num(t.k0));
            let _ = writeln!(o, "mountain_level_estimate {}", num(t.t1));
            let _ = writeln!(o, "best_epsilon {}", num(t.best_epsilon));
            let _ = writeln!(o, "gate_pass {}", t.gate_pass);
        }
        if let Some(c) = &self.continuation {
            o.push_str("[continuation]\n");
            let _ = writeln!(o, "steps {}", c.betas.len());
            let _ = writeln!(o, "final_beta {}", num(c.betas.last().copied().unwrap_or(f64::NAN)));
            let _ = writeln!(o, "cauchy_tail {}", num(c.cauchy_tail));
            let _ = writeln!(o, "lp_bound {}", num(c.lp_bound));
            let _ = writeln!(o, "converged {}", c.converged);
        }
        if let Some(e) = &self.eig {
            o.push_str("[eig]\n");
            let _ = writeln!(o, "eigenvalue {}", num(e.eigenvalue));
            let _ = writeln!(o, "residual {}", num(e.residual));
            let _ = writeln!(o, "iterations {}", e.iterations);
            let _ = writeln!(o, "one_signed {}", e.one_signed);
            if let Some((theta, margin)) = self.scaled {
                let _ = writeln!(o, "theta {}", num(theta));
                let _ = writeln!(o, "pointwise_margin {}", num(margin));
            }
        }
        if let Some((extreme, pass)) = self.subsolution {
            o.push_str("[subsolution]\n");
            let _ = writeln!(o, "strong_extreme {}", num(extreme));
            let _ = writeln!(o, "pass {pass}");
        }
        if let Some(g) = &self.glue {
            o.push_str("[glue]\n");
            let _ = writeln!(
                o,
                "branch {}",
                match g.branch {
                    GlueBranch::Eigenfunction => "eigenfunction",
                    GlueBranch::Blended => "blended",
                }
            );
            let _ = writeln!(o, "rounds {}", g.rounds);
            let _ = writeln!(o, "gamma {}", num(g.config.gamma));
            let _ = writeln!(o, "theta {}", num(g.config.theta));
            let _ = writeln!(o, "mollifier_width {}", num(g.config.mollifier_width));
            let _ = writeln!(o, "transition_eps {}", num(g.config.transition_eps));
            let _ = writeln!(o, "strong_margin {}", num(g.strong_margin));
            let _ = writeln!(o, "dominance_gap {}", num(g.dominance_gap));
            let _ = writeln!(o, "linearized_rayleigh {}", num(g.linearized_rayleigh));
        }
        if let Some(i) = &self.inequalities {
            o.push_str("[inequalities]\n");
            let _ = writeln!(o, "sub_strong {}", num(i.sub.strong_extreme));
            let _ = writeln!(o, "super_strong {}", num(i.sup.strong_extreme));
            let _ = writeln!(o, "ordering_gap {}", num(i.ordering_gap));
            let _ = writeln!(o, "pass {}", i.pass());
        }
        if let Some(it) = &self.iteration {
            o.push_str("[iteration]\n");
            let _ = writeln!(o, "shift_k {}", num(it.shift_k));
            let _ = writeln!(o, "steps {}", it.steps);
            let _ = writeln!(o, "bracket_violations {}", it.bracket_violations);
            let _ = writeln!(o, "restarts {}", it.restarts);
            let _ = writeln!(o, "worst_decrease {}", num(it.worst_decrease));
            let _ = writeln!(o, "final_residual {}", num(it.final_residual));
            let _ = writeln!(o, "min_u {}", num(it.min_u));
            let _ = writeln!(o, "max_u {}", num(it.max_u));
            let _ = writeln!(o, "converged {}", it.converged);
        }
        if let Some(v) = &self.verification {
            o.push_str("[verification]\n");
            let _ = writeln!(o, "curvature_residual {}", num(v.curvature_residual));
            if let Some(b) = v.boundary_residual {
                let _ = writeln!(o, "boundary_residual {}", num(b));
            }
            let _ = writeln!(o, "min_u {}", num(v.min_u));
            let _ = writeln!(o, "max_u {}", num(v.max_u));
            let _ = writeln!(o, "factor_min {}", num(v.factor_min));
            let _ = writeln!(o, "accepted {}", v.accepted);
        }
        if self.obstructions.condition.is_some() || self.obstructions.integrals.is_some() {
            o.push_str("[obstructions]\n");
            if let Some(c) = &self.obstructions.condition {
                let _ = writeln!(o, "condition_a {}", c.verdict.as_str());
                let _ = writeln!(o, "pairs_checked {}", c.pairs_checked);
                let _ = writeln!(o, "witnesses {}", c.witnesses.len());
            }
            if let Some(r) = &self.obstructions.integrals {
                for (i, v) in &r.kw_values {
                    let _ = writeln!(o, "kw_{i} {}", num(*v));
                }
                for (i, v) in &r.be_values {
                    let _ = writeln!(o, "be_{i} {}", num(*v));
                }
                let _ = writeln!(o, "kw_scale {}", num(r.kw_scale));
                let _ = writeln!(o, "be_scale {}", num(r.be_scale));
            }
        }
        if !self.warnings.is_empty() {
            o.push_str("[warnings]\n");
            for w in &self.warnings {
                let _ = writeln!(o, "warning {w}");
            }
        }
        o
    }
}

/// Picks the route from the geometry and target; an override wins.
pub fn select_route(geom: &GeometrySpec, target: &CurvatureTarget, cfg: &PrescribeConfig) -> Route {
    if let Some(r) = cfg.route_override {
        return r;
    }
    if target.constant_value().is_some_and(|c| c > 0.0) {
        return Route::TrivialConstant;
    }
    if geom.model == Some(Model::RoundSphere) {
        return Route::ScenarioASphere;
    }
    if geom.conformal_flat_factor.is_some() {
        return Route::LcfManifold;
    }
    Route::NotLcfInO
}

/// A local solution supported on `domain`, vanishing on its frontier.
/// A local solution and the domain it is supported on.
#[derive(Clone, Debug)]
pub struct LocalStage {
    pub domain: Domain,
    pub field: ScalarField,
}

/// Runs the pipeline. On failure the partial report travels with the error.
pub fn prescribe(
    mesh: &Mesh,
    geom: &GeometrySpec,
    target: &CurvatureTarget,
    cfg: &PrescribeConfig,
) -> std::result::Result<SolveReport, Box<PipelineFailure>> {
    let mut report = SolveReport::new(mesh, geom, cfg);
    match run(mesh, geom, target, cfg, &mut report) {
        Ok(()) => Ok(report),
        Err(error) => {
            report.failure = Some((error.stage(), error.to_string()));
            Err(Box::new(PipelineFailure { error, report }))
        }
    }
}

fn prologue(
    mesh: &Mesh,
    geom: &GeometrySpec,
    target: &CurvatureTarget,
    cfg: &PrescribeConfig,
    report: &mut SolveReport,
) -> Result<(Route, GeometrySpec, ScalarField)> {
    target.field.check(mesh)?;
    if geom.mesh_id != mesh.id() {
        return Err(CywError::invalid(Stage::Routing, "geometry does not belong to this mesh"));
    }
    match cfg.bc {
        GlobalBc::Closed if !mesh.is_closed() => {
            return Err(CywError::invalid(Stage::Routing, "closed mode needs a mesh without boundary"));
        }
        GlobalBc::Robin if mesh.is_closed() => {
            return Err(CywError::invalid(Stage::Routing, "robin mode needs a mesh with boundary"));
        }
        _ => {}
    }
    let c = DimensionConstants::three();
    let route = select_route(geom, target, cfg);
    report.route = Some(route);

    if route == Route::ScenarioASphere {
        check_scenario_a(mesh, geom, target, cfg, report)?;
    }

    let mut background = geom.clone();
    let mut prior = ScalarField::constant(mesh, 1.0);
    if cfg.bc == GlobalBc::Robin {
        let ops = assemble(mesh, &background, c, BcMode::Robin)?;
        let norm = positive_mean_curvature_normalization(mesh, &background, &ops)?;
        report.normalizations.push(NormalizationSummary::from("positive-mean-curvature", &norm));
        if norm.applied {
            compose(&mut prior, &norm.factor);
            background = norm.geometry;
        }
    }
    Ok((route, background, prior))
}

#[allow(clippy::too_many_arguments)]
fn solve_local(
    route: Route,
    mesh: &Mesh,
    background: GeometrySpec,
    prior: &mut ScalarField,
    target: &CurvatureTarget,
    c: DimensionConstants,
    cfg: &PrescribeConfig,
    report: &mut SolveReport,
) -> Result<(LocalStage, GeometrySpec)> {
    match route {
        Route::NotLcfInO => continuation_local(mesh, &background, prior, target, c, cfg, report),
        _ => Ok((flat_local(mesh, &background, target, c, cfg, report)?, background)),
    }
}

fn run(mesh: &Mesh, geom: &GeometrySpec, target: &CurvatureTarget, cfg: &PrescribeConfig, report: &mut SolveReport) -> Result<()> {
    let c = DimensionConstants::three();
    let mut clock = Instant::now();
    let (route, background, mut prior) = prologue(mesh, geom, target, cfg, report)?;
    lap(report, "normalization", &mut clock);
    let s = &target.field;

    if route == Route::TrivialConstant {
        let level = target
            .constant_value()
            .filter(|&l| l > 0.0)
            .ok_or_else(|| CywError::precondition(Stage::Routing, "trivial route needs a positive constant target"))?;
        return trivial(mesh, geom, &background, &prior, s, level, c, cfg, report, clock);
    }

    let (local, background) = solve_local(route, mesh, background, &mut prior, target, c, cfg, report)?;
    lap(report, "local", &mut clock);
    global_stage(mesh, geom, &background, &prior, s, local, c, cfg, report, clock)
}

/// Runs routing, normalization and the local solve without the global
/// stage. Returns the background metric the local solution lives on.
pub fn local_stage(mesh: &Mesh, geom: &GeometrySpec, target: &CurvatureTarget, cfg: &PrescribeConfig) -> Result<(LocalStage, GeometrySpec)> {
    let mut report = SolveReport::new(mesh, geom, cfg);
    let (route, background, mut prior) = prologue(mesh, geom, target, cfg, &mut report)?;
    if route == Route::TrivialConstant {
        return Err(CywError::precondition(Stage::Routing, "the constant-target route has no local stage"));
    }
    solve_local(route, mesh, background, &mut prior, target, DimensionConstants::three(), cfg, &mut report)
}

fn lap(report: &mut SolveReport, stage: &'static str, clock: &mut Instant) {
    report.timings.push((stage, clock.elapsed().as_secs_f64()));
    *clock = Instant::now();
}

fn compose(prior: &mut ScalarField, factor: &ScalarField) {
    for (x, f) in prior.values.iter_mut().zip(&factor.values) {
        *x *= f;
    }
}

fn check_scenario_a(mesh: &Mesh, geom: &GeometrySpec, target: &CurvatureTarget, cfg: &PrescribeConfig, report: &mut SolveReport) -> Result<()> {
    let Some(ambient) = target.ambient.clone() else {
        return Err(CywError::invalid(Stage::Obstruction, "the sphere route needs an ambient expression of the target"));
    };
    let samples = mesh_samples(mesh)?;
    let tol = cfg.pair_tolerance.unwrap_or_else(|| default_pair_tolerance(mesh, geom));
    let q = SphereFunction::new(move |x| ambient(x), cfg.condition_extension);
    let verdict = check_condition_a(&q, &samples, tol)?;
    let passed = verdict.verdict.passed();
    report.witness_csv = Some(verdict.witness_csv());
    let failing: std::collections::BTreeSet<usize> = verdict.witnesses.iter().map(|w| w.pair_id).collect();
    let summary = format!(
        "condition A fails at {} of {} antipodal pairs",
        failing.len(),
        verdict.pairs_checked
    );
    report.obstructions.condition = Some(verdict);
    if passed {
        Ok(())
    } else {
        Err(CywError::Obstruction { message: summary })
    }
}

fn max_abs(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

#[allow(clippy::too_many_arguments)]
fn trivial(
    mesh: &Mesh,
    geom: &GeometrySpec,
    background: &GeometrySpec,
    prior: &ScalarField,
    s: &ScalarField,
    level: f64,
    c: DimensionConstants,
    cfg: &PrescribeConfig,
    report: &mut SolveReport,
    mut clock: Instant,
) -> Result<()> {
    let ops = assemble(mesh, background, c, cfg.bc.mode())?;
    let a = ops.restrict(&ops.lumped_conformal_matrix());
    let mass = ops.gather(&ops.lumped_mass);
    let weights: Vec<f64> = mass.iter().map(|m| m * level).collect();
    let ones = vec![1.0; mass.len()];
    let rows = a.mul(&ones);
    let defect = max_abs((0..rows.len()).map(|i| (rows[i] - weights[i]) / mass[i]));
    let w = if defect <= 1e-12 * level {
        ScalarField::constant(mesh, 1.0)
    } else {
        let solved = solve_critical(&a, &weights, &mass, c.p, &ones, Stage::Iteration)?;
        let polished = newton_polish(&a, &weights, &mass, c.p, &solved.u, 1e-12, Stage::Iteration)?;
        ScalarField {
            values: ops.scatter(&polished.u),
            mesh_id: mesh.id(),
        }
    };
    let ineq = verify_inequalities(&ops, s, &w, &w);
    let pass = ineq.pass();
    report.inequalities = Some(ineq);
    if !pass {
        return Err(CywError::failure(Stage::Iteration, "constant-target bracket fails the inequality check"));
    }
    lap(report, "local", &mut clock);
    let state = monotone_iterate(&ops, s, &w, &w, &cfg.iteration)?;
    lap(report, "iteration", &mut clock);
    finish(mesh, geom, background, &ops, prior, s, state, cfg, report, clock)
}

/// Local solve through the flat chart: an annular shell inside the region
/// where the target is constant, or a punctured ball elsewhere.
fn flat_local(
    mesh: &Mesh,
    background: &GeometrySpec,
    target: &CurvatureTarget,
    c: DimensionConstants,
    cfg: &PrescribeConfig,
    report: &mut SolveReport,
) -> Result<LocalStage> {
    let s = &target.field;
    let (domain, problem, center, outer, inner) = match &target.kind {
        TargetKind::Admissible { core, .. } => {
            let region = core_domain(mesh, core)?;
            let (center, depth) = deepest_vertex(mesh, background, &region);
            let outer = 0.9 * depth;
            let inner = 0.4 * outer;
            let x0 = mesh.vertex(center).to_vec();
            let member: Vec<bool> = (0..mesh.vertex_count())
                .map(|v| {
                    let d = background.chart.distance(&x0, mesh.vertex(v));
                    region.member[v] && d > inner && d < outer
                })
                .collect();
            let domain = Domain::from_mask(mesh, member).map_err(|e| e.at(Stage::LocalSolve))?;
            (domain, FlatProblem::Annular, center, outer, Some(inner))
        }
        _ => {
            let center = gradient_center(mesh, background, s)?;
            let x0 = mesh.vertex(center).to_vec();
            let reach = (0..mesh.vertex_count())
                .map(|v| background.chart.distance(&x0, mesh.vertex(v)))
                .fold(0.0f64, f64::max);
            let outer = cfg.local_radius.unwrap_or((6.0 * max_chart_edge(mesh, background)).min(0.5 * reach));
            let member: Vec<bool> = (0..mesh.vertex_count())
                .map(|v| background.chart.distance(&x0, mesh.vertex(v)) < outer && s.values[v] > 0.0 && !mesh.is_boundary(v))
                .collect();
            let ball = Domain::from_mask(mesh, member).map_err(|e| e.at(Stage::LocalSolve))?;
            let (domain, snapped) = ball.puncture(mesh, background, &x0, cfg.puncture_radius)?;
            (domain, FlatProblem::Punctured { center: x0 }, center, outer, Some(snapped))
        }
    };
    let flat = solve_flat_punctured(mesh, &domain, s, background, c, &problem)?;
    polish_local(mesh, background, s, c, domain, flat.field, "flat-chart", center, outer, inner, flat.curved_residual, report)
}

fn core_domain(mesh: &Mesh, core: &[usize]) -> Result<Domain> {
    let mut member = vec![false; mesh.vertex_count()];
    for &v in core {
        if v >= member.len() {
            return Err(CywError::invalid(Stage::Routing, "core vertex out of range"));
        }
        member[v] = true;
    }
    Domain::from_mask(mesh, member).map_err(|e| e.at(Stage::Routing))
}

fn max_chart_edge(mesh: &Mesh, geom: &GeometrySpec) -> f64 {
    mesh.edges()
        .iter()
        .map(|&(a, b)| geom.chart.distance(mesh.vertex(a), mesh.vertex(b)))
        .fold(0.0f64, f64::max)
}

/// Interior vertex with `S ≥ ½ max S` and the steepest neighbor difference
/// quotient; the lowest index wins ties.
fn gradient_center(mesh: &Mesh, geom: &GeometrySpec, s: &ScalarField) -> Result<usize> {
    let s_max = s.max();
    if !(s_max > 0.0) {
        return Err(CywError::precondition(Stage::LocalSolve, "target has no positive values"));
    }
    let psi_max = geom.conformal_flat_factor.as_ref().map_or(1.0, |f| f.max());
    let mut best: Option<(usize, f64)> = None;
    for v in 0..mesh.vertex_count() {
        if mesh.is_boundary(v) || s.values[v] < 0.5 * s_max {
            continue;
        }
        if let Some(psi) = &geom.conformal_flat_factor {
            if psi.values[v] < 0.25 * psi_max {
                continue;
            }
        }
        let x = mesh.vertex(v);
        let slope = mesh
            .neighbors(v)
            .iter()
            .map(|&w| (s.values[w] - s.values[v]).abs() / geom.chart.distance(x, mesh.vertex(w)))
            .fold(0.0f64, f64::max);
        if best.is_none_or(|(_, b)| slope > b) {
            best = Some((v, slope));
        }
    }
    best.map(|(v, _)| v)
        .ok_or_else(|| CywError::precondition(Stage::LocalSolve, "no admissible center for the local solve"))
}

/// Newton on the lumped Dirichlet system at `β = 0`, so that the zero
/// extension is an exact discrete sub-solution.
#[allow(clippy::too_many_arguments)]
fn polish_local(
    mesh: &Mesh,
    background: &GeometrySpec,
    s: &ScalarField,
    c: DimensionConstants,
    domain: Domain,
    raw: ScalarField,
    method: &'static str,
    center: usize,
    outer: f64,
    inner: Option<f64>,
    raw_residual: f64,
    report: &mut SolveReport,
) -> Result<LocalStage> {
    let ops = assemble(mesh, background, c, BcMode::Dirichlet(domain.clone()))?;
    let a = ops.restrict(&ops.lumped_conformal_matrix());
    let mass = ops.gather(&ops.lumped_mass);
    let weights: Vec<f64> = mass.iter().zip(ops.gather(&s.values)).map(|(m, x)| m * x).collect();
    let init = ops.gather(&raw.values);
    let polished = newton_polish(&a, &weights, &mass, c.p, &init, 1e-12, Stage::LocalSolve)?;
    let field = ScalarField {
        values: ops.scatter(&polished.u),
        mesh_id: mesh.id(),
    };
    let min_interior = domain.interior_set.iter().map(|&v| field.values[v]).fold(f64::INFINITY, f64::min);
    report.local = Some(LocalSummary {
        method,
        center,
        outer_radius: outer,
        inner_radius: inner,
        domain_vertices: domain.vertex_set.len(),
        interior_vertices: domain.interior_set.len(),
        raw_residual,
        polished_residual: polished.residual,
        polish_iterations: polished.iterations,
        min_interior,
        frontier_min_dihedral: domain.frontier_min_dihedral(mesh),
    });
    if !(min_interior > 0.0) {
        return Err(CywError::failure(
            Stage::LocalSolve,
            format!("polished local solution is not positive (min {min_interior:.3e})"),
        ));
    }
    Ok(LocalStage { domain, field })
}

/// Gate, `β`-continuation and polish on a ball inside the region where the
/// target is constant, after making the curvature negative at its center.
fn continuation_local(
    mesh: &Mesh,
    background: &GeometrySpec,
    prior: &mut ScalarField,
    target: &CurvatureTarget,
    c: DimensionConstants,
    cfg: &PrescribeConfig,
    report: &mut SolveReport,
) -> Result<(LocalStage, GeometrySpec)> {
    let TargetKind::Admissible { core, level } = &target.kind else {
        return Err(CywError::precondition(
            Stage::Routing,
            "the continuation route needs a target that is constant on a marked region",
        ));
    };
    let region = core_domain(mesh, core)?;
    let (center, depth) = deepest_vertex(mesh, background, &region);
    let mut bg = background.clone();
    let min_r = region.vertex_set.iter().map(|&v| bg.scalar_curvature.values[v]).fold(f64::INFINITY, f64::min);
    if min_r >= 0.0 {
        let ops = assemble(mesh, &bg, c, cfg.bc.mode())?;
        let vertex = cfg.normalization_vertex.unwrap_or(center);
        let norm = negative_scalar_normalization(mesh, &bg, &ops, vertex)?;
        report.normalizations.push(NormalizationSummary::from("negative-scalar", &norm));
        if norm.applied {
            compose(prior, &norm.factor);
            bg = norm.geometry;
        }
    }
    let outer = 0.9 * depth;
    let x0 = mesh.vertex(center).to_vec();
    let member: Vec<bool> = (0..mesh.vertex_count())
        .map(|v| region.member[v] && bg.chart.distance(&x0, mesh.vertex(v)) < outer)
        .collect();
    let ball = Domain::from_mask(mesh, member).map_err(|e| e.at(Stage::LocalSolve))?;
    let problem = LocalProblem::new(mesh, &bg, &ball, c)?;
    let mut gate_opts = GateOptions::new(*level, cfg.beta0, cfg.eps_sweep.clone());
    gate_opts.center = Some(center).filter(|&v| ball.is_interior(v));
    let thresholds = energy_gate(&problem, &gate_opts)?;
    report.gate_sweep = Some(thresholds.sweep_csv());
    report.thresholds = Some(thresholds.clone());
    let trace = beta_continuation(&problem, &ContinuationOptions::new(*level, cfg.beta0, cfg.ratio), &thresholds)?;
    report.continuation = Some(ContinuationSummary {
        betas: trace.betas.clone(),
        cauchy_tail: trace.cauchy_tail(),
        lp_bound: trace.lp_bound,
        converged: trace.converged,
    });
    let raw = trace
        .final_solution()
        .cloned()
        .ok_or_else(|| CywError::failure(Stage::Continuation, "continuation produced no solution"))?;
    let raw_residual = trace.residuals.last().copied().unwrap_or(f64::NAN);
    drop(problem);
    let local = polish_local(mesh, &bg, &target.field, c, ball, raw, "beta-continuation", center, outer, None, raw_residual, report)?;
    Ok((local, bg))
}

#[allow(clippy::too_many_arguments)]
fn global_stage(
    mesh: &Mesh,
    geom: &GeometrySpec,
    background: &GeometrySpec,
    prior: &ScalarField,
    s: &ScalarField,
    local: LocalStage,
    c: DimensionConstants,
    cfg: &PrescribeConfig,
    report: &mut SolveReport,
    mut clock: Instant,
) -> Result<()> {
    let ops = assemble(mesh, background, c, cfg.bc.mode())?;
    let eig = first_lumped_eigenpair(&ops)?;
    report.eig = Some(eig.clone());
    let scaled = scale_eigenfunction(&ops, &eig, s, c)?;
    report.scaled = Some((scaled.theta, scaled.pointwise_margin));
    let u_minus = make_subsolution(mesh, &local.domain, &local.field)?;
    let sub = check_side(&ops, &s.values, &u_minus.values, Side::Sub);
    report.subsolution = Some((sub.strong_extreme, sub.pass));
    if !sub.pass {
        return Err(CywError::failure(
            Stage::Subsolution,
            format!(
                "zero extension violates the sub-solution inequality by {:.3e} (scale {:.3e})",
                sub.strong_extreme, sub.scale
            ),
        ));
    }
    let glue = glue_supersolution(mesh, background, &ops, s, &u_minus, &local.domain, &scaled, &cfg.glue)?;
    let u_plus = glue.field.clone();
    report.glue = Some(glue);
    let ineq = verify_inequalities(&ops, s, &u_minus, &u_plus);
    let pass = ineq.pass();
    report.inequalities = Some(ineq);
    if !pass {
        return Err(CywError::precondition(Stage::Iteration, "sub/super-solution pair fails the inequality check"));
    }
    lap(report, "bracket", &mut clock);
    let state = monotone_iterate(&ops, s, &u_minus, &u_plus, &cfg.iteration)?;
    lap(report, "iteration", &mut clock);
    finish(mesh, geom, background, &ops, prior, s, state, cfg, report, clock)
}

#[allow(clippy::too_many_arguments)]
fn finish(
    mesh: &Mesh,
    geom: &GeometrySpec,
    background: &GeometrySpec,
    ops: &AssembledOperators,
    prior: &ScalarField,
    s: &ScalarField,
    state: IterationState,
    cfg: &PrescribeConfig,
    report: &mut SolveReport,
    mut clock: Instant,
) -> Result<()> {
    report.iteration = Some(IterationSummary::from(&state));
    report.iteration_trace = Some(state.trace_csv());
    let u = state.solution().clone();
    let (verification, changed) = verify(mesh, background, ops, s, &u, prior, cfg)?;
    let accepted = verification.accepted;
    let mut factor = prior.clone();
    compose(&mut factor, &u);
    report.verification = Some(verification);
    report.solution = Some(u);
    report.factor = Some(factor.clone());
    if !accepted {
        return Err(CywError::failure(Stage::Verification, "recomputed curvature misses the target tolerance"));
    }
    if geom.model == Some(Model::RoundSphere) {
        let integrals = obstruction_report(mesh, geom, &changed, s, &factor, ops.constants.p, cfg.obstruction_tolerance)?;
        report.obstructions.integrals = Some(integrals);
    }
    lap(report, "verification", &mut clock);
    Ok(())
}

/// Recomputes the curvature of `u^{p−2}g` and checks it against the target.
pub fn verify(
    mesh: &Mesh,
    background: &GeometrySpec,
    ops: &AssembledOperators,
    s: &ScalarField,
    u: &ScalarField,
    prior: &ScalarField,
    cfg: &PrescribeConfig,
) -> Result<(Verification, GeometrySpec)> {
    let min_u = u.min();
    if !(min_u > 0.0) {
        return Err(CywError::failure(Stage::Verification, format!("factor is not positive (min {min_u:.3e})")));
    }
    let changed = conformal_change(mesh, background, ops, u).map_err(|e| e.at(Stage::Verification))?;
    let s_norm = max_abs(s.values.iter().copied()).max(f64::MIN_POSITIVE);
    let curvature_residual = max_abs(
        (0..mesh.vertex_count())
            .filter(|&v| !mesh.is_boundary(v))
            .map(|v| changed.scalar_curvature.values[v] - s.values[v]),
    ) / s_norm;
    let boundary_residual = ops.is_robin().then(|| {
        let rows = super::inequalities::residual_rows(ops, &s.values, &u.values);
        let a = ops.constants.a;
        max_abs(
            (0..mesh.vertex_count())
                .filter(|&v| mesh.is_boundary(v) && ops.boundary_weights[v] > 0.0)
                .map(|v| rows[v] / (a * ops.boundary_weights[v])),
        )
    });
    let factor_min = prior.values.iter().zip(&u.values).map(|(a, b)| a * b).fold(f64::INFINITY, f64::min);
    let accepted = curvature_residual <= cfg.curvature_tolerance
        && boundary_residual.is_none_or(|b| b <= cfg.boundary_tolerance)
        && factor_min > 0.0;
    Ok((
        Verification {
            curvature_residual,
            boundary_residual,
            min_u,
            max_u: u.max(),
            factor_min,
            accepted,
        },
        changed,
    ))
}
