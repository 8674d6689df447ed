//! Acceptance suite. Each test prints one `PASS`/`FAIL` line for its
//! criterion and then asserts it. Tolerances are pinned below.

use cyw_core::geometry::{build_preset, construct_admissible_function, extract_subdomain, DimensionConstants, Domain, GeometrySpec, Mesh, ScalarField};
use cyw_core::global_iteration::{
    check_side, glue_supersolution, local_stage, make_subsolution, prescribe, scale_eigenfunction, CurvatureTarget, GlobalBc,
    GlueBranch, PrescribeConfig, Side, SolveReport, TargetKind,
};
use cyw_core::local_yamabe::{
    beta_continuation, deepest_vertex, energy_gate, local_residual, solve_perturbed, test_function, ContinuationOptions, EpsSweep,
    GateCheck, GateOptions, LocalProblem, TestFunctionParams,
};
use cyw_core::operators::{
    apply_conformal_laplacian, assemble, conformal_change, first_eigenpair, first_laplacian_eigenpair, first_lumped_eigenpair,
    li_yau_bound, BcMode, LiYauInputs,
};
use cyw_core::sphere_tools::{check_condition_a, mesh_samples, Extension, SphereFunction, SpherePoint, Verdict};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use std::sync::OnceLock;

const EIGEN_REL_TOL: f64 = 0.05;
const EIGENFUNCTION_DEVIATION: f64 = 0.02;
/// Relative eigenvalue errors below this are rounding noise: constants are
/// exact discrete eigenfunctions on the round sphere, so `η₁ = 6` holds to
/// machine precision at every refinement.
const EIGEN_ROUNDING_FLOOR: f64 = 1e-10;
const TRIVIAL_U_TOL: f64 = 1e-8;
const TRIVIAL_RESIDUAL_TOL: f64 = 1e-10;
const COVARIANCE_MIN_ORDER: f64 = 1.0;
const PAIRING_TOL: f64 = 1e-8;
const HOMOGENEITY_TOL: f64 = 1e-8;
const GATE_SAFETY: f64 = 0.99;
const CAUCHY_TAIL_TOL: f64 = 1e-8;
const LP_MONITOR_FACTOR: f64 = 10.0;
const MONOTONE_SLACK: f64 = 1e-12;
const CURVATURE_TOL: f64 = 1e-4;
const SUPER_STRONG_TOL: f64 = 1e-10;
const KW_TOL: f64 = 1e-12;
const BE_REL_TOL: f64 = 1e-3;
const ROBIN_BOUNDARY_TOL: f64 = 1e-6;

fn c3() -> DimensionConstants {
    DimensionConstants::three()
}

/// Writes to the raw stderr handle, which the test harness does not capture,
/// so every verdict shows up in a plain `cargo test` run.
fn record(id: u32, name: &str, pass: bool, detail: &str) {
    use std::io::Write;
    let line = format!("criterion {id:02} {name}: {} ({detail})\n", if pass { "PASS" } else { "FAIL" });
    let _ = std::io::stderr().lock().write_all(line.as_bytes());
}

fn sci(values: &[f64]) -> String {
    let parts: Vec<String> = values.iter().map(|v| format!("{v:.3e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

fn trivial_sphere_report() -> &'static SolveReport {
    static CELL: OnceLock<SolveReport> = OnceLock::new();
    CELL.get_or_init(|| {
        let (mesh, geom) = build_preset("round-s3", 2).unwrap();
        let target = CurvatureTarget::constant(&mesh, 6.0);
        match prescribe(&mesh, &geom, &target, &PrescribeConfig::default()) {
            Ok(r) => r,
            Err(f) => f.report,
        }
    })
}

/// The bump torus with `S` built from `1 + 0.5 sin 2πx` to be the constant 1
/// on the marked region.
fn bump_setup() -> (Mesh, GeometrySpec, CurvatureTarget) {
    let (mesh, geom) = build_preset("bump-t3", 3).unwrap();
    let region = Domain::from_mask(&mesh, geom.marked_region.clone().unwrap()).unwrap();
    let base = ScalarField::from_fn(&mesh, |x| 1.0 + 0.5 * (2.0 * PI * x[0]).sin());
    let width = 2.01 * mesh.min_edge_length();
    let adm = construct_admissible_function(&mesh, &geom, &base, &region, 1.0, width).unwrap();
    let target = CurvatureTarget {
        field: adm.field,
        kind: TargetKind::Admissible { core: adm.core, level: 1.0 },
        ambient: None,
    };
    (mesh, geom, target)
}

fn bump_config() -> PrescribeConfig {
    PrescribeConfig { seed: 7, ..PrescribeConfig::default() }
}

/// `(report, error message)` of one full run on the bump torus.
fn bump_run() -> (SolveReport, Option<String>) {
    let (mesh, geom, target) = bump_setup();
    match prescribe(&mesh, &geom, &target, &bump_config()) {
        Ok(r) => (r, None),
        Err(f) => (f.report, Some(f.error.to_string())),
    }
}

fn cached_bump_run() -> &'static (SolveReport, Option<String>) {
    static CELL: OnceLock<(SolveReport, Option<String>)> = OnceLock::new();
    CELL.get_or_init(bump_run)
}

#[test]
fn criterion_01_round_sphere_spectrum() {
    let mut errors = Vec::new();
    let mut pass = true;
    let mut detail = String::new();
    for r in 1..=3 {
        let (mesh, geom) = build_preset("round-s3", r).unwrap();
        let ops = assemble(&mesh, &geom, c3(), BcMode::Closed).unwrap();
        let eig = first_eigenpair(&ops).unwrap();
        let err = (eig.eigenvalue - 6.0).abs() / 6.0;
        let phi = &eig.eigenfunction.values;
        let mean = phi.iter().sum::<f64>() / phi.len() as f64;
        let dev = phi.iter().fold(0.0f64, |m, x| m.max((x - mean).abs())) / mean.abs();
        pass &= err <= EIGEN_REL_TOL && dev <= EIGENFUNCTION_DEVIATION;
        detail += &format!("r{r}: eta {:.6} rel err {err:.3e} dev {dev:.3e}; ", eig.eigenvalue);
        errors.push(err);
    }
    let monotone = errors.windows(2).all(|w| w[1] < w[0] || w[1].max(w[0]) <= EIGEN_ROUNDING_FLOOR);
    pass &= monotone;
    record(1, "round-sphere-spectrum", pass, &format!("{detail}error decreasing: {monotone}"));
    assert!(pass);
}

#[test]
fn criterion_02_trivial_prescription() {
    let report = trivial_sphere_report();
    let (dev, res) = match (&report.solution, &report.verification) {
        (Some(u), Some(v)) => (u.values.iter().fold(0.0f64, |m, x| m.max((x - 1.0).abs())), v.curvature_residual),
        _ => (f64::INFINITY, f64::INFINITY),
    };
    let pass = report.accepted() && dev <= TRIVIAL_U_TOL && res <= TRIVIAL_RESIDUAL_TOL;
    record(2, "trivial-prescription", pass, &format!("|u - 1|max {dev:.3e}, residual {res:.3e}"));
    assert!(pass);
}

/// Lumped-mass RMS of `□_{g̃}f − u^{1−p}□_g(uf)` with `g̃ = u^{p−2}g`.
fn covariance_residual(refinement: u32) -> f64 {
    let (mesh, geom) = build_preset("flat-t3", refinement).unwrap();
    let p = c3().p;
    let ops = assemble(&mesh, &geom, c3(), BcMode::Closed).unwrap();
    let u = ScalarField::from_fn(&mesh, |x| 1.0 + 0.3 * (2.0 * PI * x[0]).sin() * (2.0 * PI * x[1]).cos());
    let f = ScalarField::from_fn(&mesh, |x| (2.0 * PI * x[2]).cos() + 0.5 * (2.0 * PI * x[0]).sin());
    let changed = conformal_change(&mesh, &geom, &ops, &u).unwrap();
    let ops_changed = assemble(&mesh, &changed, c3(), BcMode::Closed).unwrap();
    let lhs = apply_conformal_laplacian(&ops_changed, &f).unwrap();
    let uf = ScalarField::new(&mesh, u.values.iter().zip(&f.values).map(|(a, b)| a * b).collect()).unwrap();
    let rhs = apply_conformal_laplacian(&ops, &uf).unwrap();
    let (mut num, mut vol) = (0.0, 0.0);
    for v in 0..mesh.vertex_count() {
        let d = lhs.values[v] - u.values[v].powf(1.0 - p) * rhs.values[v];
        num += ops.lumped_mass[v] * d * d;
        vol += ops.lumped_mass[v];
    }
    (num / vol).sqrt()
}

#[test]
fn criterion_03_conformal_covariance() {
    let errs: Vec<f64> = (1..=3).map(covariance_residual).collect();
    // Each refinement halves the mesh size.
    let orders: Vec<f64> = errs.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    let pass = orders.iter().all(|&o| o >= COVARIANCE_MIN_ORDER);
    record(3, "conformal-covariance", pass, &format!("residuals {}, observed orders {orders:.3?}", sci(&errs)));
    assert!(pass);
}

fn ball_problem<'a>(mesh: &'a Mesh, geom: &'a GeometrySpec) -> LocalProblem<'a> {
    LocalProblem::new(mesh, geom, &Domain::whole(mesh).unwrap(), c3()).unwrap()
}

#[test]
fn criterion_04_local_energy_identity() {
    let (mesh, geom) = build_preset("ball-negR", 1).unwrap();
    let problem = ball_problem(&mesh, &geom);
    let (beta, lambda) = (-0.1, 1.0);
    let (center, radius) = deepest_vertex(problem.mesh, problem.geom, &problem.domain);
    let params = TestFunctionParams::new(0.05, beta, center, radius, 3).unwrap();
    let init = test_function(problem.mesh, &problem.domain, problem.geom, c3(), &params).unwrap();
    let p = c3().p;

    let mut defects = Vec::new();
    let mut sols = Vec::new();
    for lam in [lambda, 4.0 * lambda] {
        let sol = solve_perturbed(&problem, lam, beta, &init, GateCheck::Override).unwrap();
        // Pairing checked independently of the solver's own report.
        let x = problem.ops.gather(&sol.field.values);
        let lhs = problem.operator(beta).quadratic_form(&x);
        let rhs: f64 = lam * problem.lumped_mass().iter().zip(&x).map(|(m, u)| m * u.powf(p)).sum::<f64>();
        defects.push(((lhs - rhs) / rhs).abs().max(sol.pairing_defect));
        sols.push(sol);
    }
    let c = 0.25f64.powf(1.0 / (p - 2.0));
    let scaled: Vec<f64> = sols[0].field.values.iter().map(|u| c * u).collect();
    let scaled_field = ScalarField::new(problem.mesh, scaled.clone()).unwrap();
    let scaled_residual = local_residual(&problem, 4.0 * lambda, beta, &scaled_field).unwrap();
    let umax = sols[1].field.max();
    let law = max_abs_diff(&scaled, &sols[1].field.values) / umax;
    let pass = defects.iter().all(|&d| d <= PAIRING_TOL) && scaled_residual <= HOMOGENEITY_TOL && law <= HOMOGENEITY_TOL;
    record(
        4,
        "local-energy-identity",
        pass,
        &format!("pairing defects {}, scaled-pair residual {scaled_residual:.3e}, scaling law gap {law:.3e}", sci(&defects)),
    );
    assert!(pass);
}

#[test]
fn criterion_05_gate_behavior() {
    let (mesh, geom) = build_preset("ball-negR", 2).unwrap();
    let problem = ball_problem(&mesh, &geom);
    let gate = energy_gate(&problem, &GateOptions::new(1.0, -0.1, EpsSweep::adaptive())).unwrap();
    let below = gate.q_smallest_eps < GATE_SAFETY * gate.t_est;

    let eps: Vec<f64> = gate.sweep.iter().map(|s| s.epsilon).collect();
    let betas = [0.0, -0.05, -0.1, -0.2, -0.4];
    let sweeps: Vec<Vec<f64>> = betas
        .iter()
        .map(|&b| {
            let g = energy_gate(&problem, &GateOptions::new(1.0, b, EpsSweep::List(eps.clone()))).unwrap();
            g.sweep.iter().map(|s| s.quotient).collect()
        })
        .collect();
    let monotone = sweeps.windows(2).all(|w| w[0].iter().zip(&w[1]).all(|(a, b)| b <= a));
    let pass = below && monotone;
    record(
        5,
        "gate-behavior",
        pass,
        &format!(
            "Q at smallest eps {:.6} vs {GATE_SAFETY}*T_est {:.6}, {} eps values, nonincreasing in |beta|: {monotone}",
            gate.q_smallest_eps,
            GATE_SAFETY * gate.t_est,
            eps.len()
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_06_continuation_stability() {
    let (mesh, geom) = build_preset("ball-negR", 1).unwrap();
    let problem = ball_problem(&mesh, &geom);
    let gate = energy_gate(&problem, &GateOptions::new(1.0, -0.2, EpsSweep::adaptive())).unwrap();
    let trace = beta_continuation(&problem, &ContinuationOptions::new(1.0, -0.2, 0.5), &gate).unwrap();
    let tail = trace.cauchy_tail();
    let positive = trace.solutions.iter().all(|u| problem.interior_min(u) > 0.0);
    let increasing = trace.betas.windows(2).all(|w| w[0] < w[1]) && trace.betas.iter().all(|&b| b < 0.0);
    let lp_max = trace.lp_norms.iter().fold(0.0f64, |m, &x| m.max(x));
    let bounded = lp_max <= LP_MONITOR_FACTOR * trace.lp_bound;
    let pass = trace.converged && tail <= CAUCHY_TAIL_TOL && positive && increasing && bounded;
    record(
        6,
        "continuation-stability",
        pass,
        &format!(
            "{} steps, tail {tail:.3e}, positive {positive}, max lp {lp_max:.4e} vs bound {:.4e}",
            trace.betas.len(),
            trace.lp_bound
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_07_bracket_and_monotonicity() {
    let (report, error) = cached_bump_run();
    let detail;
    let pass = match (&report.iteration, &report.verification) {
        (Some(it), Some(v)) => {
            let ok = it.bracket_violations == 0 && it.worst_decrease <= MONOTONE_SLACK && v.min_u > 0.0 && v.curvature_residual <= CURVATURE_TOL;
            detail = format!(
                "violations {}, worst decrease {:.3e}, min u {:.4e}, curvature residual {:.3e}",
                it.bracket_violations, it.worst_decrease, v.min_u, v.curvature_residual
            );
            ok && report.accepted()
        }
        _ => {
            let rayleigh = report.glue.as_ref().map(|g| g.linearized_rayleigh);
            detail = format!(
                "pipeline stopped before iteration: {}; sub-solution check {:?}",
                error.as_deref().unwrap_or("unknown"),
                report.subsolution.map(|(e, ok)| format!("{e:.3e} pass {ok}")).or(rayleigh.map(|r| format!("rayleigh {r:.3e}")))
            );
            false
        }
    };
    record(7, "bracket-and-monotonicity", pass, &detail);
    assert!(pass);
}

#[test]
fn criterion_08_supersolution_soundness() {
    let (mesh, geom, target) = bump_setup();
    let cfg = bump_config();
    let s = &target.field;
    let (local, background) = local_stage(&mesh, &geom, &target, &cfg).unwrap();
    let ops = assemble(&mesh, &background, c3(), BcMode::Closed).unwrap();
    let eig = first_lumped_eigenpair(&ops).unwrap();
    let scaled = scale_eigenfunction(&ops, &eig, s, c3()).unwrap();
    let mut accepted = 0;
    let mut sound = true;
    let mut detail = String::new();
    // The local solution itself, then damped copies of it.
    for factor in [1.0, 0.1, 1e-2, 1e-3] {
        let damped = ScalarField::new(&mesh, local.field.values.iter().map(|x| factor * x).collect()).unwrap();
        let u_minus = make_subsolution(&mesh, &local.domain, &damped).unwrap();
        match glue_supersolution(&mesh, &background, &ops, s, &u_minus, &local.domain, &scaled, &cfg.glue) {
            Ok(g) => {
                accepted += 1;
                let side = check_side(&ops, &s.values, &g.field.values, Side::Super);
                let dominance = g.field.values.iter().zip(&u_minus.values).fold(f64::INFINITY, |m, (a, b)| m.min(a - b));
                let ok = side.strong_extreme >= -SUPER_STRONG_TOL && dominance >= 0.0;
                sound &= ok;
                let branch = if g.branch == GlueBranch::Eigenfunction { "eigenfunction" } else { "blended" };
                detail += &format!("x{factor:e}: accepted ({branch}) strong min {:.3e} dominance {dominance:.3e}; ", side.strong_extreme);
            }
            Err(e) => detail += &format!("x{factor:e}: rejected ({e}); "),
        }
    }
    let pass = accepted > 0 && sound;
    record(8, "supersolution-soundness", pass, &format!("{detail}{accepted} accepted"));
    assert!(pass);
}

#[test]
fn criterion_09_li_yau() {
    let (mesh, geom) = build_preset("round-s3", 3).unwrap();
    let x0 = mesh.vertex(0).to_vec();
    let mut lambdas = Vec::new();
    let mut bounds = Vec::new();
    for r in [0.8, 0.4, 0.2] {
        let domain = extract_subdomain(&mesh, |x| geom.chart.distance(&x0, x) < r).unwrap();
        let ops = assemble(&mesh, &geom, c3(), BcMode::Dirichlet(domain)).unwrap();
        lambdas.push(first_laplacian_eigenpair(&ops).unwrap().eigenvalue);
        // Ric = 2g ≥ 0 and geodesic spheres have mean curvature cot r > 0.
        bounds.push(
            li_yau_bound(&LiYauInputs {
                r_inj: r,
                ricci_lower: 0.0,
                h_min: 1.0 / r.tan(),
                n: 3,
            })
            .unwrap(),
        );
    }
    let margins: Vec<f64> = lambdas.iter().zip(&bounds).map(|(l, b)| l - b).collect();
    let increasing = bounds.windows(2).all(|w| w[1] > w[0]);
    let pass = margins.iter().all(|&m| m > 0.0) && increasing;
    record(9, "li-yau", pass, &format!("lambda1 {lambdas:.4?}, bounds {bounds:.4?}, bound increasing: {increasing}"));
    assert!(pass);
}

fn rotation(rng: &mut ChaCha8Rng) -> [[f64; 4]; 4] {
    let mut q = [[0.0; 4]; 4];
    for i in 0..4 {
        let mut v: [f64; 4] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
        for row in q.iter().take(i) {
            let d: f64 = (0..4).map(|k| v[k] * row[k]).sum();
            for k in 0..4 {
                v[k] -= d * row[k];
            }
        }
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        q[i] = v.map(|x| x / n);
    }
    q
}

#[test]
fn criterion_10_condition_a_classifier() {
    let (mesh, geom) = build_preset("round-s3", 1).unwrap();
    let samples = mesh_samples(&mesh).unwrap();
    let tol = 0.5 * mesh.edges().iter().map(|&(a, b)| geom.chart.distance(mesh.vertex(a), mesh.vertex(b))).fold(f64::INFINITY, f64::min);
    let q = rotation(&mut ChaCha8Rng::seed_from_u64(11));
    let rotated: Vec<SpherePoint> = samples
        .iter()
        .map(|s| {
            let x = s.ambient();
            SpherePoint::normalized(&(0..4).map(|i| (0..4).map(|k| q[i][k] * x[k]).sum()).collect::<Vec<f64>>()).unwrap()
        })
        .collect();
    let cases: [(&str, fn(&[f64]) -> f64, Verdict); 3] =
        [("1", |_| 1.0, Verdict::PassIII), ("tau^2", |x| x[3] * x[3], Verdict::PassI), ("tau", |x| x[3], Verdict::Fail)];
    let mut pass = true;
    let mut detail = String::new();
    for (name, f, expected) in cases {
        let func = SphereFunction::new(f, Extension::Ambient);
        let plain = check_condition_a(&func, &samples, tol).unwrap();
        let turned = check_condition_a(&func, &rotated, tol).unwrap();
        let witnesses_ok = expected != Verdict::Fail || (!plain.witnesses.is_empty() && !turned.witnesses.is_empty());
        let ok = plain.verdict == expected && turned.verdict == expected && witnesses_ok;
        pass &= ok;
        detail += &format!(
            "{name}: {} / rotated {} ({} witnesses); ",
            plain.verdict.as_str(),
            turned.verdict.as_str(),
            plain.witnesses.len()
        );
    }
    record(10, "condition-a-classifier", pass, detail.trim_end_matches("; "));
    assert!(pass);
}

#[test]
fn criterion_11_obstruction_vanishing() {
    let report = trivial_sphere_report();
    let (kw, be, scale) = match &report.obstructions.integrals {
        Some(o) => (o.kw_max(), o.be_max(), o.be_scale),
        None => (f64::INFINITY, f64::INFINITY, 0.0),
    };
    let pass = report.accepted() && kw <= KW_TOL && be <= BE_REL_TOL * scale;
    record(11, "obstruction-vanishing", pass, &format!("max |kw| {kw:.3e}, max |be| {be:.3e} vs {BE_REL_TOL}*{scale:.3e}"));
    assert!(pass);
}

#[test]
fn criterion_12_robin_path() {
    let (mesh, geom) = build_preset("annulus", 1).unwrap();
    let target = CurvatureTarget::constant(&mesh, 1.0);
    let cfg = PrescribeConfig { bc: GlobalBc::Robin, ..PrescribeConfig::default() };
    let (report, error) = match prescribe(&mesh, &geom, &target, &cfg) {
        Ok(r) => (r, None),
        Err(f) => (f.report, Some(f.error.to_string())),
    };
    let engaged = report.normalizations.iter().any(|n| n.kind == "positive-mean-curvature");
    let (boundary, interior) = report
        .verification
        .as_ref()
        .map_or((f64::INFINITY, f64::INFINITY), |v| (v.boundary_residual.unwrap_or(f64::INFINITY), v.curvature_residual));
    let pass = error.is_none() && engaged && boundary <= ROBIN_BOUNDARY_TOL && interior <= CURVATURE_TOL;
    record(
        12,
        "robin-path",
        pass,
        &format!("normalization engaged {engaged}, boundary residual {boundary:.3e}, interior residual {interior:.3e}{}", error.map(|e| format!(", error: {e}")).unwrap_or_default()),
    );
    assert!(pass);
}

#[test]
fn criterion_13_determinism() {
    let (first, _) = cached_bump_run();
    let (second, _) = bump_run();
    let (a, b) = (first.to_text(None), second.to_text(None));
    let pass = a == b && first.seed == second.seed;
    record(13, "determinism", pass, &format!("{} report bytes, identical: {}", a.len(), a == b));
    assert!(pass);
}
