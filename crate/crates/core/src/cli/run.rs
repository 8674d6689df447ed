//! Configuration-driven runs and report emission.

use super::config::{RegionSpec, RunConfig, TargetSpec};
use crate::error::{CywError, Result, Stage};
use crate::geometry::{build_preset, construct_admissible_function, Domain, GeometrySpec, Mesh, ScalarField};
use crate::global_iteration::{prescribe, CurvatureTarget, PrescribeConfig, SolveReport, TargetKind};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_OBSTRUCTION: i32 = 3;
pub const EXIT_GATE: i32 = 4;
pub const EXIT_ITERATION: i32 = 5;
pub const EXIT_VERIFICATION: i32 = 6;

/// Environment variable naming the default output directory.
pub const OUTPUT_DIR_ENV: &str = "CYW_OUTPUT_DIR";

pub fn exit_code(err: &CywError) -> i32 {
    match err {
        CywError::Config { .. } | CywError::Io(_) | CywError::InvalidInput { .. } => EXIT_CONFIG,
        CywError::Obstruction { .. } => EXIT_OBSTRUCTION,
        CywError::Precondition { stage: Stage::Gate | Stage::Continuation, .. } => EXIT_GATE,
        e => match e.stage() {
            Stage::Gate => EXIT_GATE,
            Stage::Verification => EXIT_VERIFICATION,
            Stage::Config | Stage::Routing => EXIT_CONFIG,
            Stage::Obstruction => EXIT_OBSTRUCTION,
            _ => EXIT_ITERATION,
        },
    }
}

pub fn default_output_dir() -> PathBuf {
    std::env::var_os(OUTPUT_DIR_ENV).map_or_else(|| PathBuf::from("cyw-out"), PathBuf::from)
}

pub(crate) fn min_chart_edge(mesh: &Mesh, geom: &GeometrySpec) -> f64 {
    mesh.edges()
        .iter()
        .map(|&(a, b)| geom.chart.distance(mesh.vertex(a), mesh.vertex(b)))
        .fold(f64::INFINITY, f64::min)
}

/// Samples the configured target on the mesh.
pub fn build_target(mesh: &Mesh, geom: &GeometrySpec, spec: &TargetSpec) -> Result<CurvatureTarget> {
    match spec {
        TargetSpec::Constant(v) => Ok(CurvatureTarget::constant(mesh, *v)),
        TargetSpec::Expression(e) => {
            let field = ScalarField::from_fn(mesh, |x| e.eval(x));
            let e = e.clone();
            Ok(CurvatureTarget::general(field, Some(Arc::new(move |x| e.eval(x)))))
        }
        TargetSpec::Admissible { base, region, level, width } => {
            let member: Vec<bool> = match region {
                RegionSpec::Marked => geom
                    .marked_region
                    .clone()
                    .ok_or_else(|| CywError::Config { line: 0, message: format!("preset {} has no marked region", geom.preset_id) })?,
                RegionSpec::Negative(e) => (0..mesh.vertex_count()).map(|v| e.eval(mesh.vertex(v)) < 0.0).collect(),
            };
            let region = Domain::from_mask(mesh, member)?;
            let base = ScalarField::from_fn(mesh, |x| base.eval(x));
            let width = width.unwrap_or(2.01 * min_chart_edge(mesh, geom));
            let adm = construct_admissible_function(mesh, geom, &base, &region, *level, width)?;
            Ok(CurvatureTarget {
                field: adm.field,
                kind: TargetKind::Admissible { core: adm.core, level: *level },
                ambient: None,
            })
        }
    }
}

pub fn prescribe_config(cfg: &RunConfig) -> PrescribeConfig {
    let mut p = PrescribeConfig {
        bc: cfg.bc,
        route_override: cfg.route_override,
        seed: cfg.seed,
        local_radius: cfg.local_radius,
        normalization_vertex: cfg.normalization_vertex,
        condition_extension: cfg.extension,
        pair_tolerance: cfg.tolerances.pair,
        ..PrescribeConfig::default()
    };
    if let Some(b) = cfg.beta0 {
        p.beta0 = b;
    }
    if let Some(r) = cfg.ratio {
        p.ratio = r;
    }
    if let Some(r) = cfg.puncture {
        p.puncture_radius = r;
    }
    if let Some(t) = cfg.tolerances.curvature {
        p.curvature_tolerance = t;
    }
    if let Some(t) = cfg.tolerances.boundary {
        p.boundary_tolerance = t;
    }
    if let Some(t) = cfg.tolerances.obstruction {
        p.obstruction_tolerance = t;
    }
    if let Some(t) = cfg.tolerances.step {
        p.iteration.step_tolerance = t;
    }
    if let Some(n) = cfg.max_steps {
        p.iteration.max_steps = n;
    }
    p.iteration.shift = cfg.shift;
    p.glue.gamma = cfg.gamma;
    p.glue.mollifier_width = cfg.mollifier_width;
    p.glue.transition_eps = cfg.transition_eps;
    p.glue.max_rounds = cfg.max_rounds.unwrap_or(0);
    p
}

/// Result of one configured run.
#[derive(Debug)]
pub struct RunOutcome {
    pub exit_code: i32,
    pub report: Option<SolveReport>,
    pub error: Option<String>,
    pub files: Vec<PathBuf>,
    pub mesh_seconds: f64,
}

/// Builds the preset, runs the pipeline and returns the report without
/// touching the file system.
pub fn execute(cfg: &RunConfig) -> RunOutcome {
    let clock = Instant::now();
    let built = build_preset(cfg.preset.as_str(), cfg.refinement).and_then(|(m, g)| build_target(&m, &g, &cfg.target).map(|t| (m, g, t)));
    let mesh_seconds = clock.elapsed().as_secs_f64();
    let (mesh, geom, target) = match built {
        Ok(x) => x,
        Err(e) => {
            return RunOutcome {
                exit_code: exit_code(&e),
                report: None,
                error: Some(e.to_string()),
                files: Vec::new(),
                mesh_seconds,
            }
        }
    };
    let (exit_code, report, error) = match prescribe(&mesh, &geom, &target, &prescribe_config(cfg)) {
        Ok(r) => (EXIT_OK, r, None),
        Err(f) => (exit_code(&f.error), f.report, Some(f.error.to_string())),
    };
    RunOutcome {
        exit_code,
        report: Some(report),
        error,
        files: Vec::new(),
        mesh_seconds,
    }
}

fn timestamp() -> String {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()).to_string()
}

fn solution_csv(report: &SolveReport) -> Option<String> {
    let (u, f) = (report.solution.as_ref()?, report.factor.as_ref()?);
    let mut s = String::from("vertex,u,factor\n");
    for (v, (a, b)) in u.values.iter().zip(&f.values).enumerate() {
        let _ = writeln!(s, "{v},{a:.17e},{b:.17e}");
    }
    Some(s)
}

/// Writes the report (with a timestamp line) and every available CSV.
pub fn write_outputs(report: &SolveReport, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut files = Vec::new();
    let mut put = |name: &str, body: &str| -> Result<()> {
        let path = dir.join(name);
        std::fs::write(&path, body)?;
        files.push(path);
        Ok(())
    };
    put("report.txt", &report.to_text(Some(&timestamp())))?;
    if let Some(t) = &report.iteration_trace {
        put("iteration_trace.csv", t)?;
    }
    if let Some(t) = &report.gate_sweep {
        put("gate_sweep.csv", t)?;
    }
    if let Some(t) = &report.witness_csv {
        put("witness.csv", t)?;
    }
    if let Some(r) = &report.obstructions.integrals {
        put("obstructions.csv", &r.csv())?;
    }
    if let Some(t) = solution_csv(report) {
        put("solution.csv", &t)?;
    }
    Ok(files)
}

/// The `run` operation: execute and write outputs to `dir`.
pub fn run(cfg: &RunConfig, dir: &Path) -> RunOutcome {
    let mut outcome = execute(cfg);
    if let Some(report) = &outcome.report {
        match write_outputs(report, dir) {
            Ok(files) => outcome.files = files,
            Err(e) => {
                outcome.error = Some(e.to_string());
                outcome.exit_code = EXIT_CONFIG;
            }
        }
    }
    outcome
}

pub const BENCH_STAGES: [&str; 6] = ["normalization", "local", "bracket", "iteration", "verification", "total"];

/// Runs every named config in order and returns the timing table as CSV.
/// A failed member marks its row and the sweep continues.
pub fn bench(configs: &[(String, RunConfig)]) -> String {
    let mut out = String::from("name,preset,refinement,vertices,exit_code,route,mesh_s");
    for s in BENCH_STAGES {
        let _ = write!(out, ",{s}_s");
    }
    out.push('\n');
    for (name, cfg) in configs {
        let clock = Instant::now();
        let o = execute(cfg);
        let total = clock.elapsed().as_secs_f64();
        let (vertices, route) = o.report.as_ref().map_or((0, "none"), |r| (r.vertices, r.route.map_or("none", |x| x.as_str())));
        let _ = write!(
            out,
            "{name},{},{},{vertices},{},{route},{:.6}",
            cfg.preset.as_str(),
            cfg.refinement,
            o.exit_code,
            o.mesh_seconds
        );
        for s in &BENCH_STAGES[..5] {
            let t: f64 = o.report.as_ref().map_or(0.0, |r| r.timings.iter().filter(|(n, _)| n == s).map(|(_, t)| t).sum());
            let _ = write!(out, ",{t:.6}");
        }
        let _ = writeln!(out, ",{total:.6}");
    }
    out
}
