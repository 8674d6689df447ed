//! Command-line front end: `cyw <subcommand>`.
//!
//! Exit codes: 0 success, 2 config error, 3 obstruction refusal, 4 gate
//! failure, 5 iteration failure, 6 verification failure.

pub mod config;
pub mod expr;
mod run;

pub use config::{named_sphere_function, ConfigFile, RegionSpec, RunConfig, TargetSpec, Tolerances};
pub use expr::{Expr, ParseError};
pub use run::{
    bench, build_target, default_output_dir, execute, exit_code, prescribe_config, run, write_outputs, RunOutcome, BENCH_STAGES,
    EXIT_CONFIG, EXIT_GATE, EXIT_ITERATION, EXIT_OBSTRUCTION, EXIT_OK, EXIT_VERIFICATION, OUTPUT_DIR_ENV,
};

use crate::error::{CywError, Result};
use crate::geometry::{build_preset, io::write_mesh, DimensionConstants, Domain, GeometrySpec, Mesh, PresetId, ScalarField};
use crate::global_iteration::GlobalBc;
use crate::local_yamabe::{beta_continuation, energy_gate, ContinuationOptions, EpsSweep, GateOptions, LocalProblem};
use crate::operators::{assemble, conformal_change, first_eigenpair, first_lumped_eigenpair, yamabe_quotient, BcMode};
use crate::sphere_tools::{check_condition_a, default_pair_tolerance, mesh_samples, obstruction_report, Extension, SphereFunction};
use clap::{Args, Parser, Subcommand, ValueEnum};
use std::ffi::OsString;
use std::path::{Path, PathBuf};

#[derive(Parser, Debug)]
#[command(name = "cyw", version, about = "Prescribed scalar curvature workbench")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Mesh utilities.
    Mesh {
        #[command(subcommand)]
        command: MeshCommand,
    },
    /// First eigenpair of the conformal Laplacian.
    Eigen(EigenArgs),
    /// Energy gate on a local domain.
    Gate(LocalArgs),
    /// Local solves.
    Solve {
        #[command(subcommand)]
        command: SolveCommand,
    },
    /// Full prescription run from a config file.
    Prescribe(PrescribeArgs),
    /// Sphere obstruction checks.
    Check {
        #[command(subcommand)]
        command: CheckCommand,
    },
    /// Timing table over a set of configs.
    Bench(BenchArgs),
}

#[derive(Subcommand, Debug)]
enum MeshCommand {
    /// Writes a preset mesh in the `CYWMESH 1` format.
    Gen(MeshArgs),
}

#[derive(Subcommand, Debug)]
enum SolveCommand {
    /// `β`-continuation of the local Dirichlet problem.
    Local(LocalArgs),
}

#[derive(Subcommand, Debug)]
enum CheckCommand {
    /// Classifies a sphere function against condition A.
    #[command(name = "condition-a")]
    ConditionA(ConditionArgs),
    /// Obstruction integrals for a target and factor on the round sphere.
    Obstructions(ObstructionArgs),
}

#[derive(Args, Debug, Clone)]
struct PresetArgs {
    #[arg(long)]
    preset: String,
    #[arg(long, short = 'r', default_value_t = 1)]
    refinement: u32,
}

#[derive(Args, Debug)]
struct MeshArgs {
    #[command(flatten)]
    preset: PresetArgs,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum BcArg {
    Closed,
    Robin,
}

#[derive(Args, Debug)]
struct EigenArgs {
    #[command(flatten)]
    preset: PresetArgs,
    #[arg(long, value_enum)]
    bc: Option<BcArg>,
    /// Use the lumped mass pencil.
    #[arg(long)]
    lumped: bool,
}

#[derive(Args, Debug)]
struct LocalArgs {
    #[command(flatten)]
    preset: PresetArgs,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    #[arg(long, default_value_t = -0.2, allow_hyphen_values = true)]
    beta: f64,
    #[arg(long, default_value_t = 0.5)]
    ratio: f64,
    /// Ball radius on closed presets (bounded presets use the whole mesh).
    #[arg(long, default_value_t = 0.3)]
    radius: f64,
    /// Comma-separated epsilon list; adaptive sweep when absent.
    #[arg(long, value_delimiter = ',')]
    eps: Option<Vec<f64>>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PrescribeArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    preset: Option<String>,
    #[arg(long, short = 'r')]
    refinement: Option<u32>,
    #[arg(long, value_enum)]
    bc: Option<BcArg>,
    #[arg(long)]
    route: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum ExtensionArg {
    Ambient,
    DegreeZero,
}

#[derive(Args, Debug)]
struct ConditionArgs {
    /// Expression in `x y z w tau`, or one of `one tau tau-squared xi1-squared`.
    #[arg(long)]
    function: String,
    /// Refinement of the round-s3 sample mesh.
    #[arg(long, short = 'r', default_value_t = 1)]
    refinement: u32,
    #[arg(long, value_enum, default_value_t = ExtensionArg::Ambient)]
    extension: ExtensionArg,
    #[arg(long)]
    pair_tolerance: Option<f64>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ObstructionArgs {
    #[arg(long, short = 'r', default_value_t = 1)]
    refinement: u32,
    /// Target `S`.
    #[arg(long)]
    target: String,
    /// Conformal factor `u`.
    #[arg(long, default_value = "1")]
    factor: String,
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[arg(long)]
    config: Vec<PathBuf>,
    /// Adds constant-target runs of this preset over `--refinements`.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long, value_delimiter = ',')]
    refinements: Vec<u32>,
    #[arg(long, default_value_t = 6.0)]
    value: f64,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_expr(src: &str) -> Result<Expr> {
    let src = named_sphere_function(src).unwrap_or(src);
    Expr::parse(src).map_err(|e| CywError::Config { line: 0, message: format!("in expression: {e}") })
}

fn load(p: &PresetArgs) -> Result<(Mesh, GeometrySpec)> {
    let id = PresetId::parse(&p.preset).map_err(|e| CywError::Config { line: 0, message: e.to_string() })?;
    build_preset(id.as_str(), p.refinement)
}

fn out_dir(dir: &Option<PathBuf>) -> PathBuf {
    dir.clone().unwrap_or_else(default_output_dir)
}

fn write_file(dir: &Path, name: &str, body: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    std::fs::write(&path, body)?;
    Ok(path)
}

/// Whole mesh when bounded, a ball around vertex 0 when closed.
fn local_domain(mesh: &Mesh, geom: &GeometrySpec, radius: f64) -> Result<Domain> {
    if !mesh.is_closed() {
        return Domain::whole(mesh);
    }
    let x0 = mesh.vertex(0).to_vec();
    let member = (0..mesh.vertex_count()).map(|v| geom.chart.distance(&x0, mesh.vertex(v)) < radius).collect();
    Domain::from_mask(mesh, member)
}

fn cmd_mesh(a: &MeshArgs) -> Result<i32> {
    let (mesh, _) = load(&a.preset)?;
    let text = write_mesh(&mesh);
    match &a.out {
        Some(p) => std::fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(EXIT_OK)
}

fn cmd_eigen(a: &EigenArgs) -> Result<i32> {
    let (mesh, geom) = load(&a.preset)?;
    let mode = match a.bc {
        Some(BcArg::Robin) => BcMode::Robin,
        Some(BcArg::Closed) => BcMode::Closed,
        None if mesh.is_closed() => BcMode::Closed,
        None => BcMode::Robin,
    };
    let ops = assemble(&mesh, &geom, DimensionConstants::three(), mode)?;
    let e = if a.lumped { first_lumped_eigenpair(&ops)? } else { first_eigenpair(&ops)? };
    println!("vertices {}", mesh.vertex_count());
    println!("eigenvalue {:.17e}", e.eigenvalue);
    println!("residual {:.3e}", e.residual);
    println!("iterations {}", e.iterations);
    println!("one_signed {}", e.one_signed);
    // Over P1 functions only, so an upper bound for the infimum.
    println!("yamabe_quotient_estimate {:.17e}", yamabe_quotient(&ops, &e.eigenfunction)?);
    Ok(EXIT_OK)
}

fn gate_options(a: &LocalArgs) -> GateOptions {
    let sweep = a.eps.clone().map_or_else(EpsSweep::adaptive, EpsSweep::List);
    GateOptions::new(a.lambda, a.beta, sweep)
}

fn cmd_gate(a: &LocalArgs) -> Result<i32> {
    let (mesh, geom) = load(&a.preset)?;
    let domain = local_domain(&mesh, &geom, a.radius)?;
    let problem = LocalProblem::new(&mesh, &geom, &domain, DimensionConstants::three())?;
    let t = energy_gate(&problem, &gate_options(a))?;
    let dir = out_dir(&a.output_dir);
    write_file(&dir, "gate_sweep.csv", &t.sweep_csv())?;
    println!("t_est {:.17e}", t.t_est);
    println!("t_used {:.17e}", t.t_used);
    println!("q_eps {:.17e}", t.q_eps);
    println!("gate_pass {}", t.gate_pass);
    Ok(if t.gate_pass { EXIT_OK } else { EXIT_GATE })
}

fn cmd_solve_local(a: &LocalArgs) -> Result<i32> {
    let (mesh, geom) = load(&a.preset)?;
    let domain = local_domain(&mesh, &geom, a.radius)?;
    let problem = LocalProblem::new(&mesh, &geom, &domain, DimensionConstants::three())?;
    let t = energy_gate(&problem, &gate_options(a))?;
    let trace = beta_continuation(&problem, &ContinuationOptions::new(a.lambda, a.beta, a.ratio), &t)?;
    let dir = out_dir(&a.output_dir);
    write_file(&dir, "gate_sweep.csv", &t.sweep_csv())?;
    write_file(&dir, "continuation.txt", &trace.to_report())?;
    print!("{}", trace.to_report());
    Ok(EXIT_OK)
}

fn cmd_prescribe(a: &PrescribeArgs) -> Result<i32> {
    let text = std::fs::read_to_string(&a.config)?;
    let mut cfg = RunConfig::parse(&text)?;
    if let Some(p) = &a.preset {
        cfg.preset = PresetId::parse(p).map_err(|e| CywError::Config { line: 0, message: e.to_string() })?;
    }
    if let Some(r) = a.refinement {
        cfg.refinement = r;
    }
    if let Some(b) = a.bc {
        cfg.bc = match b {
            BcArg::Closed => GlobalBc::Closed,
            BcArg::Robin => GlobalBc::Robin,
        };
    }
    if let Some(r) = &a.route {
        cfg.route_override = Some(crate::global_iteration::Route::parse(r).map_err(|e| CywError::Config { line: 0, message: e.to_string() })?);
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    let dir = a.output_dir.clone().or_else(|| cfg.output_dir.clone()).unwrap_or_else(default_output_dir);
    let o = run(&cfg, &dir);
    if let Some(r) = &o.report {
        print!("{}", r.to_text(None));
    }
    if let Some(e) = &o.error {
        eprintln!("cyw: {e}");
    }
    Ok(o.exit_code)
}

fn cmd_condition(a: &ConditionArgs) -> Result<i32> {
    let e = parse_expr(&a.function)?;
    let (mesh, geom) = build_preset("round-s3", a.refinement)?;
    let ext = match a.extension {
        ExtensionArg::Ambient => Extension::Ambient,
        ExtensionArg::DegreeZero => Extension::DegreeZero,
    };
    let samples = mesh_samples(&mesh)?;
    let tol = a.pair_tolerance.unwrap_or_else(|| default_pair_tolerance(&mesh, &geom));
    let q = SphereFunction::new(|x| e.eval(x), ext);
    let v = check_condition_a(&q, &samples, tol)?;
    let dir = out_dir(&a.output_dir);
    write_file(&dir, "witness.csv", &v.witness_csv())?;
    println!("verdict {}", v.verdict.as_str());
    println!("pairs_checked {}", v.pairs_checked);
    println!("witnesses {}", v.witnesses.len());
    for n in &v.notes {
        println!("note {n}");
    }
    Ok(if v.verdict.passed() { EXIT_OK } else { EXIT_OBSTRUCTION })
}

fn cmd_obstructions(a: &ObstructionArgs) -> Result<i32> {
    let s_expr = parse_expr(&a.target)?;
    let u_expr = parse_expr(&a.factor)?;
    let (mesh, geom) = build_preset("round-s3", a.refinement)?;
    let c = DimensionConstants::three();
    let s = ScalarField::from_fn(&mesh, |x| s_expr.eval(x));
    let u = ScalarField::from_fn(&mesh, |x| u_expr.eval(x));
    let ops = assemble(&mesh, &geom, c, BcMode::Closed)?;
    let deformed = conformal_change(&mesh, &geom, &ops, &u)?;
    let r = obstruction_report(&mesh, &geom, &deformed, &s, &u, c.p, 1e-3)?;
    let dir = out_dir(&a.output_dir);
    write_file(&dir, "obstructions.csv", &r.csv())?;
    print!("{}", r.csv());
    println!("kw_scale {:.17e}", r.kw_scale);
    println!("be_scale {:.17e}", r.be_scale);
    Ok(EXIT_OK)
}

fn cmd_bench(a: &BenchArgs) -> Result<i32> {
    let mut configs = Vec::new();
    for path in &a.config {
        let text = std::fs::read_to_string(path)?;
        configs.push((path.display().to_string(), RunConfig::parse(&text)?));
    }
    if let Some(p) = &a.preset {
        for &r in &a.refinements {
            let text = format!("preset = {p}\nrefinement = {r}\n[target]\nkind = constant\nvalue = {}\n", a.value);
            configs.push((format!("{p}-r{r}"), RunConfig::parse(&text)?));
        }
    }
    let table = bench(&configs);
    match &a.out {
        Some(p) => std::fs::write(p, &table)?,
        None => print!("{table}"),
    }
    Ok(EXIT_OK)
}

fn dispatch(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Mesh { command: MeshCommand::Gen(a) } => cmd_mesh(&a),
        Command::Eigen(a) => cmd_eigen(&a),
        Command::Gate(a) => cmd_gate(&a),
        Command::Solve { command: SolveCommand::Local(a) } => cmd_solve_local(&a),
        Command::Prescribe(a) => cmd_prescribe(&a),
        Command::Check { command: CheckCommand::ConditionA(a) } => cmd_condition(&a),
        Command::Check { command: CheckCommand::Obstructions(a) } => cmd_obstructions(&a),
        Command::Bench(a) => cmd_bench(&a),
    }
}

/// Parses `args` (program name first) and runs; returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("cyw: {e}");
            exit_code(&e)
        }
    }
}
