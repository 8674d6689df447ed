//! Property tests of the module invariants.

use cyw_core::cli::{Expr, RunConfig};
use cyw_core::geometry::{build_preset, io, DimensionConstants, GeometrySpec, Mesh, ScalarField};
use cyw_core::global_iteration::{
    check_side, monotone_iterate, negative_scalar_normalization, positive_mean_curvature_normalization, prescribe, CurvatureTarget,
    IterationOptions, PrescribeConfig, Side,
};
use cyw_core::operators::{
    apply_conformal_laplacian, assemble, conformal_change, first_eigenpair, li_yau_bound, yamabe_quotient,
    AssembledOperators, BcMode, LiYauInputs,
};
use cyw_core::sphere_tools::{
    check_condition_a, conformal_factor_phi, kw_obstruction, mesh_samples, pullback_metric, stereo_forward, stereo_inverse, Extension,
    Pole, SphereFunction, SpherePoint,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::OnceLock;

fn c3() -> DimensionConstants {
    DimensionConstants::three()
}

struct Fixture {
    mesh: Mesh,
    geom: GeometrySpec,
    ops: AssembledOperators,
}

fn fixture(preset: &str, r: u32, bc: BcMode) -> Fixture {
    let (mesh, geom) = build_preset(preset, r).unwrap();
    let ops = assemble(&mesh, &geom, c3(), bc).unwrap();
    Fixture { mesh, geom, ops }
}

fn sphere0() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| fixture("round-s3", 0, BcMode::Closed))
}

fn sphere1() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| fixture("round-s3", 1, BcMode::Closed))
}

fn random_field(mesh: &Mesh, seed: u64, lo: f64, hi: f64) -> ScalarField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ScalarField::new(mesh, (0..mesh.vertex_count()).map(|_| rng.gen_range(lo..hi)).collect()).unwrap()
}

fn rotate(samples: &[SpherePoint], seed: u64) -> Vec<SpherePoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
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
    samples
        .iter()
        .map(|s| {
            let x = s.ambient();
            let y: Vec<f64> = (0..4).map(|i| (0..4).map(|k| q[i][k] * x[k]).sum()).collect();
            SpherePoint::normalized(&y).unwrap()
        })
        .collect()
}

#[test]
fn stereographic_round_trip_on_a_thousand_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..1000 {
        let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-4.0..4.0)).collect();
        for pole in [Pole::North, Pole::South] {
            let p = stereo_inverse(&x, pole);
            let back = stereo_forward(&p, pole).unwrap();
            for (a, b) in x.iter().zip(&back) {
                assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()), "{x:?} -> {back:?}");
            }
            let again = stereo_inverse(&back, pole);
            for (a, b) in p.ambient().iter().zip(again.ambient()) {
                assert!((a - b).abs() <= 1e-12);
            }
        }
    }
}

#[test]
fn constant_image_is_the_curvature_mass() {
    let f = sphere1();
    let l = f.ops.conformal_matrix();
    assert!(l.symmetry_defect() <= 1e-14 * l.max_abs());
    let ones = vec![1.0; f.mesh.vertex_count()];
    let lhs = f.ops.conformal_matrix().mul(&ones);
    let rhs = f.ops.curvature_mass.mul(&ones);
    for (a, b) in lhs.iter().zip(&rhs) {
        assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
    }
}

#[test]
fn eigenpair_is_invariant_under_relabeling() {
    let (mesh, geom) = build_preset("bump-t3", 0).unwrap();
    let ops = assemble(&mesh, &geom, c3(), BcMode::Closed).unwrap();
    let base = first_eigenpair(&ops).unwrap();
    let mut perm: Vec<usize> = (0..mesh.vertex_count()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for i in (1..perm.len()).rev() {
        perm.swap(i, rng.gen_range(0..=i));
    }
    let pm = mesh.permuted(&perm).unwrap();
    let pg = GeometrySpec::from_model(&pm, geom.chart.clone(), geom.model.clone().unwrap(), "bump-t3").unwrap();
    let pe = first_eigenpair(&assemble(&pm, &pg, c3(), BcMode::Closed).unwrap()).unwrap();
    assert!((base.eigenvalue - pe.eigenvalue).abs() <= 1e-10 * base.eigenvalue.abs().max(1.0));
    for v in 0..mesh.vertex_count() {
        assert!((base.eigenfunction.values[v] - pe.eigenfunction.values[perm[v]]).abs() <= 1e-7);
    }
}

#[test]
fn trivial_route_recovers_the_constant_scaling() {
    // 6c = λc⁵ on the round sphere.
    let f = sphere0();
    for lambda in [3.0, 6.0, 12.0] {
        let target = CurvatureTarget::constant(&f.mesh, lambda);
        let r = prescribe(&f.mesh, &f.geom, &target, &PrescribeConfig::default()).unwrap();
        let c = (6.0f64 / lambda).powf(0.25);
        let u = r.solution.unwrap();
        assert!(u.values.iter().all(|x| (x - c).abs() <= 1e-9), "lambda {lambda}");
    }
}

#[test]
fn negative_scalar_normalization_properties() {
    let f = sphere1();
    for v in [0, 17, 101] {
        let n = negative_scalar_normalization(&f.mesh, &f.geom, &f.ops, v).unwrap();
        assert!(n.applied && n.value_before > 0.0 && n.value_after < 0.0);
        assert!(n.factor.min() > 0.0);
        assert!((n.geometry.scalar_curvature.values[v] - n.value_after).abs() <= 1e-12 * n.value_after.abs());
    }
}

#[test]
fn mean_curvature_normalization_makes_the_boundary_convex() {
    let f = fixture("annulus", 1, BcMode::Robin);
    let n = positive_mean_curvature_normalization(&f.mesh, &f.geom, &f.ops).unwrap();
    assert!(n.applied);
    let (pos, nonpos) = n.boundary_signs_after.unwrap();
    assert!(pos > 0 && nonpos == 0);
    assert!(n.value_after > 0.0);
    assert!(n.factor.min() > 0.0);
}

#[test]
fn iteration_stays_in_the_bracket_and_increases() {
    // Flat torus with the zero-order coefficient set to -1 and a varying
    // negative target: constants k with k⁴ ≤ 1/max|S| and k⁴ ≥ 1/min|S|
    // bracket a nonconstant solution.
    let (mesh, mut geom) = build_preset("flat-t3", 1).unwrap();
    geom.scalar_curvature = ScalarField::constant(&mesh, -1.0);
    for qp in geom.curvature_qp.iter_mut() {
        *qp = [-1.0; 4];
    }
    let ops = assemble(&mesh, &geom, c3(), BcMode::Closed).unwrap();
    let tau = std::f64::consts::TAU;
    for level in [0.5, 1.0, 2.0] {
        let s = ScalarField::from_fn(&mesh, |x| -level * (1.0 + 0.5 * (tau * x[1]).sin()));
        let u_minus = ScalarField::constant(&mesh, 0.9 * (1.0 / (1.5 * level)).powf(0.25));
        let u_plus = ScalarField::constant(&mesh, 1.1 * (1.0 / (0.5 * level)).powf(0.25));
        assert!(check_side(&ops, &s.values, &u_minus.values, Side::Sub).pass);
        assert!(check_side(&ops, &s.values, &u_plus.values, Side::Super).pass);
        let opts = IterationOptions { record_iterates: true, ..IterationOptions::default() };
        let st = monotone_iterate(&ops, &s, &u_minus, &u_plus, &opts).unwrap();
        assert!(st.converged);
        assert_eq!(st.bracket_violations, 0);
        for w in st.iterates.windows(2) {
            assert!(w[0].values.iter().zip(&w[1].values).all(|(a, b)| b >= &(a - 1e-12)));
        }
        let u = st.solution();
        assert!(u.max() - u.min() > 1e-3);
        for v in 0..mesh.vertex_count() {
            assert!(u.values[v] >= u_minus.values[v] - 1e-12 && u.values[v] <= u_plus.values[v] + 1e-12);
        }
        assert!(st.final_residual() <= 1e-8);
    }
}

#[test]
fn mesh_text_round_trip() {
    for preset in ["ball-negR", "flat-t3", "round-s3"] {
        let (mesh, _) = build_preset(preset, 0).unwrap();
        let back = io::read_mesh(&io::write_mesh(&mesh)).unwrap();
        assert_eq!(back.coords(), mesh.coords());
        assert_eq!(back.tets(), mesh.tets());
        assert_eq!(back.flags(), mesh.flags());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pullback_is_a_conformal_multiple_of_euclidean(x in prop::array::uniform3(-6.0f64..6.0), south in any::<bool>()) {
        let pole = if south { Pole::South } else { Pole::North };
        let g = pullback_metric(&x, pole);
        let lam = conformal_factor_phi(&x, 3).powf(c3().p - 2.0);
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { lam } else { 0.0 };
                prop_assert!((g[i][j] - want).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn li_yau_decreases_with_radius(r1 in 0.01f64..2.0, dr in 0.01f64..2.0, h in 0.0f64..5.0) {
        let b = |r: f64| li_yau_bound(&LiYauInputs { r_inj: r, ricci_lower: 0.0, h_min: h, n: 3 }).unwrap();
        prop_assert!(b(r1) > b(r1 + dr));
    }

    #[test]
    fn expression_literals_round_trip(v in -1e6f64..1e6) {
        let text = format!("{v:e}");
        prop_assert_eq!(Expr::parse(&text).unwrap().eval(&[]), text.parse::<f64>().unwrap());
        let neg = format!("-({v:e}) + 0");
        prop_assert_eq!(Expr::parse(&neg).unwrap().eval(&[]), -text.parse::<f64>().unwrap());
    }

    #[test]
    fn config_errors_point_at_the_offending_line(pad in 0usize..6) {
        let mut text = String::from("preset = round-s3\n");
        for _ in 0..pad {
            text.push_str("# filler\n");
        }
        text.push_str("refinement = many\n");
        match RunConfig::parse(&text) {
            Err(cyw_core::CywError::Config { line, .. }) => prop_assert_eq!(line, pad + 2),
            other => prop_assert!(false, "unexpected {:?}", other),
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn conformal_laplacian_is_linear(seed in any::<u64>(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let f = sphere0();
        let u = random_field(&f.mesh, seed, -1.0, 1.0);
        let v = random_field(&f.mesh, seed ^ 1, -1.0, 1.0);
        let w = ScalarField::new(&f.mesh, u.values.iter().zip(&v.values).map(|(x, y)| a * x + b * y).collect()).unwrap();
        let (lu, lv, lw) = (
            apply_conformal_laplacian(&f.ops, &u).unwrap(),
            apply_conformal_laplacian(&f.ops, &v).unwrap(),
            apply_conformal_laplacian(&f.ops, &w).unwrap(),
        );
        for i in 0..f.mesh.vertex_count() {
            prop_assert!((lw.values[i] - a * lu.values[i] - b * lv.values[i]).abs() <= 1e-12 * (1.0 + lw.values[i].abs()) * 10.0);
        }
    }

    #[test]
    fn yamabe_quotient_is_scale_invariant(seed in any::<u64>(), c in 0.01f64..100.0) {
        let f = sphere0();
        let u = random_field(&f.mesh, seed, 0.1, 2.0);
        let cu = ScalarField::new(&f.mesh, u.values.iter().map(|x| c * x).collect()).unwrap();
        let (q1, q2) = (yamabe_quotient(&f.ops, &u).unwrap(), yamabe_quotient(&f.ops, &cu).unwrap());
        prop_assert!((q1 - q2).abs() <= 1e-10 * q1.abs());
    }

    #[test]
    fn eigenvalue_sign_survives_conformal_change(dir in prop::array::uniform4(-1.0f64..1.0), amp in 0.0f64..0.4) {
        let f = sphere1();
        let norm = dir.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-9);
        let u = ScalarField::from_fn(&f.mesh, |x| 1.0 + amp * (0..4).map(|k| dir[k] * x[k]).sum::<f64>() / norm);
        let changed = conformal_change(&f.mesh, &f.geom, &f.ops, &u).unwrap();
        let before = first_eigenpair(&f.ops).unwrap().eigenvalue;
        let after = first_eigenpair(&assemble(&f.mesh, &changed, c3(), BcMode::Closed).unwrap()).unwrap().eigenvalue;
        prop_assert!(before > 0.0 && after > 0.0, "{} {}", before, after);
    }

    #[test]
    fn kazdan_warner_integral_is_additive_in_h(seed in any::<u64>(), alpha in -2.0f64..2.0) {
        let f = sphere0();
        let s = ScalarField::from_fn(&f.mesh, |x| 6.0 + x[0] - 0.5 * x[3]);
        let u = random_field(&f.mesh, seed, 0.5, 1.5);
        let h1 = random_field(&f.mesh, seed ^ 2, -1.0, 1.0);
        let h2 = random_field(&f.mesh, seed ^ 3, -1.0, 1.0);
        let h = ScalarField::new(&f.mesh, h1.values.iter().zip(&h2.values).map(|(a, b)| alpha * a + b).collect()).unwrap();
        let p = c3().p;
        let k = |h: &ScalarField| kw_obstruction(&f.mesh, &f.geom, &s, &u, h, p).unwrap();
        let (k1, k2, k12) = (k(&h1), k(&h2), k(&h));
        prop_assert!((k12 - alpha * k1 - k2).abs() <= 1e-12 * (1.0 + k1.abs() + k2.abs()) * 10.0);
    }

    #[test]
    fn condition_a_verdicts_ignore_rotations(seed in any::<u64>()) {
        let f = sphere1();
        let samples = mesh_samples(&f.mesh).unwrap();
        let turned = rotate(&samples, seed);
        let tol = cyw_core::sphere_tools::default_pair_tolerance(&f.mesh, &f.geom);
        let funcs: [fn(&[f64]) -> f64; 3] = [|_| 1.0, |x| x[3] * x[3], |x| x[3]];
        for q in funcs {
            let q = SphereFunction::new(q, Extension::Ambient);
            let a = check_condition_a(&q, &samples, tol).unwrap().verdict;
            let b = check_condition_a(&q, &turned, tol).unwrap().verdict;
            prop_assert_eq!(a, b);
        }
    }
}

#[test]
fn squared_transverse_coordinate_fails_the_antipodal_condition() {
    let f = sphere1();
    let samples = mesh_samples(&f.mesh).unwrap();
    let tol = cyw_core::sphere_tools::default_pair_tolerance(&f.mesh, &f.geom);
    for ext in [Extension::Ambient, Extension::DegreeZero] {
        let q = SphereFunction::new(|x| x[0] * x[0], ext);
        let v = check_condition_a(&q, &samples, tol).unwrap();
        assert!(!v.verdict.passed());
        assert!(!v.witnesses.is_empty());
    }
}
