//! Paired-point symmetry classifiers for candidate curvature functions on
//! the sphere.
//!
//! At a pair `(P, P′)` with axis `τ̂` and an orthonormal completion `ξ̂_i`,
//! relation (i) asks for `Q(P) = Q(P′)`, `∂_{ξ̂_i}Q(P) = ∂_{ξ̂_i}Q(P′)` and
//! `∂_{τ̂}Q(P) = −∂_{τ̂}Q(P′)` whenever the spherical gradient is nonzero at
//! `P`; relation (ii) is a vanishing spherical gradient at both points.

use super::stereo::SpherePoint;
use crate::error::{CywError, Result, Stage};
use std::collections::HashMap;
use std::fmt::Write as _;

/// Central-difference step of the gradient oracle.
pub const GRADIENT_STEP: f64 = 1e-5;
/// Value tolerance factor, applied to `1 + ‖Q‖∞`.
pub const VALUE_TOLERANCE: f64 = 1e-6;
/// Relative tolerance of the gradient relations.
pub const GRADIENT_TOLERANCE: f64 = 1e-4;

/// How a sphere function is extended off the sphere before differentiating.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Extension {
    /// The function's own ambient expression.
    Ambient,
    /// `Q″(x) = Q(x/|x|)`, homogeneous of degree 0.
    DegreeZero,
}

/// A function on the sphere with an ambient gradient oracle.
pub struct SphereFunction<'a> {
    f: Box<dyn Fn(&[f64]) -> f64 + 'a>,
    pub extension: Extension,
}

impl<'a> SphereFunction<'a> {
    pub fn new(f: impl Fn(&[f64]) -> f64 + 'a, extension: Extension) -> Self {
        SphereFunction { f: Box::new(f), extension }
    }

    fn extended(&self, x: &[f64]) -> f64 {
        match self.extension {
            Extension::Ambient => (self.f)(x),
            Extension::DegreeZero => {
                let n = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                let y: Vec<f64> = x.iter().map(|v| v / n).collect();
                (self.f)(&y)
            }
        }
    }

    pub fn value(&self, p: &SpherePoint) -> f64 {
        (self.f)(p.ambient())
    }

    /// Ambient gradient of the extension by central differences.
    pub fn gradient(&self, p: &SpherePoint) -> Vec<f64> {
        let x = p.ambient();
        let mut y = x.to_vec();
        (0..x.len())
            .map(|i| {
                y[i] = x[i] + GRADIENT_STEP;
                let fp = self.extended(&y);
                y[i] = x[i] - GRADIENT_STEP;
                let fm = self.extended(&y);
                y[i] = x[i];
                (fp - fm) / (2.0 * GRADIENT_STEP)
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    PassI,
    PassII,
    PassIII,
    Fail,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::PassI => "pass-i",
            Verdict::PassII => "pass-ii",
            Verdict::PassIII => "pass-iii",
            Verdict::Fail => "fail",
        }
    }

    pub fn passed(self) -> bool {
        self != Verdict::Fail
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Relation {
    ValueEquality,
    /// `∂_{ξ̂_i}` components differ.
    TangentialGradient(usize),
    /// `∂_{τ̂}` components are not opposite.
    AxialGradient,
    /// Spherical gradient vanishes at one point of the pair only.
    GradientPairing,
    Nonnegativity,
    /// `∇Q ≡ 0` but `Q` is not a positive constant.
    NonpositiveConstant,
}

impl Relation {
    pub fn name(&self) -> String {
        match self {
            Relation::ValueEquality => "value-equality".into(),
            Relation::TangentialGradient(i) => format!("tangential-gradient-{i}"),
            Relation::AxialGradient => "axial-gradient".into(),
            Relation::GradientPairing => "gradient-pairing".into(),
            Relation::Nonnegativity => "nonnegativity".into(),
            Relation::NonpositiveConstant => "nonpositive-constant".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Witness {
    pub pair_id: usize,
    pub points: (SpherePoint, SpherePoint),
    pub relation: Relation,
    pub gap: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConditionVerdict {
    pub verdict: Verdict,
    pub witnesses: Vec<Witness>,
    pub pairs_checked: usize,
    /// Pairs settled by relation (i).
    pub pairs_relation_i: usize,
    pub extension: Extension,
    pub notes: Vec<String>,
}

impl ConditionVerdict {
    /// `pair_id,relation,gap` rows.
    pub fn witness_csv(&self) -> String {
        let mut s = String::from("pair_id,relation,gap\n");
        for w in &self.witnesses {
            let _ = writeln!(s, "{},{},{:.6e}", w.pair_id, w.relation.name(), w.gap);
        }
        s
    }
}

/// A pair with the axis of its coordinate frame.
#[derive(Clone, Debug, PartialEq)]
pub struct PointPair {
    pub first: SpherePoint,
    pub second: SpherePoint,
    pub tau_axis: Vec<f64>,
}

/// Orthonormal completion of `axis` by Gram–Schmidt on the standard basis.
pub fn orthonormal_completion(axis: &[f64]) -> Vec<Vec<f64>> {
    let dim = axis.len();
    let mut basis: Vec<Vec<f64>> = vec![axis.to_vec()];
    for k in 0..dim {
        let mut e = vec![0.0; dim];
        e[k] = 1.0;
        for b in &basis {
            let d: f64 = e.iter().zip(b).map(|(x, y)| x * y).sum();
            e.iter_mut().zip(b).for_each(|(x, y)| *x -= d * y);
        }
        let n = e.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-8 {
            basis.push(e.iter().map(|x| x / n).collect());
        }
        if basis.len() == dim {
            break;
        }
    }
    basis.remove(0);
    basis
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn tangential_norm(g: &[f64], p: &SpherePoint) -> f64 {
    let z = p.ambient();
    let d = dot(g, z);
    g.iter().zip(z).map(|(gi, zi)| (gi - d * zi).powi(2)).sum::<f64>().sqrt()
}

/// Checks relations (i)–(iii) on the given pairs.
pub fn check_pairs(q: &SphereFunction, pairs: &[PointPair]) -> Result<ConditionVerdict> {
    let mut values = Vec::with_capacity(pairs.len());
    let mut grads = Vec::with_capacity(pairs.len());
    for (id, pair) in pairs.iter().enumerate() {
        let dist: f64 = pair.first.ambient().iter().zip(pair.second.ambient()).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        if dist < 1e-12 {
            return Err(CywError::invalid(Stage::Obstruction, format!("degenerate pair {id}")));
        }
        let an = pair.tau_axis.iter().map(|x| x * x).sum::<f64>().sqrt();
        if pair.tau_axis.len() != pair.first.ambient().len() || !(an > 0.0) {
            return Err(CywError::invalid(Stage::Obstruction, format!("pair {id} has an invalid axis")));
        }
        values.push((q.value(&pair.first), q.value(&pair.second)));
        grads.push((q.gradient(&pair.first), q.gradient(&pair.second)));
    }
    let q_sup = values.iter().fold(0.0f64, |m, &(a, b)| m.max(a.abs()).max(b.abs()));
    let g_sup = grads
        .iter()
        .flat_map(|(a, b)| a.iter().chain(b.iter()))
        .fold(0.0f64, |m, x| m.max(x.abs()));
    let value_tol = VALUE_TOLERANCE * (1.0 + q_sup);
    let grad_tol = GRADIENT_TOLERANCE * (1.0 + g_sup);

    let mut witnesses = Vec::new();
    let mut pairs_relation_i = 0;
    let mut any_gradient = false;
    for (id, pair) in pairs.iter().enumerate() {
        let (va, vb) = values[id];
        let (ga, gb) = (&grads[id].0, &grads[id].1);
        let points = (pair.first.clone(), pair.second.clone());
        let witness = |relation: Relation, gap: f64| Witness {
            pair_id: id,
            points: points.clone(),
            relation,
            gap,
        };
        for v in [va, vb] {
            if v < -value_tol {
                witnesses.push(witness(Relation::Nonnegativity, v));
            }
        }
        let na = tangential_norm(ga, &pair.first) > grad_tol;
        let nb = tangential_norm(gb, &pair.second) > grad_tol;
        any_gradient |= na || nb;
        if !na && !nb {
            continue;
        }
        if na != nb {
            witnesses.push(witness(Relation::GradientPairing, tangential_norm(ga, &pair.first) - tangential_norm(gb, &pair.second)));
        }
        pairs_relation_i += 1;
        if (va - vb).abs() > value_tol {
            witnesses.push(witness(Relation::ValueEquality, va - vb));
        }
        let an = pair.tau_axis.iter().map(|x| x * x).sum::<f64>().sqrt();
        let axis: Vec<f64> = pair.tau_axis.iter().map(|x| x / an).collect();
        let axial = dot(ga, &axis) + dot(gb, &axis);
        if axial.abs() > grad_tol {
            witnesses.push(witness(Relation::AxialGradient, axial));
        }
        for (i, e) in orthonormal_completion(&axis).iter().enumerate() {
            let gap = dot(ga, e) - dot(gb, e);
            if gap.abs() > grad_tol {
                witnesses.push(witness(Relation::TangentialGradient(i), gap));
            }
        }
    }

    let mut notes = Vec::new();
    let verdict = if !any_gradient {
        let positive = values.iter().all(|&(a, b)| a > value_tol && b > value_tol);
        let spread = values.iter().flat_map(|&(a, b)| [a, b]).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        if positive && spread.1 - spread.0 <= value_tol {
            if witnesses.is_empty() {
                Verdict::PassIII
            } else {
                Verdict::Fail
            }
        } else {
            let first = pairs.first().map(|p| (p.first.clone(), p.second.clone()));
            if let Some(points) = first {
                witnesses.push(Witness {
                    pair_id: 0,
                    points,
                    relation: Relation::NonpositiveConstant,
                    gap: spread.0,
                });
            }
            Verdict::Fail
        }
    } else if !witnesses.is_empty() {
        Verdict::Fail
    } else if pairs_relation_i > 0 {
        Verdict::PassI
    } else {
        Verdict::PassII
    };
    notes.push("transverse basis: Gram-Schmidt completion of the pair axis; relation (i) may depend on this choice".into());
    if q.extension == Extension::DegreeZero {
        notes.push("degree-0 extension: axial components vanish identically".into());
    }
    Ok(ConditionVerdict {
        verdict,
        witnesses,
        pairs_checked: pairs.len(),
        pairs_relation_i,
        extension: q.extension,
        notes,
    })
}

/// Pairs every sample with the sample nearest to its antipode.
pub fn antipodal_pairs(samples: &[SpherePoint], tolerance: f64) -> Result<Vec<(usize, usize)>> {
    if samples.is_empty() {
        return Ok(Vec::new());
    }
    let cell = tolerance.max(1e-9) * 2.0;
    let key = |x: &[f64]| -> Vec<i64> { x.iter().map(|v| (v / cell).floor() as i64).collect() };
    let mut grid: HashMap<Vec<i64>, Vec<usize>> = HashMap::new();
    for (i, s) in samples.iter().enumerate() {
        grid.entry(key(s.ambient())).or_default().push(i);
    }
    let dim = samples[0].ambient().len();
    let mut out = Vec::new();
    for (i, s) in samples.iter().enumerate() {
        let target: Vec<f64> = s.ambient().iter().map(|x| -x).collect();
        let base = key(&target);
        let mut best: Option<(usize, f64)> = None;
        let mut offset = vec![-1i64; dim];
        loop {
            let k: Vec<i64> = base.iter().zip(&offset).map(|(a, b)| a + b).collect();
            if let Some(list) = grid.get(&k) {
                for &j in list {
                    let d = samples[j].ambient().iter().zip(&target).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                    if best.is_none_or(|(bj, bd)| d < bd || (d == bd && j < bj)) {
                        best = Some((j, d));
                    }
                }
            }
            let mut c = 0;
            while c < dim {
                offset[c] += 1;
                if offset[c] <= 1 {
                    break;
                }
                offset[c] = -1;
                c += 1;
            }
            if c == dim {
                break;
            }
        }
        match best {
            Some((j, d)) if d <= tolerance => {
                if i < j {
                    out.push((i, j));
                } else if i == j {
                    return Err(CywError::invalid(Stage::Obstruction, format!("sample {i} is its own antipode")));
                }
            }
            _ => {
                return Err(CywError::invalid(
                    Stage::Obstruction,
                    format!("sample {i} has no antipodal partner within {tolerance:.3e}"),
                ))
            }
        }
    }
    Ok(out)
}

/// Antipodal classification with the fixed last ambient axis as `τ̂`.
pub fn check_condition_a(q: &SphereFunction, samples: &[SpherePoint], pair_tolerance: f64) -> Result<ConditionVerdict> {
    let pairs = antipodal_pairs(samples, pair_tolerance)?;
    let Some(first) = samples.first() else {
        return Err(CywError::invalid(Stage::Obstruction, "no samples"));
    };
    let dim = first.ambient().len();
    let mut axis = vec![0.0; dim];
    axis[dim - 1] = 1.0;
    let list: Vec<PointPair> = pairs
        .iter()
        .map(|&(i, j)| PointPair {
            first: samples[i].clone(),
            second: samples[j].clone(),
            tau_axis: axis.clone(),
        })
        .collect();
    check_pairs(q, &list)
}

/// Classification on caller-supplied pairs. A missing axis defaults to the
/// unit vector from the first point to the second.
pub fn check_condition_b(q: &SphereFunction, pairs: &[(SpherePoint, SpherePoint, Option<Vec<f64>>)]) -> Result<ConditionVerdict> {
    let list: Vec<PointPair> = pairs
        .iter()
        .map(|(a, b, axis)| PointPair {
            first: a.clone(),
            second: b.clone(),
            tau_axis: axis.clone().unwrap_or_else(|| b.ambient().iter().zip(a.ambient()).map(|(x, y)| x - y).collect()),
        })
        .collect();
    check_pairs(q, &list)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn samples() -> Vec<SpherePoint> {
        let mut out = Vec::new();
        for i in 0..6 {
            for j in 0..5 {
                let a = std::f64::consts::PI * (i as f64 + 0.5) / 6.0;
                let b = 2.0 * std::f64::consts::PI * j as f64 / 5.0;
                let p = [a.sin() * b.cos(), a.sin() * b.sin() * 0.6, a.sin() * b.sin() * 0.8, a.cos()];
                let s = SpherePoint::normalized(&p).unwrap();
                out.push(s.antipode());
                out.push(s);
            }
        }
        out
    }

    #[test]
    fn classifies_reference_functions() {
        let s = samples();
        let one = SphereFunction::new(|_| 1.0, Extension::Ambient);
        assert_eq!(check_condition_a(&one, &s, 1e-9).unwrap().verdict, Verdict::PassIII);
        let even = SphereFunction::new(|x| x[3] * x[3], Extension::Ambient);
        assert_eq!(check_condition_a(&even, &s, 1e-9).unwrap().verdict, Verdict::PassI);
        let odd = SphereFunction::new(|x| x[3], Extension::Ambient);
        let v = check_condition_a(&odd, &s, 1e-9).unwrap();
        assert_eq!(v.verdict, Verdict::Fail);
        assert!(v.witnesses.iter().any(|w| w.relation == Relation::ValueEquality));
    }

    #[test]
    fn degree_zero_extension_rejects_even_powers() {
        let even = SphereFunction::new(|x| x[3] * x[3], Extension::DegreeZero);
        let v = check_condition_a(&even, &samples(), 1e-9).unwrap();
        assert_eq!(v.verdict, Verdict::Fail);
        assert!(v.witnesses.iter().all(|w| matches!(w.relation, Relation::TangentialGradient(_))));
    }

    #[test]
    fn completion_is_orthonormal() {
        let b = orthonormal_completion(&[0.0, 0.6, 0.8, 0.0]);
        assert_eq!(b.len(), 3);
        for (i, x) in b.iter().enumerate() {
            assert!((dot(x, x) - 1.0).abs() < 1e-14);
            assert!(dot(x, &[0.0, 0.6, 0.8, 0.0]).abs() < 1e-14);
            for y in &b[i + 1..] {
                assert!(dot(x, y).abs() < 1e-14);
            }
        }
    }
}
