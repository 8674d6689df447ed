//! Krylov solvers: Jacobi-preconditioned conjugate gradients for SPD
//! systems and preconditioned MINRES for symmetric indefinite ones.

use super::sparse::{dot, CsrMatrix};
use crate::error::{CywError, Result, Stage};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    /// Final relative residual `‖b − Ax‖ / ‖b‖`.
    pub relative_residual: f64,
    pub converged: bool,
}

fn jacobi(a: &CsrMatrix) -> Result<Vec<f64>> {
    a.diagonal()
        .iter()
        .map(|&d| {
            if d > 0.0 && d.is_finite() {
                Ok(1.0 / d)
            } else {
                Err(CywError::failure(Stage::Assembly, "matrix has a nonpositive diagonal entry"))
            }
        })
        .collect()
}

fn true_residual(a: &CsrMatrix, b: &[f64], x: &[f64]) -> f64 {
    let ax = a.mul(x);
    let r: f64 = b.iter().zip(&ax).map(|(bi, ai)| (bi - ai) * (bi - ai)).sum::<f64>().sqrt();
    let nb = dot(b, b).sqrt();
    if nb == 0.0 {
        r
    } else {
        r / nb
    }
}

/// Solves `Ax = b` for SPD `A`, starting from the given `x`. Fails when a
/// direction of nonpositive curvature is met.
pub fn pcg(a: &CsrMatrix, b: &[f64], x: &mut [f64], tol: f64, max_iter: usize) -> Result<SolveStats> {
    let n = a.dim();
    let dinv = jacobi(a)?;
    let nb = dot(b, b).sqrt();
    if nb == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(SolveStats {
            iterations: 0,
            relative_residual: 0.0,
            converged: true,
        });
    }
    let mut r: Vec<f64> = {
        let ax = a.mul(x);
        b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect()
    };
    let mut z: Vec<f64> = r.iter().zip(&dinv).map(|(ri, di)| ri * di).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let mut it = 0;
    let mut rnorm = dot(&r, &r).sqrt();
    while it < max_iter && rnorm > tol * nb {
        a.matvec_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(CywError::failure(Stage::Assembly, "conjugate gradients met a non-positive-definite direction"));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        for i in 0..n {
            z[i] = r[i] * dinv[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        rnorm = dot(&r, &r).sqrt();
        it += 1;
        // Refresh the recursive residual periodically to curb drift.
        if it % 200 == 0 {
            let ax = a.mul(x);
            for i in 0..n {
                r[i] = b[i] - ax[i];
                z[i] = r[i] * dinv[i];
            }
            rz = dot(&r, &z);
            p.copy_from_slice(&z);
            rnorm = dot(&r, &r).sqrt();
        }
    }
    let rel = true_residual(a, b, x);
    Ok(SolveStats {
        iterations: it,
        relative_residual: rel,
        converged: rel <= tol * 10.0 || rnorm <= tol * nb,
    })
}

/// Preconditioned MINRES for symmetric `A` with the SPD diagonal
/// preconditioner `|diag A|`.
pub fn minres(a: &CsrMatrix, b: &[f64], x: &mut [f64], tol: f64, max_iter: usize) -> Result<SolveStats> {
    let n = a.dim();
    let minv: Vec<f64> = a
        .diagonal()
        .iter()
        .map(|d| if d.abs() > 0.0 { 1.0 / d.abs() } else { 1.0 })
        .collect();
    let prec = |v: &[f64]| -> Vec<f64> { v.iter().zip(&minv).map(|(a, b)| a * b).collect() };

    let ax = a.mul(x);
    let mut r1: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    let mut y = prec(&r1);
    let beta1 = dot(&r1, &y).sqrt();
    if beta1 == 0.0 {
        return Ok(SolveStats {
            iterations: 0,
            relative_residual: true_residual(a, b, x),
            converged: true,
        });
    }
    let mut r2 = r1.clone();
    let (mut oldb, mut beta) = (0.0, beta1);
    let (mut dbar, mut epsln, mut phibar) = (0.0, 0.0, beta1);
    let (mut cs, mut sn) = (-1.0f64, 0.0f64);
    let mut w = vec![0.0; n];
    let mut w2 = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut it = 0;
    while it < max_iter {
        it += 1;
        let s = 1.0 / beta;
        for i in 0..n {
            v[i] = s * y[i];
        }
        a.matvec_into(&v, &mut y);
        if it >= 2 {
            for i in 0..n {
                y[i] -= (beta / oldb) * r1[i];
            }
        }
        let alfa = dot(&v, &y);
        for i in 0..n {
            y[i] -= (alfa / beta) * r2[i];
        }
        std::mem::swap(&mut r1, &mut r2);
        r2.copy_from_slice(&y);
        y = prec(&r2);
        oldb = beta;
        let bb = dot(&r2, &y);
        if bb < 0.0 {
            return Err(CywError::failure(Stage::Assembly, "MINRES preconditioner lost definiteness"));
        }
        beta = bb.sqrt();
        let oldeps = epsln;
        let delta = cs * dbar + sn * alfa;
        let gbar = sn * dbar - cs * alfa;
        epsln = sn * beta;
        dbar = -cs * beta;
        let gamma = gbar.hypot(beta).max(f64::EPSILON);
        cs = gbar / gamma;
        sn = beta / gamma;
        let phi = cs * phibar;
        phibar *= sn;
        for i in 0..n {
            let w1 = w2[i];
            w2[i] = w[i];
            w[i] = (v[i] - oldeps * w1 - delta * w2[i]) / gamma;
            x[i] += phi * w[i];
        }
        if phibar <= tol * beta1 || beta == 0.0 {
            break;
        }
    }
    let rel = true_residual(a, b, x);
    Ok(SolveStats {
        iterations: it,
        relative_residual: rel,
        converged: phibar <= tol * beta1 * 10.0 || rel <= tol * 10.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplace_1d(n: usize, shift: f64) -> CsrMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0 + shift));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -1.0));
            }
        }
        CsrMatrix::from_triplets(n, t)
    }

    #[test]
    fn cg_solves_spd_system() {
        let a = laplace_1d(50, 0.0);
        let b: Vec<f64> = (0..50).map(|i| (i as f64 * 0.3).sin()).collect();
        let mut x = vec![0.0; 50];
        let st = pcg(&a, &b, &mut x, 1e-12, 500).unwrap();
        assert!(st.converged && st.relative_residual < 1e-11);
    }

    #[test]
    fn cg_rejects_indefinite_matrix() {
        let a = laplace_1d(20, -1.5);
        let b = vec![1.0; 20];
        let mut x = vec![0.0; 20];
        assert!(pcg(&a, &b, &mut x, 1e-12, 500).is_err());
    }

    #[test]
    fn minres_solves_indefinite_system() {
        let a = laplace_1d(40, -0.9);
        let b: Vec<f64> = (0..40).map(|i| 1.0 + (i as f64).cos()).collect();
        let mut x = vec![0.0; 40];
        let st = minres(&a, &b, &mut x, 1e-12, 2000).unwrap();
        assert!(st.relative_residual < 1e-10, "{st:?}");
    }
}
