use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::csr::CsrMatrix;
use crate::error::{Error, Result};

/// A symmetric operator `y = A x`.
pub trait LinearOperator {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

impl LinearOperator for CsrMatrix {
    fn dim(&self) -> usize {
        self.n()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.spmv_into(x, y);
    }
}

impl LinearOperator for DMatrix<f64> {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.row(i).iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub iterations: usize,
    /// `‖b − A x‖ / ‖b‖`, recomputed from the returned iterate.
    pub relative_residual: f64,
    pub converged: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MinresOptions {
    pub tol: f64,
    /// `None` means `10 n`.
    pub maxiter: Option<usize>,
}

impl Default for MinresOptions {
    fn default() -> Self {
        MinresOptions {
            tol: 1e-8,
            maxiter: None,
        }
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn true_residual<A: LinearOperator + ?Sized>(
    a: &A,
    x: &[f64],
    b: &[f64],
    scratch: &mut [f64],
) -> f64 {
    a.apply(x, scratch);
    scratch
        .iter()
        .zip(b)
        .map(|(ax, bi)| (bi - ax).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Unpreconditioned MINRES (Paige and Saunders) for symmetric, possibly
/// indefinite systems. Convergence is declared only after the recurrence
/// estimate drops below `tol` and a recomputed true residual confirms it.
/// Non-convergence is reported through `SolveReport::converged`, not as an
/// error.
pub fn minres<A: LinearOperator + ?Sized>(
    a: &A,
    b: &[f64],
    opts: &MinresOptions,
    x0: Option<&[f64]>,
) -> Result<(Vec<f64>, SolveReport)> {
    let n = a.dim();
    if b.len() != n {
        return Err(Error::input(format!(
            "rhs length {} for an n = {n} operator",
            b.len()
        )));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::input("MINRES tolerance must be positive"));
    }
    let maxiter = opts.maxiter.unwrap_or(10 * n.max(1));
    let bnorm = norm(b);
    if bnorm == 0.0 {
        return Ok((
            vec![0.0; n],
            SolveReport {
                iterations: 0,
                relative_residual: 0.0,
                converged: true,
            },
        ));
    }

    let mut x = match x0 {
        Some(x0) if x0.len() == n => x0.to_vec(),
        Some(_) => return Err(Error::input("warm start has the wrong length")),
        None => vec![0.0; n],
    };
    let mut scratch = vec![0.0; n];
    let mut r1 = vec![0.0; n];
    a.apply(&x, &mut scratch);
    for i in 0..n {
        r1[i] = b[i] - scratch[i];
    }
    let beta1 = norm(&r1);
    if beta1 / bnorm <= opts.tol {
        return Ok((
            x,
            SolveReport {
                iterations: 0,
                relative_residual: beta1 / bnorm,
                converged: true,
            },
        ));
    }

    let mut r2 = r1.clone();
    let mut y = r1.clone();
    let mut v = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut w1 = vec![0.0; n];
    let mut w2 = vec![0.0; n];
    let (mut oldb, mut beta) = (0.0, beta1);
    let (mut dbar, mut epsln, mut phibar) = (0.0, 0.0, beta1);
    let (mut cs, mut sn) = (-1.0f64, 0.0f64);
    let mut itn = 0;
    let mut rel = beta1 / bnorm;

    while itn < maxiter {
        itn += 1;
        let s = 1.0 / beta;
        for i in 0..n {
            v[i] = s * y[i];
        }
        a.apply(&v, &mut y);
        if itn >= 2 {
            let f = beta / oldb;
            for i in 0..n {
                y[i] -= f * r1[i];
            }
        }
        let alfa = dot(&v, &y);
        let f = alfa / beta;
        for i in 0..n {
            y[i] -= f * r2[i];
        }
        std::mem::swap(&mut r1, &mut r2);
        r2.copy_from_slice(&y);
        oldb = beta;
        beta = norm(&r2);

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

        let denom = 1.0 / gamma;
        std::mem::swap(&mut w1, &mut w2);
        std::mem::swap(&mut w2, &mut w);
        for i in 0..n {
            w[i] = (v[i] - oldeps * w1[i] - delta * w2[i]) * denom;
            x[i] += phi * w[i];
        }

        if phibar / bnorm <= opts.tol || beta == 0.0 {
            rel = true_residual(a, &x, b, &mut scratch) / bnorm;
            if rel <= opts.tol {
                return Ok((
                    x,
                    SolveReport {
                        iterations: itn,
                        relative_residual: rel,
                        converged: true,
                    },
                ));
            }
            if beta == 0.0 {
                break;
            }
        }
    }
    if itn > 0 {
        rel = true_residual(a, &x, b, &mut scratch) / bnorm;
    }
    Ok((
        x,
        SolveReport {
            iterations: itn,
            relative_residual: rel,
            converged: rel <= opts.tol,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_one_iteration() {
        let b = vec![1.0, -2.0, 0.5];
        let (x, r) = minres(&CsrMatrix::identity(3), &b, &MinresOptions::default(), None).unwrap();
        assert!(r.converged && r.iterations <= 1);
        for (xi, bi) in x.iter().zip(&b) {
            assert!((xi - bi).abs() < 1e-14);
        }
    }

    #[test]
    fn diagonal_system() {
        let a = CsrMatrix::from_diagonal(&[2.0, 4.0]);
        let (x, r) = minres(&a, &[2.0, 4.0], &MinresOptions::default(), None).unwrap();
        assert!(r.converged);
        assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_rhs() {
        let (x, r) = minres(
            &CsrMatrix::identity(2),
            &[0.0, 0.0],
            &MinresOptions::default(),
            None,
        )
        .unwrap();
        assert_eq!(x, vec![0.0, 0.0]);
        assert_eq!(r.iterations, 0);
    }

    #[test]
    fn indefinite_system() {
        let a = CsrMatrix::from_diagonal(&[3.0, -1.0, 2.0]);
        let (x, r) = minres(&a, &[3.0, 1.0, 1.0], &MinresOptions::default(), None).unwrap();
        assert!(r.converged);
        assert!(
            (x[0] - 1.0).abs() < 1e-10 && (x[1] + 1.0).abs() < 1e-10 && (x[2] - 0.5).abs() < 1e-10
        );
    }

    #[test]
    fn iteration_cap_reports_nonconvergence() {
        let d: Vec<f64> = (1..=50).map(|i| i as f64).collect();
        let a = CsrMatrix::from_diagonal(&d);
        let opts = MinresOptions {
            tol: 1e-12,
            maxiter: Some(3),
        };
        let (_, r) = minres(&a, &vec![1.0; 50], &opts, None).unwrap();
        assert!(!r.converged);
        assert_eq!(r.iterations, 3);
    }

    #[test]
    fn warm_start_at_solution() {
        let a = CsrMatrix::from_diagonal(&[2.0, 4.0]);
        let (_, r) = minres(
            &a,
            &[2.0, 4.0],
            &MinresOptions::default(),
            Some(&[1.0, 1.0]),
        )
        .unwrap();
        assert_eq!(r.iterations, 0);
    }
}
